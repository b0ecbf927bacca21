//! Dormand–Prince 5(4) with dense output only at requested times (steps are
//! clipped to land on them).

use crate::error::{Error, Result};
use crate::tolerances;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Solutions whose max-norm exceeds this are reported as blow-up.
    pub blowup: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: tolerances::RK_TOL,
            atol: tolerances::RK_TOL,
            max_step: tolerances::RK_MAX_STEP,
            blowup: tolerances::BLOWUP,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates y' = f(t, y) from (t0, y0) and returns y at every entry of
/// `outputs`, which may lie on either side of t0 in any order.
pub fn integrate<const N: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; N],
    outputs: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut result = vec![[0.0; N]; outputs.len()];
    for dir in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..outputs.len())
            .filter(|&i| {
                let d = outputs[i] - t0;
                if dir > 0.0 {
                    d >= 0.0
                } else {
                    d < 0.0
                }
            })
            .collect();
        idx.sort_by(|&a, &b| (dir * outputs[a]).total_cmp(&(dir * outputs[b])));
        let targets: Vec<f64> = idx.iter().map(|&i| outputs[i]).collect();
        let ys = sweep(&f, t0, y0, &targets, dir, opts)?;
        for (i, y) in idx.into_iter().zip(ys) {
            result[i] = y;
        }
    }
    Ok(result)
}

fn sweep<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    targets: &[f64],
    dir: f64,
    opts: &OdeOptions,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut out = Vec::with_capacity(targets.len());
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.max_step.min(1e-3);
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y);
    for &target in targets {
        while dir * (target - t) > 0.0 {
            let remaining = dir * (target - t);
            let step = h.min(remaining).min(opts.max_step);
            let hs = dir * step;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += hs * a * kj[i];
                        }
                    }
                }
                k[s] = f(t + C[s] * hs, &ys);
            }
            let mut y_new = y;
            for (j, kj) in k.iter().enumerate() {
                if B[j] != 0.0 {
                    for i in 0..N {
                        y_new[i] += hs * B[j] * kj[i];
                    }
                }
            }
            let mut err = 0.0;
            for i in 0..N {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (hs * e / sc).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if err <= 1.0 {
                t = if step == remaining { target } else { t + hs };
                y = y_new;
                k[0] = k[6];
                if y.iter().any(|v| !v.is_finite())
                    || y.iter().fold(0.0f64, |m, v| m.max(v.abs())) > opts.blowup
                {
                    return Err(Error::BlowUp { t });
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // a step shortened to land on a target says nothing about h
                h = if step < h {
                    h.max(step * fac)
                } else {
                    step * fac
                };
            } else {
                let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                h = step * fac;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t });
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}
