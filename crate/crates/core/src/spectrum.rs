//! Mode-by-mode reduction of the conjugated linearized operator on the neck
//! cylinder: indicial roots, the scalar and coupled mode ODEs, the explicit
//! solutions that are known in closed form, and exponential-rate fits.

use nalgebra::{DMatrix, Vector2};
use serde::Serialize;

use crate::error::{ensure_dim, Error, Result};
use crate::neck::t_to_s;
use crate::ode::{self, OdeOptions};
use crate::tolerances;

/// λ_k = k(n − 2 + k), the k-th eigenvalue of −Δ on S^{n−1}.
pub fn sphere_eigenvalue(n: usize, k: usize) -> f64 {
    (k * (n - 2 + k)) as f64
}

/// Eigenvalue (k+1)(n−3+k) of the Hodge Laplacian on coexact 1-forms.
pub fn coexact_eigenvalue(n: usize, k: usize) -> f64 {
    ((k + 1) as f64) * (n as f64 - 3.0 + k as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RootPair {
    pub plus: f64,
    pub minus: f64,
}

impl RootPair {
    fn of(v: f64) -> Self {
        Self { plus: v, minus: -v }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IndicialTable {
    pub n: usize,
    pub k: usize,
    /// γ_k^± = ±((n−2)/2 + k), defined for k ≥ 1.
    pub coexact: Option<RootPair>,
    /// μ_k^± = ±(n/2 + k).
    pub exact_mu: RootPair,
    /// ν_k^± = ±((n−4)/2 + k), defined for k ≥ 1.
    pub exact_nu: Option<RootPair>,
}

impl IndicialTable {
    pub fn coexact_roots(&self) -> Result<RootPair> {
        self.coexact
            .ok_or_else(|| Error::InvalidInput("the coexact family starts at k = 1".into()))
    }
}

pub fn indicial_roots(n: usize, k: usize) -> Result<IndicialTable> {
    ensure_dim(n)?;
    let (nf, kf) = (n as f64, k as f64);
    Ok(IndicialTable {
        n,
        k,
        coexact: (k >= 1).then(|| RootPair::of((nf - 2.0) / 2.0 + kf)),
        exact_mu: RootPair::of(nf / 2.0 + kf),
        exact_nu: (k >= 1).then(|| RootPair::of((nf - 4.0) / 2.0 + kf)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeFamily {
    /// k = 0 scalar mode.
    Radial,
    /// Coupled (a, b) system on exact forms, k ≥ 1.
    Exact(usize),
    /// Scalar coexact mode, k ≥ 1.
    Coexact(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// Full tanh/sech coefficients.
    Interior,
    /// The limit t → −∞: tanh(nt) → −1, sech(nt) → 0.
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum End {
    Minus,
    Plus,
}

/// Second-order mode system written as y = (a, ȧ, b, ḃ); b ≡ 0 for scalar
/// families.
///
/// Exact(k), λ = λ_k:
///   ä = (λ + n²/4) a + 2 tanh(nt) λ b − (3n²/4) sech²(nt) a
///   b̈ = (λ + (n−4)²/4) b + 2 tanh(nt) a − ((16−n²)/4) sech²(nt) b
/// Radial:  ä = (n²/4) a − (3n²/4) sech²(nt) a
/// Coexact: ä = (λ'_k + (n−4)²/4) a − ((16−n²)/4) sech²(nt) a
#[derive(Clone, Copy, Debug)]
pub struct ModeSystem {
    pub n: usize,
    pub family: ModeFamily,
    pub kind: SystemKind,
}

impl ModeSystem {
    pub fn new(n: usize, family: ModeFamily, kind: SystemKind) -> Result<Self> {
        ensure_dim(n)?;
        match family {
            ModeFamily::Exact(0) | ModeFamily::Coexact(0) => Err(Error::InvalidInput(
                "coupled and coexact mode systems need k >= 1".into(),
            )),
            _ => Ok(Self { n, family, kind }),
        }
    }

    pub fn is_coupled(&self) -> bool {
        matches!(self.family, ModeFamily::Exact(_))
    }

    fn coefficients(&self, t: f64) -> (f64, f64) {
        let nf = self.n as f64;
        match self.kind {
            SystemKind::Interior => {
                let c = (nf * t).cosh();
                ((nf * t).tanh(), 1.0 / (c * c))
            }
            SystemKind::Asymptotic => (-1.0, 0.0),
        }
    }

    pub fn rhs(&self, t: f64, y: &[f64; 4]) -> [f64; 4] {
        let nf = self.n as f64;
        let (th, sech2) = self.coefficients(t);
        match self.family {
            ModeFamily::Radial => {
                let acc = 0.25 * nf * nf * y[0] - 0.75 * nf * nf * sech2 * y[0];
                [y[1], acc, 0.0, 0.0]
            }
            ModeFamily::Coexact(k) => {
                let p = coexact_eigenvalue(self.n, k) + 0.25 * (nf - 4.0).powi(2);
                let acc = p * y[0] - 0.25 * (16.0 - nf * nf) * sech2 * y[0];
                [y[1], acc, 0.0, 0.0]
            }
            ModeFamily::Exact(k) => {
                let lam = sphere_eigenvalue(self.n, k);
                let (a, b) = (y[0], y[2]);
                let acc_a =
                    (lam + 0.25 * nf * nf) * a + 2.0 * th * lam * b - 0.75 * nf * nf * sech2 * a;
                let acc_b = (lam + 0.25 * (nf - 4.0).powi(2)) * b + 2.0 * th * a
                    - 0.25 * (16.0 - nf * nf) * sech2 * b;
                [y[1], acc_a, y[3], acc_b]
            }
        }
    }

    /// First-order matrix of the system frozen at the given end.
    pub fn frozen_matrix(&self, end: End) -> DMatrix<f64> {
        let frozen = ModeSystem {
            kind: SystemKind::Interior,
            ..*self
        };
        let t = match end {
            End::Minus => -60.0,
            End::Plus => 60.0,
        };
        let (th, _) = frozen.coefficients(t);
        let nf = self.n as f64;
        match self.family {
            ModeFamily::Exact(k) => {
                let lam = sphere_eigenvalue(self.n, k);
                let mut m = DMatrix::zeros(4, 4);
                m[(0, 1)] = 1.0;
                m[(2, 3)] = 1.0;
                m[(1, 0)] = lam + 0.25 * nf * nf;
                m[(1, 2)] = 2.0 * th * lam;
                m[(3, 2)] = lam + 0.25 * (nf - 4.0).powi(2);
                m[(3, 0)] = 2.0 * th;
                m
            }
            ModeFamily::Radial => DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.25 * nf * nf, 0.0]),
            ModeFamily::Coexact(k) => {
                let p = coexact_eigenvalue(self.n, k) + 0.25 * (nf - 4.0).powi(2);
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, p, 0.0])
            }
        }
    }
}

/// Characteristic exponents of the system frozen at one end, ascending.
/// For the coupled family these solve (x − p)(x − q) = 4λ with x = σ²,
/// p = λ + n²/4, q = λ + (n−4)²/4.
pub fn frozen_roots(n: usize, family: ModeFamily, end: End) -> Result<Vec<f64>> {
    ModeSystem::new(n, family, SystemKind::Interior)?;
    let nf = n as f64;
    let th = match end {
        End::Minus => -1.0,
        End::Plus => 1.0,
    };
    let mut roots = match family {
        ModeFamily::Radial => {
            let x: f64 = 0.25 * nf * nf;
            vec![-x.sqrt(), x.sqrt()]
        }
        ModeFamily::Coexact(k) => {
            let x = coexact_eigenvalue(n, k) + 0.25 * (nf - 4.0).powi(2);
            vec![-x.sqrt(), x.sqrt()]
        }
        ModeFamily::Exact(k) => {
            let lam = sphere_eigenvalue(n, k);
            let p = lam + 0.25 * nf * nf;
            let q = lam + 0.25 * (nf - 4.0).powi(2);
            let cross = 4.0 * th * th * lam;
            let disc = ((p - q).powi(2) + 4.0 * cross).sqrt();
            let (x1, x2) = (0.5 * (p + q + disc), 0.5 * (p + q - disc));
            vec![-x1.sqrt(), -x2.sqrt(), x2.sqrt(), x1.sqrt()]
        }
    };
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// sup over the grid of |f₀'' − (n²/4) f₀ + (3n²/4) sech²(nt) f₀| for
/// f₀ = (cosh nt)^{−1/2}, with f₀'' written out by hand.
pub fn verify_f0(n: usize, t_grid: &[f64]) -> Result<f64> {
    ensure_dim(n)?;
    let nf = n as f64;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let c = (nf * t).cosh();
            let s = (nf * t).sinh();
            let f0 = c.powf(-0.5);
            let f2 = -0.5 * nf * nf * c.powf(-0.5) + 0.75 * nf * nf * s * s * c.powf(-2.5);
            (f2 - 0.25 * nf * nf * f0 + 0.75 * nf * nf * f0 / (c * c)).abs()
        })
        .fold(0.0, f64::max))
}

/// (a₁, b₁)(t) = ((sin 3s)^{−1/6} sin 2s, −(sin 3s)^{−1/6} sin s), s = s(t),
/// the explicit solution of the n = 3, k = 1 system.
pub fn explicit_n3_solution(t: f64) -> Result<(f64, f64)> {
    let st = explicit_n3_state(t)?;
    Ok((st[0], st[2]))
}

/// (a₁, ȧ₁, b₁, ḃ₁) using ds/dt = sin 3s.
pub fn explicit_n3_state(t: f64) -> Result<[f64; 4]> {
    let s = t_to_s(t, 3)?;
    // sin 3s = sech 3t and cos 3s = −tanh 3t, without the cancellation near 3s = π
    let sig = 1.0 / (3.0 * t).cosh();
    let w = sig.powf(-1.0 / 6.0);
    let cot = -(3.0 * t).sinh();
    let a = w * (2.0 * s).sin();
    let b = -w * s.sin();
    let da_ds = w * (2.0 * (2.0 * s).cos() - 0.5 * cot * (2.0 * s).sin());
    let db_ds = -w * (s.cos() - 0.5 * cot * s.sin());
    Ok([a, sig * da_ds, b, sig * db_ds])
}

/// sup of the n = 3, k = 1 system residual of (a₁, b₁), with second
/// derivatives from the five-point stencil of width h.
pub fn explicit_n3_residual(t_grid: &[f64], h: f64) -> Result<f64> {
    let sys = ModeSystem::new(3, ModeFamily::Exact(1), SystemKind::Interior)?;
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let mut vals = [[0.0; 2]; 5];
        for (i, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
            let (a, b) = explicit_n3_solution(t + off * h)?;
            vals[i] = [a, b];
        }
        let d2 = |c: usize| {
            (-vals[0][c] + 16.0 * vals[1][c] - 30.0 * vals[2][c] + 16.0 * vals[3][c] - vals[4][c])
                / (12.0 * h * h)
        };
        let y = [vals[2][0], 0.0, vals[2][1], 0.0];
        let rhs = sys.rhs(t, &y);
        worst = worst
            .max((d2(0) - rhs[1]).abs())
            .max((d2(1) - rhs[3]).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeSolution {
    pub n: usize,
    pub family: ModeFamily,
    pub kind: SystemKind,
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Option<Vec<f64>>,
}

impl ModeSolution {
    /// Wraps samples that did not come from the integrator (closed forms).
    pub fn from_samples(
        n: usize,
        family: ModeFamily,
        kind: SystemKind,
        t: Vec<f64>,
        a: Vec<f64>,
        b: Option<Vec<f64>>,
    ) -> Result<Self> {
        if a.len() != t.len() || b.as_ref().is_some_and(|b| b.len() != t.len()) {
            return Err(Error::InvalidInput(
                "sample lengths differ from the t grid".into(),
            ));
        }
        if a.iter().chain(b.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mode samples must be finite".into()));
        }
        Ok(Self {
            n,
            family,
            kind,
            t,
            a,
            b,
        })
    }

    fn magnitude(&self, i: usize) -> f64 {
        self.a[i].abs() + self.b.as_ref().map_or(0.0, |b| b[i].abs())
    }
}

/// Integrates a mode system from the state `init` = (a, ȧ, b, ḃ) at `t0`
/// and samples it on `t_grid`.
pub fn integrate_mode_system(
    n: usize,
    family: ModeFamily,
    kind: SystemKind,
    t0: f64,
    init: [f64; 4],
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<ModeSolution> {
    let sys = ModeSystem::new(n, family, kind)?;
    let ys = ode::integrate(|t, y| sys.rhs(t, y), t0, init, t_grid, opts)?;
    for (t, y) in t_grid.iter().zip(&ys) {
        if y[0].abs() + y[2].abs() > opts.blowup {
            return Err(Error::BlowUp { t: *t });
        }
    }
    let a = ys.iter().map(|y| y[0]).collect();
    let b = sys.is_coupled().then(|| ys.iter().map(|y| y[2]).collect());
    Ok(ModeSolution {
        n,
        family,
        kind,
        t: t_grid.to_vec(),
        a,
        b,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    /// Slope of ln(|a| + |b|) against t.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of ln(|a| + |b|) over the outer third of the grid on
/// the requested side (at least 50 samples).
pub fn decay_rate(sol: &ModeSolution, end: End) -> Result<DecayFit> {
    let len = sol.t.len();
    let window = len / 3;
    if window < tolerances::DECAY_FIT_MIN_POINTS {
        return Err(Error::InvalidInput(format!(
            "fit window has {window} samples, need at least {}",
            tolerances::DECAY_FIT_MIN_POINTS
        )));
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&i, &j| sol.t[i].total_cmp(&sol.t[j]));
    let chosen: Vec<usize> = match end {
        End::Minus => order[..window].to_vec(),
        End::Plus => order[len - window..].to_vec(),
    };
    let pts: Vec<(f64, f64)> = chosen
        .iter()
        .filter(|&&i| sol.magnitude(i) > 0.0)
        .map(|&i| (sol.t[i], sol.magnitude(i).ln()))
        .collect();
    if pts.len() < tolerances::DECAY_FIT_MIN_POINTS {
        return Err(Error::InvalidInput(
            "solution vanishes on the fit window".into(),
        ));
    }
    let m = pts.len() as f64;
    let tx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ty = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tx) * (p.1 - ty)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ty).powi(2)).sum();
    let rate = sxy / sxx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(DecayFit {
        rate,
        r_squared,
        points: pts.len(),
    })
}

/// Decaying solution of the t → −∞ limit system for k = 1, written in the
/// outward variable τ ≥ 0:
///   (a, b)(τ) = A (n−1, −1) e^{−(n+2)τ/2} + B (1, 1) e^{(2−n)τ/2}.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExteriorMode {
    pub n: usize,
    pub coeff_fast: f64,
    pub coeff_slow: f64,
    pub rate_fast: f64,
    pub rate_slow: f64,
    pub dir_fast: [f64; 2],
    pub dir_slow: [f64; 2],
}

impl ExteriorMode {
    /// (a, ȧ, b, ḃ) at τ.
    pub fn state(&self, tau: f64) -> [f64; 4] {
        let ef = self.coeff_fast * (self.rate_fast * tau).exp();
        let es = self.coeff_slow * (self.rate_slow * tau).exp();
        [
            self.dir_fast[0] * ef + self.dir_slow[0] * es,
            self.rate_fast * self.dir_fast[0] * ef + self.rate_slow * self.dir_slow[0] * es,
            self.dir_fast[1] * ef + self.dir_slow[1] * es,
            self.rate_fast * self.dir_fast[1] * ef + self.rate_slow * self.dir_slow[1] * es,
        ]
    }

    /// Defect of the boundary relation
    /// (n−2)A = a₀ + b₀, evaluated at the solved coefficients.
    pub fn relation_defect(&self, a0: f64, b0: f64) -> f64 {
        ((self.n as f64 - 2.0) * self.coeff_fast - (a0 + b0)).abs()
    }
}

/// Boundary data (a₀, b₀) at τ = 0 fixes A and B through
/// a₀ = (n−1)A + B, b₀ = −A + B.
pub fn exterior_mode_solve(n: usize, a0: f64, b0: f64) -> Result<ExteriorMode> {
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "the exterior mode needs n >= 3 (got {n})"
        )));
    }
    let nf = n as f64;
    let dir_fast = [nf - 1.0, -1.0];
    let dir_slow = [1.0, 1.0];
    let m = nalgebra::Matrix2::new(dir_fast[0], dir_slow[0], dir_fast[1], dir_slow[1]);
    let sol = m
        .lu()
        .solve(&Vector2::new(a0, b0))
        .ok_or_else(|| Error::InvalidInput("singular boundary system".into()))?;
    Ok(ExteriorMode {
        n,
        coeff_fast: sol[0],
        coeff_slow: sol[1],
        rate_fast: -(nf + 2.0) / 2.0,
        rate_slow: (2.0 - nf) / 2.0,
        dir_fast,
        dir_slow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        let t = indicial_roots(3, 1).unwrap();
        assert_eq!(t.coexact.unwrap().plus, 1.5);
        assert_eq!(
            t.exact_mu,
            RootPair {
                plus: 2.5,
                minus: -2.5
            }
        );
        assert_eq!(t.exact_nu.unwrap().plus, 0.5);
        let t0 = indicial_roots(3, 0).unwrap();
        assert_eq!(t0.exact_mu.plus, 1.5);
        assert!(t0.exact_nu.is_none() && t0.coexact_roots().is_err());
        let t4 = indicial_roots(4, 1).unwrap();
        assert_eq!(
            (
                t4.coexact.unwrap().plus,
                t4.exact_mu.plus,
                t4.exact_nu.unwrap().plus
            ),
            (2.0, 3.0, 1.0)
        );
    }

    #[test]
    fn explicit_solution_at_zero() {
        let (a, b) = explicit_n3_solution(0.0).unwrap();
        assert!((a - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((b + 0.5).abs() < 1e-15);
    }

    #[test]
    fn exterior_flagship_numbers() {
        let e = exterior_mode_solve(3, 1.0, 0.0).unwrap();
        assert!((e.coeff_fast - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.coeff_slow - 1.0 / 3.0).abs() < 1e-15);
        let st = e.state(1.0);
        let a = 2.0 / 3.0 * (-2.5f64).exp() + 1.0 / 3.0 * (-0.5f64).exp();
        let b = -1.0 / 3.0 * (-2.5f64).exp() + 1.0 / 3.0 * (-0.5f64).exp();
        assert!((st[0] - a).abs() < 1e-15 && (st[2] - b).abs() < 1e-15);
        let z = exterior_mode_solve(3, 0.0, 0.0).unwrap();
        assert_eq!(z.state(2.0), [0.0; 4]);
        assert!(exterior_mode_solve(2, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_data_stays_zero() {
        let ts: Vec<f64> = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        let s = integrate_mode_system(
            3,
            ModeFamily::Exact(1),
            SystemKind::Interior,
            0.0,
            [0.0; 4],
            &ts,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!(s.a.iter().chain(s.b.as_ref().unwrap()).all(|&v| v == 0.0));
    }

    #[test]
    fn synthetic_decay() {
        let t: Vec<f64> = (0..300).map(|i| i as f64 * 0.05).collect();
        let a = t.iter().map(|t| (-2.5 * t).exp()).collect();
        let sol =
            ModeSolution::from_samples(3, ModeFamily::Radial, SystemKind::Asymptotic, t, a, None)
                .unwrap();
        let fit = decay_rate(&sol, End::Plus).unwrap();
        assert!((fit.rate + 2.5).abs() < 1e-6);
    }
}
