//! Normal fields V = i e^{i(1−n)s} f Θ + i e^{is} T on H_I, the closed-form
//! Jacobi fields, and a finite-difference evaluation of the linearized mean
//! curvature operator.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{chart_point, chart_raw, Axis, Grid};
use crate::neck::near_pole;
use crate::par;
use crate::tolerances;

/// (f, T) sampled on an (s, angles) grid. `tangent` stores n entries per node.
#[derive(Clone, Debug)]
pub struct NormalField {
    pub n: usize,
    pub grid: Grid,
    pub mask: Vec<bool>,
    pub f: Vec<f64>,
    pub tangent: Vec<f64>,
}

impl NormalField {
    /// Samples `eval(s, Θ) -> (f, T)`. Nodes within two steps of a chart pole
    /// are masked.
    pub fn sample<F>(n: usize, grid: Grid, eval: F) -> Result<Self>
    where
        F: Fn(f64, &[f64]) -> (f64, Vec<f64>) + Sync + Send,
    {
        ensure_dim(n)?;
        if grid.dim() != n {
            return Err(Error::InvalidInput(format!(
                "a neck grid in dimension {n} has {n} axes, got {}",
                grid.dim()
            )));
        }
        let s_axis = &grid.axes()[0];
        for i in [0, s_axis.len.saturating_sub(1)] {
            let s = s_axis.coord(i);
            if !(s > 0.0 && s < PI / n as f64) {
                return Err(Error::OutOfRange {
                    what: "s",
                    value: s,
                    range: format!("(0, π/{n})"),
                });
            }
        }
        let sphere: Vec<Axis> = grid.axes()[1..].to_vec();
        let vals = par::map_range(grid.len(), |lin| {
            let c = grid.coords(lin);
            if near_pole(&c[1..], &sphere) {
                return None;
            }
            let th = chart_point(&c[1..]);
            Some(eval(c[0], &th))
        });
        let mut f = vec![0.0; grid.len()];
        let mut tangent = vec![0.0; grid.len() * n];
        let mut mask = vec![false; grid.len()];
        for (lin, v) in vals.into_iter().enumerate() {
            if let Some((fv, tv)) = v {
                f[lin] = fv;
                tangent[lin * n..(lin + 1) * n].copy_from_slice(&tv);
                mask[lin] = true;
            }
        }
        Ok(Self {
            n,
            grid,
            mask,
            f,
            tangent,
        })
    }

    pub fn tangent_at(&self, lin: usize) -> &[f64] {
        &self.tangent[lin * self.n..(lin + 1) * self.n]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// max over valid nodes of max(|f|, |T|).
    pub fn sup_norm(&self) -> f64 {
        (0..self.f.len())
            .filter(|&i| self.mask[i])
            .map(|i| {
                let t: f64 = self.tangent_at(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                self.f[i].abs().max(t)
            })
            .fold(0.0, f64::max)
    }

    /// max |T·Θ| over valid nodes.
    pub fn tangency_defect(&self) -> f64 {
        (0..self.f.len())
            .filter(|&i| self.mask[i])
            .map(|i| {
                let th = chart_point(&self.grid.coords(i)[1..]);
                self.tangent_at(i)
                    .iter()
                    .zip(&th)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// The five closed-form families.
#[derive(Clone, Debug)]
pub enum JacobiKind {
    /// Φ_t(α, a): f = sin((n−1)s + α)(a·Θ), T = sin(α − s)(a − (a·Θ)Θ).
    Translation { angle: f64, a: Vec<f64> },
    /// Φ_d(δ): f = δ (sin ns)^{1−1/n}.
    Dilation(f64),
    /// Φ_SU(A), A symmetric.
    SpecialUnitary(DMatrix<f64>),
    /// Φ_O(2n)(A), A antisymmetric: T = (sin ns)^{−1/n} sin 2s AΘ.
    Rotation(DMatrix<f64>),
    /// Ψ_O(2n)(A), A antisymmetric: T = (sin ns)^{−1/n} cos 2s AΘ.
    Boost(DMatrix<f64>),
}

pub fn jacobi_field(kind: &JacobiKind, n: usize, grid: Grid) -> Result<NormalField> {
    ensure_dim(n)?;
    let nf = n as f64;
    let check_matrix = |a: &DMatrix<f64>, sign: f64| -> Result<()> {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::InvalidInput(format!("matrix must be {n}x{n}")));
        }
        let defect = (a - a.transpose() * sign).amax();
        if defect > tolerances::MATRIX_SYMMETRY {
            return Err(Error::Symmetry(defect));
        }
        Ok(())
    };
    let apply = |a: &DMatrix<f64>, th: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|r| (0..n).map(|c| a[(r, c)] * th[c]).sum())
            .collect()
    };
    match kind {
        JacobiKind::Translation { angle, a } => {
            if a.len() != n {
                return Err(Error::InvalidInput(format!(
                    "translation vector must have length {n}"
                )));
            }
            let (angle, a) = (*angle, a.clone());
            NormalField::sample(n, grid, move |s, th| {
                let at: f64 = a.iter().zip(th).map(|(x, y)| x * y).sum();
                let f = ((nf - 1.0) * s + angle).sin() * at;
                let c = (angle - s).sin();
                let t = a.iter().zip(th).map(|(x, y)| c * (x - at * y)).collect();
                (f, t)
            })
        }
        JacobiKind::Dilation(delta) => {
            let delta = *delta;
            NormalField::sample(n, grid, move |s, _| {
                (delta * (nf * s).sin().powf(1.0 - 1.0 / nf), vec![0.0; n])
            })
        }
        JacobiKind::SpecialUnitary(a) => {
            check_matrix(a, 1.0)?;
            let a = a.clone();
            NormalField::sample(n, grid, move |s, th| {
                let w = (nf * s).sin().powf(-1.0 / nf);
                let at = apply(&a, th);
                let q: f64 = at.iter().zip(th).map(|(x, y)| x * y).sum();
                let f = w * (nf * s).cos() * q;
                let t = at.iter().zip(th).map(|(x, y)| w * (x - q * y)).collect();
                (f, t)
            })
        }
        JacobiKind::Rotation(a) | JacobiKind::Boost(a) => {
            check_matrix(a, -1.0)?;
            let a = a.clone();
            let rot = matches!(kind, JacobiKind::Rotation(_));
            NormalField::sample(n, grid, move |s, th| {
                let w = (nf * s).sin().powf(-1.0 / nf);
                let c = if rot {
                    (2.0 * s).sin()
                } else {
                    (2.0 * s).cos()
                };
                let t = apply(&a, th).into_iter().map(|v| w * c * v).collect();
                (0.0, t)
            })
        }
    }
}

/// √g g^{jj} for the diagonal round metric: Π_i|∂_iΘ| / |∂_jΘ|².
fn metric_weight(derivs: &[Vec<f64>], j: usize) -> f64 {
    let norms: Vec<f64> = derivs
        .iter()
        .map(|d| d.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let sqrt_g: f64 = norms.iter().map(|q| q.sqrt()).product();
    sqrt_g / norms[j]
}

fn project(theta: &[f64], v: &mut [f64]) {
    let d: f64 = theta.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    for (vi, ti) in v.iter_mut().zip(theta) {
        *vi -= d * ti;
    }
}

/// Evaluates, with σ = sin ns,
///
///   f ↦ σ^{2−2/n}∂_s(σ^{2/n}∂_s f) + Δ_S f − (n−1) f + (n²−1)σ² f − 2 cos(ns) div_S T
///   T ↦ σ^{2−2/n}∂_s(σ^{2/n}∂_s T) + Δ^τ_S T − T + 3σ² T + 2 cos(ns) grad_S f
///
/// which is (sin ns)^{−2/n} times the linearized mean curvature operator
/// applied to V. Conservative second differences with half-node
/// coefficients; sphere operators through the ambient embedding, with the
/// rough Laplacian Δ^τ T = P[(1/√g)∂_j(√g g^{jj} P ∂_j T)].
/// Nodes whose ±1 stencil leaves the valid set come back masked.
pub fn linearized_apply(field: &NormalField) -> Result<NormalField> {
    let n = field.n;
    let nf = n as f64;
    let grid = &field.grid;
    if grid.axes().iter().any(|a| a.len < 3) {
        return Err(Error::GridTooCoarse(
            "every axis needs at least 3 nodes".into(),
        ));
    }
    let hs = grid.axes()[0].step;
    let steps = grid.spacings();
    let evaluable = |lin: usize| -> bool {
        if !field.mask[lin] {
            return false;
        }
        (0..n).all(|a| {
            [-1isize, 1]
                .iter()
                .all(|&o| grid.neighbor(lin, a, o).is_some_and(|j| field.mask[j]))
        })
    };
    let vals = par::map_range(grid.len(), |lin| {
        if !evaluable(lin) {
            return None;
        }
        let c = grid.coords(lin);
        let s = c[0];
        let angles = &c[1..];
        let sig = (nf * s).sin();
        let cos_ns = (nf * s).cos();
        let f0 = field.f[lin];
        let t0 = field.tangent_at(lin);

        let pre = sig.powf(2.0 - 2.0 / nf);
        let wp = (nf * (s + 0.5 * hs)).sin().powf(2.0 / nf);
        let wm = (nf * (s - 0.5 * hs)).sin().powf(2.0 / nf);
        let ip = grid.neighbor(lin, 0, 1).unwrap();
        let im = grid.neighbor(lin, 0, -1).unwrap();
        let h2 = hs * hs;
        let ds_f = pre * (wp * (field.f[ip] - f0) - wm * (f0 - field.f[im])) / h2;
        let (tp, tm) = (field.tangent_at(ip), field.tangent_at(im));
        let mut out_t: Vec<f64> = (0..n)
            .map(|r| pre * (wp * (tp[r] - t0[r]) - wm * (t0[r] - tm[r])) / h2)
            .collect();

        let (theta, derivs) = chart_raw(angles);
        let dn: Vec<f64> = derivs
            .iter()
            .map(|d| d.iter().map(|v| v * v).sum::<f64>())
            .collect();
        let sqrt_g: f64 = dn.iter().map(|q| q.sqrt()).product();
        let mut lap_f = 0.0;
        let mut div = 0.0;
        let mut grad = vec![0.0; n];
        let mut rough = vec![0.0; n];
        let mut half = angles.to_vec();
        for j in 0..n - 1 {
            let h = steps[j + 1];
            let jp = grid.neighbor(lin, j + 1, 1).unwrap();
            let jm = grid.neighbor(lin, j + 1, -1).unwrap();
            half[j] = angles[j] + 0.5 * h;
            let (th_p, d_p) = chart_raw(&half);
            half[j] = angles[j] - 0.5 * h;
            let (th_m, d_m) = chart_raw(&half);
            half[j] = angles[j];
            let (cp, cm) = (metric_weight(&d_p, j), metric_weight(&d_m, j));

            lap_f += (cp * (field.f[jp] - f0) - cm * (f0 - field.f[jm])) / (h * h);
            let df = (field.f[jp] - field.f[jm]) / (2.0 * h);
            let (tjp, tjm) = (field.tangent_at(jp), field.tangent_at(jm));
            let mut dt_dot = 0.0;
            for r in 0..n {
                grad[r] += df * derivs[j][r] / dn[j];
                dt_dot += (tjp[r] - tjm[r]) / (2.0 * h) * derivs[j][r];
            }
            div += dt_dot / dn[j];

            let mut vp: Vec<f64> = (0..n).map(|r| tjp[r] - t0[r]).collect();
            let mut vm: Vec<f64> = (0..n).map(|r| t0[r] - tjm[r]).collect();
            project(&th_p, &mut vp);
            project(&th_m, &mut vm);
            for r in 0..n {
                rough[r] += (cp * vp[r] - cm * vm[r]) / (h * h);
            }
        }
        lap_f /= sqrt_g;
        for v in rough.iter_mut() {
            *v /= sqrt_g;
        }
        project(&theta, &mut rough);

        let out_f =
            ds_f + lap_f - (nf - 1.0) * f0 + (nf * nf - 1.0) * sig * sig * f0 - 2.0 * cos_ns * div;
        for r in 0..n {
            out_t[r] += rough[r] - t0[r] + 3.0 * sig * sig * t0[r] + 2.0 * cos_ns * grad[r];
        }
        Some((out_f, out_t))
    });
    let mut f = vec![0.0; grid.len()];
    let mut tangent = vec![0.0; grid.len() * n];
    let mut mask = vec![false; grid.len()];
    let mut count = 0usize;
    for (lin, v) in vals.into_iter().enumerate() {
        if let Some((fv, tv)) = v {
            f[lin] = fv;
            tangent[lin * n..(lin + 1) * n].copy_from_slice(&tv);
            mask[lin] = true;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::GridTooCoarse(
            "no node has a complete stencil".into(),
        ));
    }
    Ok(NormalField {
        n,
        grid: grid.clone(),
        mask,
        f,
        tangent,
    })
}

/// Grid over s ∈ [lo, hi] (closed) times the given sphere axes.
pub fn neck_field_grid(s_lo: f64, s_hi: f64, s_nodes: usize, sphere: Vec<Axis>) -> Grid {
    let mut axes = vec![Axis::closed(s_lo, s_hi, s_nodes)];
    axes.extend(sphere);
    Grid::new(axes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neck::sphere_axes;

    fn grid3(m: usize) -> Grid {
        neck_field_grid(0.2, 0.8, m, sphere_axes(3, m, 2 * m))
    }

    #[test]
    fn dilation_and_su_identity_examples() {
        let g = grid3(12);
        let d = jacobi_field(&JacobiKind::Dilation(1.0), 3, g.clone()).unwrap();
        let lin = d.mask.iter().position(|&m| m).unwrap();
        let s = g.coords(lin)[0];
        assert!((d.f[lin] - (3.0 * s).sin().powf(2.0 / 3.0)).abs() < 1e-15);

        let su = jacobi_field(
            &JacobiKind::SpecialUnitary(DMatrix::identity(3, 3)),
            3,
            g.clone(),
        )
        .unwrap();
        let w = (3.0 * s).sin().powf(-1.0 / 3.0) * (3.0 * s).cos();
        assert!((su.f[lin] - w).abs() < 1e-14);
        assert!(su.tangent_at(lin).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_translation_is_zero_and_symmetry_is_checked() {
        let g = grid3(10);
        let z = jacobi_field(
            &JacobiKind::Translation {
                angle: 0.3,
                a: vec![0.0; 3],
            },
            3,
            g.clone(),
        )
        .unwrap();
        assert_eq!(z.sup_norm(), 0.0);
        let lz = linearized_apply(&z).unwrap();
        assert_eq!(lz.sup_norm(), 0.0);
        let asym = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            jacobi_field(&JacobiKind::SpecialUnitary(asym.clone()), 3, g.clone()),
            Err(Error::Symmetry(_))
        ));
        assert!(jacobi_field(&JacobiKind::Rotation(asym), 3, g).is_ok());
    }

    #[test]
    fn fields_are_tangent() {
        let g = grid3(10);
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 2.0, -1.0, 0.3, 0.5, 0.3, 0.2]);
        let f = jacobi_field(&JacobiKind::SpecialUnitary(a), 3, g.clone()).unwrap();
        assert!(f.tangency_defect() < 1e-12);
        let t = jacobi_field(
            &JacobiKind::Translation {
                angle: 1.0,
                a: vec![0.3, -0.4, 1.2],
            },
            3,
            g,
        )
        .unwrap();
        assert!(t.tangency_defect() < 1e-12);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = neck_field_grid(0.2, 0.8, 2, sphere_axes(3, 8, 8));
        let d = jacobi_field(&JacobiKind::Dilation(1.0), 3, g).unwrap();
        assert!(matches!(linearized_apply(&d), Err(Error::GridTooCoarse(_))));
    }
}
