//! The interaction matrix Γ, the vector Λ, and hypotheses H1–H3.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::Configuration;
use crate::error::{ensure_dim, Error, Result};
use crate::quadrature::{omega_n, Estimate, QuadratureRule};
use crate::tolerances;

/// ξ_{jj'} = (x_j − x_{j'}) / |x_j − x_{j'}|.
pub fn xi(config: &Configuration, j: usize, jp: usize) -> DVector<f64> {
    let d = &config.points[j] - &config.points[jp];
    let r = d.norm();
    d / r
}

#[derive(Clone, Debug, Serialize)]
pub struct PairVerdict {
    pub j: usize,
    pub jp: usize,
    pub holds: bool,
    /// Distance from ξ_{jj'} to Im(I − R_{j'}⁻¹R_j).
    pub residual: f64,
    pub threshold: f64,
}

/// H1 for every pair j < j'.
pub fn check_h1(config: &Configuration) -> Vec<PairVerdict> {
    let n = config.n;
    let mut out = Vec::new();
    for j in 0..config.k() {
        for jp in j + 1..config.k() {
            let m = DMatrix::<f64>::identity(n, n)
                - config.rotations[jp].transpose() * &config.rotations[j];
            let x = xi(config, j, jp);
            let residual = image_residual(&m, &x);
            out.push(PairVerdict {
                j,
                jp,
                holds: residual > tolerances::H1_RESIDUAL,
                residual,
                threshold: tolerances::H1_RESIDUAL,
            });
        }
    }
    out
}

/// |v − U_r U_rᵀ v| with U_r the left singular vectors above the rank cut.
fn image_residual(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let svd = m.clone().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    let mut proj = DVector::zeros(v.len());
    if smax > 0.0 {
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > tolerances::H1_RANK_CUT * smax {
                let col = u.column(i);
                proj += col * col.dot(v);
            }
        }
    }
    (v - proj).norm()
}

/// γ_{jj'} = (ω_n / (n dⁿ)) (tr(R_{j'}ᵀR_j) − n (R_jξ)·(R_{j'}ξ)).
pub fn gamma_entry(config: &Configuration, j: usize, jp: usize) -> Result<f64> {
    if j == jp {
        return Err(Error::InvalidInput(
            "gamma_entry needs j != j'; diagonal entries are zero".into(),
        ));
    }
    let n = config.n;
    let (rj, rjp) = (&config.rotations[j], &config.rotations[jp]);
    let d = (&config.points[j] - &config.points[jp]).norm();
    let x = xi(config, j, jp);
    let tr = (rjp.transpose() * rj).trace();
    let dot = (rj * &x).dot(&(rjp * &x));
    Ok(omega_n(n)? / (n as f64 * d.powi(n as i32)) * (tr - n as f64 * dot))
}

pub fn gamma_matrix(config: &Configuration) -> Result<DMatrix<f64>> {
    let k = config.k();
    let mut g = DMatrix::zeros(k, k);
    for j in 0..k {
        for jp in 0..k {
            if j != jp {
                g[(j, jp)] = gamma_entry(config, j, jp)?;
            }
        }
    }
    Ok(g)
}

/// The defining sphere integral of γ_{jj'}, evaluated by `rule`.
pub fn gamma_by_quadrature(
    config: &Configuration,
    j: usize,
    jp: usize,
    rule: &QuadratureRule,
) -> Estimate {
    let n = config.n;
    let (rj, rjp) = (&config.rotations[j], &config.rotations[jp]);
    let d = (&config.points[j] - &config.points[jp]).norm();
    let x = xi(config, j, jp);
    let (a, b) = (rj * &x, rjp * &x);
    let e = rule.estimate(|t| {
        let t = DVector::from_column_slice(t);
        (rj * &t).dot(&(rjp * &t)) - n as f64 * t.dot(&a) * t.dot(&b)
    });
    let s = d.powi(n as i32);
    Estimate {
        value: e.value / s,
        std_error: e.std_error / s,
    }
}

/// λ_j = −(ω_n/n) tr(A₀ᵀR_j).
pub fn lambda_vector(config: &Configuration) -> Result<DVector<f64>> {
    let w = omega_n(config.n)? / config.n as f64;
    Ok(DVector::from_iterator(
        config.k(),
        config
            .rotations
            .iter()
            .map(|r| -w * (config.a0.transpose() * r).trace()),
    ))
}

/// λ_j = −∫ A₀Θ·R_jΘ by quadrature.
pub fn lambda_by_quadrature(config: &Configuration, rule: &QuadratureRule) -> Vec<Estimate> {
    config
        .rotations
        .iter()
        .map(|r| {
            let e = rule.estimate(|t| {
                let t = DVector::from_column_slice(t);
                -(&config.a0 * &t).dot(&(r * &t))
            });
            e
        })
        .collect()
}

/// γ₁₂ for x₁ = −x₂ = e from the eigenstructure of R₂⁻¹R₁:
/// −(ω_n/2ⁿ)(2/n)(dim E₋ + Σ_i (1 − cos θ_i)).
pub fn symmetric_pair_gamma(
    r1: &DMatrix<f64>,
    r2: &DMatrix<f64>,
    e: &DVector<f64>,
    n: usize,
) -> Result<f64> {
    ensure_dim(n)?;
    for (i, r) in [r1, r2].into_iter().enumerate() {
        if r.nrows() != n || r.ncols() != n || e.len() != n {
            return Err(Error::InvalidInput(
                "matrix or axis has the wrong size".into(),
            ));
        }
        let defect = (r * e - e).amax();
        if defect > tolerances::ORTHOGONALITY {
            return Err(Error::InvalidInput(format!(
                "R{} does not fix the axis (defect {defect:e})",
                i + 1
            )));
        }
    }
    let q = r2.transpose() * r1;
    let eig = q.complex_eigenvalues();
    let mut dim_minus = 0usize;
    let mut angle_sum = 0.0;
    for z in eig.iter() {
        if z.im > 1e-9 {
            angle_sum += 1.0 - z.im.atan2(z.re).cos();
        } else if z.im.abs() <= 1e-9 && z.re < 0.0 {
            dim_minus += 1;
        }
    }
    let nf = n as f64;
    Ok(-(omega_n(n)? / 2f64.powi(n as i32)) * (2.0 / nf) * (dim_minus as f64 + angle_sum))
}

#[derive(Clone, Debug, Serialize)]
pub struct NeckScales {
    pub alpha: Option<Vec<f64>>,
    pub h2: bool,
    pub h3: bool,
    pub rcond: f64,
    /// |Γα − Λ| / |Λ| (absolute when Λ = 0).
    pub residual: Option<f64>,
}

pub fn neck_scales(gamma: &DMatrix<f64>, lambda: &DVector<f64>) -> Result<NeckScales> {
    if !gamma.is_square() || gamma.nrows() != lambda.len() {
        return Err(Error::InvalidInput(format!(
            "Γ is {}x{} but Λ has length {}",
            gamma.nrows(),
            gamma.ncols(),
            lambda.len()
        )));
    }
    let sv = gamma.clone().singular_values();
    let smax = sv.max();
    let rcond = if smax > 0.0 { sv.min() / smax } else { 0.0 };
    let h2 = rcond > tolerances::H2_RCOND;
    if !h2 {
        return Ok(NeckScales {
            alpha: None,
            h2,
            h3: false,
            rcond,
            residual: None,
        });
    }
    let alpha = gamma
        .clone()
        .lu()
        .solve(lambda)
        .ok_or(Error::SingularGamma(rcond))?;
    let res = (gamma * &alpha - lambda).norm();
    let scale = lambda.norm();
    let residual = if scale > 0.0 { res / scale } else { res };
    let h3 = alpha.iter().all(|&a| a > 0.0);
    Ok(NeckScales {
        alpha: Some(alpha.iter().copied().collect()),
        h2,
        h3,
        rcond,
        residual: Some(residual),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InteractionSystem {
    pub gamma: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub alpha: Option<Vec<f64>>,
    pub rcond: f64,
    pub solve_residual: Option<f64>,
    pub h1: Vec<PairVerdict>,
    pub h1_holds: bool,
    pub h2: bool,
    pub h3: bool,
}

impl InteractionSystem {
    pub fn compute(config: &Configuration) -> Result<Self> {
        let gamma = gamma_matrix(config)?;
        let lambda = lambda_vector(config)?;
        let scales = neck_scales(&gamma, &lambda)?;
        let h1 = check_h1(config);
        Ok(Self {
            gamma: (0..gamma.nrows())
                .map(|r| gamma.row(r).iter().copied().collect())
                .collect(),
            lambda: lambda.iter().copied().collect(),
            alpha: scales.alpha,
            rcond: scales.rcond,
            solve_residual: scales.residual,
            h1_holds: h1.iter().all(|v| v.holds),
            h1,
            h2: scales.h2,
            h3: scales.h3,
        })
    }

    pub fn all_hold(&self) -> bool {
        self.h1_holds && self.h2 && self.h3
    }

    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        let k = self.lambda.len();
        DMatrix::from_fn(k, k, |r, c| self.gamma[r][c])
    }

    pub fn alpha_vector(&self) -> Option<DVector<f64>> {
        self.alpha.as_ref().map(|a| DVector::from_column_slice(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rot_e1(angle: f64) -> DMatrix<f64> {
        let (s, c) = angle.sin_cos();
        DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
    }

    #[test]
    fn flagship_gamma_lambda_alpha() {
        let cfg = Configuration::flagship();
        let g = gamma_matrix(&cfg).unwrap();
        assert!((g[(0, 1)] + PI / 3.0).abs() < 1e-14);
        assert_eq!(g[(0, 1)], g[(1, 0)]);
        let l = lambda_vector(&cfg).unwrap();
        assert!((l[0] + 4.0 * PI).abs() < 1e-13 && (l[1] + 4.0 * PI / 3.0).abs() < 1e-13);
        let s = neck_scales(&g, &l).unwrap();
        let a = s.alpha.unwrap();
        assert!((a[0] - 4.0).abs() < 1e-12 && (a[1] - 12.0).abs() < 1e-12);
        assert!(s.h2 && s.h3);
    }

    #[test]
    fn symmetric_pair_examples() {
        let e = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let i = DMatrix::identity(3, 3);
        assert_eq!(symmetric_pair_gamma(&i, &i, &e, 3).unwrap(), 0.0);
        let g = symmetric_pair_gamma(&i, &rot_e1(PI / 2.0), &e, 3).unwrap();
        assert!((g + PI / 3.0).abs() < 1e-12);
        let g = symmetric_pair_gamma(&i, &rot_e1(PI), &e, 3).unwrap();
        assert!((g + 2.0 * PI / 3.0).abs() < 1e-12);
        let bad = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(symmetric_pair_gamma(&bad, &i, &e, 3).is_err());
    }

    #[test]
    fn h1_examples() {
        let cfg = Configuration::flagship();
        let v = check_h1(&cfg);
        assert!(v[0].holds && (v[0].residual - 1.0).abs() < 1e-12);

        let mut same = cfg.clone();
        same.rotations[1] = DMatrix::identity(3, 3);
        let v = check_h1(&same);
        assert!(v[0].holds && (v[0].residual - 1.0).abs() < 1e-14);

        // −I leaves nothing fixed, so I − R₂⁻¹R₁ = 2I is invertible
        let mut flip = cfg.clone();
        flip.rotations[1] = -DMatrix::<f64>::identity(3, 3);
        let v = check_h1(&flip);
        assert!(!v[0].holds && v[0].residual < 1e-15);
    }

    #[test]
    fn degenerate_gamma() {
        let mut cfg = Configuration::flagship();
        cfg.rotations[1] = DMatrix::identity(3, 3);
        let g = gamma_matrix(&cfg).unwrap();
        assert_eq!(g.amax(), 0.0);
        let s = neck_scales(&g, &lambda_vector(&cfg).unwrap()).unwrap();
        assert!(!s.h2 && s.alpha.is_none());
        assert!(gamma_entry(&cfg, 0, 0).is_err());
    }
}
