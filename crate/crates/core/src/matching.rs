//! Leading-order solve of the boundary matching between the neck pieces and
//! the outer graph at the spheres |x − x_j| = ρ_*, for n = 3.
//!
//! Conventions. At end j the discrepancy is (neck − outer): the value gap D_j
//! and the conormal gap N_j = ρ_*·∂_r(neck − outer), both in the frame of
//! R_j. The outer graph is corrected by the exterior harmonic extension of
//! Φ_j and the neck by the interior extension of Φ̃_j, which closes the gaps
//! when
//!   Φ_j − Φ̃_j = D_j^⊥,   (𝒫_ext − 𝒫_int)Φ̃_j = N_j^⊥ − 𝒫_ext D_j^⊥.
//! Along Θ, with u_j = ε(δβ_j − δα_j)ρ_*^{1−n} and w_j = (ε/ω_n)ρ_*(Γδα)_j,
//!   d_j + u_j − w_j = 0,   n_j + (1 − n)u_j − w_j = 0.

use nalgebra::DVector;
use serde::Serialize;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::harmonics::{dtn_solve, p_ext, p_int, split_theta, ShExpansion};
use crate::interaction::gamma_matrix;
use crate::quadrature::omega_n;
use crate::tolerances;

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryDiscrepancy {
    pub value: ShExpansion,
    pub conormal: ShExpansion,
}

#[derive(Clone, Debug, Serialize)]
pub struct EndCorrection {
    /// Outer-side boundary data.
    pub phi: ShExpansion,
    /// Neck-side boundary data.
    pub phi_tilde: ShExpansion,
    /// u_j and w_j of the collinear system.
    pub u: f64,
    pub w: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchCorrection {
    pub ends: Vec<EndCorrection>,
    pub delta_alpha: Vec<f64>,
    pub delta_beta: Vec<f64>,
    /// α_* + δα.
    pub alpha: Vec<f64>,
    /// Max coefficient of (input discrepancy − discrepancy produced by the
    /// correction).
    pub residual_norm: f64,
}

fn check_n3(config: &Configuration) -> Result<()> {
    if config.n != 3 {
        return Err(Error::InvalidInput(format!(
            "boundary matching is implemented for n = 3 (got n = {})",
            config.n
        )));
    }
    Ok(())
}

/// Discrepancies that the given unknowns cancel exactly (the forward map of
/// the linear skeleton).
pub fn forward_discrepancy(
    config: &Configuration,
    phi: &[ShExpansion],
    phi_tilde: &[ShExpansion],
    delta_alpha: &[f64],
    delta_beta: &[f64],
) -> Result<Vec<BoundaryDiscrepancy>> {
    check_n3(config)?;
    let k = config.k();
    if [
        phi.len(),
        phi_tilde.len(),
        delta_alpha.len(),
        delta_beta.len(),
    ]
    .iter()
    .any(|&l| l != k)
    {
        return Err(Error::InvalidInput(format!("expected data for {k} ends")));
    }
    let nf = config.n as f64;
    let eps = config.epsilon;
    let rho = config.rho_star;
    let omega = omega_n(config.n)?;
    let gamma = gamma_matrix(config)?;
    let gda = &gamma * DVector::from_column_slice(delta_alpha);
    (0..k)
        .map(|j| {
            let u = eps * (delta_beta[j] - delta_alpha[j]) * rho.powf(1.0 - nf);
            let w = eps / omega * rho * gda[j];
            let deg = phi[j].degree;
            let value = phi[j]
                .sub(&phi_tilde[j])?
                .add(&ShExpansion::theta(deg, w - u)?)?;
            let conormal = p_ext(&phi[j])
                .sub(&p_int(&phi_tilde[j]))?
                .add(&ShExpansion::theta(deg, w - (1.0 - nf) * u)?)?;
            Ok(BoundaryDiscrepancy { value, conormal })
        })
        .collect()
}

/// Solves the linear skeleton of the matching equations for the given
/// discrepancies (one per end).
pub fn match_boundaries(
    config: &Configuration,
    alpha_star: &[f64],
    discrepancies: &[BoundaryDiscrepancy],
) -> Result<MatchCorrection> {
    check_n3(config)?;
    let k = config.k();
    if discrepancies.len() != k || alpha_star.len() != k {
        return Err(Error::InvalidInput(format!(
            "expected {k} ends, got {} discrepancies and {} scales",
            discrepancies.len(),
            alpha_star.len()
        )));
    }
    let degree = discrepancies[0].value.degree;
    if discrepancies
        .iter()
        .any(|d| d.value.degree != degree || d.conormal.degree != degree)
    {
        return Err(Error::InvalidInput(
            "discrepancies must share one degree".into(),
        ));
    }
    if degree > tolerances::SH_DEGREE_MAX {
        return Err(Error::OutOfRange {
            what: "harmonic degree",
            value: degree as f64,
            range: format!("[1, {}]", tolerances::SH_DEGREE_MAX),
        });
    }
    let nf = config.n as f64;
    let eps = config.epsilon;
    let rho = config.rho_star;
    let omega = omega_n(config.n)?;

    let mut ends = Vec::with_capacity(k);
    let mut w_vec = DVector::zeros(k);
    for (j, d) in discrepancies.iter().enumerate() {
        let (dc, d_orth) = split_theta(&d.value)?;
        let (nc, n_orth) = split_theta(&d.conormal)?;
        let phi_tilde = dtn_solve(&n_orth.sub(&p_ext(&d_orth))?);
        let phi = phi_tilde.add(&d_orth)?;
        let u = (nc - dc) / nf;
        let w = ((nf - 1.0) * dc + nc) / nf;
        w_vec[j] = w;
        ends.push(EndCorrection {
            phi,
            phi_tilde,
            u,
            w,
        });
    }

    let gamma = gamma_matrix(config)?;
    let rhs = w_vec * (omega / (eps * rho));
    let lu = gamma.clone().lu();
    let delta_alpha = lu.solve(&rhs).ok_or_else(|| {
        let svd = gamma.svd(false, false);
        Error::SingularGamma(
            svd.singular_values.min() / svd.singular_values.max().max(f64::MIN_POSITIVE),
        )
    })?;
    let delta_beta: Vec<f64> = (0..k)
        .map(|j| delta_alpha[j] + ends[j].u * rho.powf(nf - 1.0) / eps)
        .collect();
    let delta_alpha: Vec<f64> = delta_alpha.iter().copied().collect();

    let phis: Vec<ShExpansion> = ends.iter().map(|e| e.phi.clone()).collect();
    let tildes: Vec<ShExpansion> = ends.iter().map(|e| e.phi_tilde.clone()).collect();
    let produced = forward_discrepancy(config, &phis, &tildes, &delta_alpha, &delta_beta)?;
    let residual_norm = produced
        .iter()
        .zip(discrepancies)
        .map(|(p, d)| {
            let a = p
                .value
                .sub(&d.value)
                .map(|e| e.max_abs())
                .unwrap_or(f64::INFINITY);
            let b = p
                .conormal
                .sub(&d.conormal)
                .map(|e| e.max_abs())
                .unwrap_or(f64::INFINITY);
            a.max(b)
        })
        .fold(0.0, f64::max);

    Ok(MatchCorrection {
        ends,
        alpha: alpha_star
            .iter()
            .zip(&delta_alpha)
            .map(|(a, d)| a + d)
            .collect(),
        delta_alpha,
        delta_beta,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_disc(l: usize) -> BoundaryDiscrepancy {
        BoundaryDiscrepancy {
            value: ShExpansion::zeros(l),
            conormal: ShExpansion::zeros(l),
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let c = Configuration::flagship();
        let m = match_boundaries(&c, &[4.0, 12.0], &[zero_disc(4), zero_disc(4)]).unwrap();
        assert!(m.delta_alpha.iter().chain(&m.delta_beta).all(|v| *v == 0.0));
        assert!(m
            .ends
            .iter()
            .all(|e| e.phi.max_abs() == 0.0 && e.phi_tilde.max_abs() == 0.0));
        assert_eq!(m.alpha, vec![4.0, 12.0]);
    }

    #[test]
    fn collinear_only_single_end() {
        let c = Configuration::flagship();
        let d = BoundaryDiscrepancy {
            value: ShExpansion::theta(4, 1e-3).unwrap(),
            conormal: ShExpansion::zeros(4),
        };
        let m = match_boundaries(&c, &[4.0, 12.0], &[d, zero_disc(4)]).unwrap();
        assert!(m
            .ends
            .iter()
            .all(|e| e.phi.max_abs() < 1e-16 && e.phi_tilde.max_abs() < 1e-16));
        let e0 = &m.ends[0];
        // u = (n_c − d_c)/n, w = ((n−1)d_c + n_c)/n
        assert!((e0.u + 1e-3 / 3.0).abs() < 1e-18);
        assert!((e0.w - 2e-3 / 3.0).abs() < 1e-18);
        assert!(m.residual_norm < 1e-15);
    }
}
