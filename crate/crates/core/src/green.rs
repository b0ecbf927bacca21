//! The outer piece: the vector Green's function G, its jets, the expansion of
//! G near each marked point and the graph x ↦ x + iεG(x).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::geometry::{Grid, ImmersionPatch, PointJet};
use crate::interaction::InteractionSystem;
use crate::quadrature::{omega_n, QuadratureRule};
use crate::tolerances;

#[derive(Clone, Debug)]
pub struct GreenData {
    pub config: Configuration,
    pub alpha: DVector<f64>,
}

impl GreenData {
    pub fn new(config: Configuration, alpha: DVector<f64>) -> Result<Self> {
        if alpha.len() != config.k() {
            return Err(Error::InvalidInput(format!(
                "alpha has {} entries for {} points",
                alpha.len(),
                config.k()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("alpha must be finite".into()));
        }
        Ok(Self { config, alpha })
    }

    /// α = Γ⁻¹Λ for the configuration.
    pub fn balanced(config: Configuration) -> Result<Self> {
        let sys = InteractionSystem::compute(&config)?;
        let alpha = sys.alpha_vector().ok_or(Error::SingularGamma(sys.rcond))?;
        Self::new(config, alpha)
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "point of dimension {} in R^{}",
                x.len(),
                self.n()
            )));
        }
        for (j, p) in self.config.points.iter().enumerate() {
            let d = x
                .iter()
                .zip(p.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if d <= tolerances::SINGULAR_DISTANCE {
                return Err(Error::InvalidInput(format!(
                    "G is singular at marked point {j} (distance {d:e})"
                )));
            }
        }
        Ok(())
    }
}

/// d / |d|^n.
fn kernel(d: &[f64], n: usize) -> Vec<f64> {
    let r2: f64 = d.iter().map(|v| v * v).sum();
    let rn = r2.powf(0.5 * n as f64);
    d.iter().map(|v| v / rn).collect()
}

/// Adds coeff · R · (x − p)/|x − p|^n to `out`.
fn add_term(out: &mut [f64], coeff: f64, r: &DMatrix<f64>, x: &[f64], p: &DVector<f64>, n: usize) {
    let d: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a - b).collect();
    let k = kernel(&d, n);
    for c in 0..n {
        out[c] += coeff * (0..n).map(|m| r[(c, m)] * k[m]).sum::<f64>();
    }
}

/// G(x) = Σ α_j R_j (x − x_j)/|x − x_j|^n + A₀x.
pub fn green_eval(data: &GreenData, x: &[f64]) -> Result<Vec<f64>> {
    data.check_point(x)?;
    let n = data.n();
    let mut out: Vec<f64> = (0..n)
        .map(|c| (0..n).map(|m| data.config.a0[(c, m)] * x[m]).sum())
        .collect();
    for j in 0..data.config.k() {
        add_term(
            &mut out,
            data.alpha[j],
            &data.config.rotations[j],
            x,
            &data.config.points[j],
            n,
        );
    }
    Ok(out)
}

/// G minus the singular term of point j0. Smooth (and harmonic) near x_{j0}.
pub fn regular_part(data: &GreenData, j0: usize, x: &[f64]) -> Result<Vec<f64>> {
    if j0 >= data.config.k() {
        return Err(Error::InvalidInput(format!("no point {j0}")));
    }
    let n = data.n();
    if x.len() != n {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let mut out: Vec<f64> = (0..n)
        .map(|c| (0..n).map(|m| data.config.a0[(c, m)] * x[m]).sum())
        .collect();
    for j in (0..data.config.k()).filter(|&j| j != j0) {
        add_term(
            &mut out,
            data.alpha[j],
            &data.config.rotations[j],
            x,
            &data.config.points[j],
            n,
        );
    }
    Ok(out)
}

/// c_{j0}: the regular part evaluated at x_{j0}.
pub fn translation_constant(data: &GreenData, j0: usize) -> Result<Vec<f64>> {
    let p: Vec<f64> = data.config.points[j0].iter().copied().collect();
    regular_part(data, j0, &p)
}

/// Value, first derivatives `first[i][c] = ∂_i G_c` and second derivatives
/// `second[sym(i,k)][c] = ∂_i∂_k G_c` (i ≤ k, row order).
pub struct GreenJet {
    pub value: Vec<f64>,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

pub fn green_jet(data: &GreenData, x: &[f64]) -> Result<GreenJet> {
    let value = green_eval(data, x)?;
    let n = data.n();
    let nf = n as f64;
    let mut first = vec![vec![0.0; n]; n];
    let mut second = vec![vec![0.0; n]; n * (n + 1) / 2];
    for (i, row) in first.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = data.config.a0[(c, i)];
        }
    }
    for j in 0..data.config.k() {
        let r = &data.config.rotations[j];
        let a = data.alpha[j];
        let d: Vec<f64> = x
            .iter()
            .zip(data.config.points[j].iter())
            .map(|(u, v)| u - v)
            .collect();
        let r2: f64 = d.iter().map(|v| v * v).sum();
        let rn = r2.powf(0.5 * nf);
        let rn2 = rn * r2;
        let rn4 = rn2 * r2;
        let delta = |u: usize, v: usize| if u == v { 1.0 } else { 0.0 };
        let mut dk = vec![vec![0.0; n]; n];
        for i in 0..n {
            for m in 0..n {
                dk[i][m] = delta(i, m) / rn - nf * d[m] * d[i] / rn2;
            }
        }
        for i in 0..n {
            for c in 0..n {
                first[i][c] += a * (0..n).map(|m| r[(c, m)] * dk[i][m]).sum::<f64>();
            }
        }
        let mut idx = 0;
        for i in 0..n {
            for k in i..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        let ddk = -nf
                            * (delta(i, m) * d[k] + delta(k, m) * d[i] + delta(i, k) * d[m])
                            / rn2
                            + nf * (nf + 2.0) * d[m] * d[i] * d[k] / rn4;
                        s += r[(c, m)] * ddk;
                    }
                    second[idx][c] += a * s;
                }
                idx += 1;
            }
        }
    }
    Ok(GreenJet {
        value,
        first,
        second,
    })
}

/// Componentwise second-order central-difference Laplacian of G at x.
pub fn fd_laplacian(data: &GreenData, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = data.n();
    let g0 = green_eval(data, x)?;
    let mut lap = vec![0.0; n];
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let gp = green_eval(data, &xp)?;
        let gm = green_eval(data, &xm)?;
        for c in 0..n {
            lap[c] += (gp[c] - 2.0 * g0[c] + gm[c]) / (h * h);
        }
    }
    Ok(lap)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpansionProbe {
    /// Coefficient of ρ^{1−n} R_{j0}Θ.
    pub singular_coeff: f64,
    /// Coefficient of ρ R_{j0}Θ.
    pub linear_coeff: f64,
    /// Constant vector of the expansion (spherical mean of the regular part).
    pub constant_vec: Vec<f64>,
    pub fit_condition: f64,
}

/// Least squares with unit-norm columns; returns (coefficients, condition).
fn scaled_lstsq(design: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let mut a = design.clone();
    let mut scale = vec![1.0; a.ncols()];
    for (c, s) in scale.iter_mut().enumerate() {
        let nrm = a.column(c).norm();
        if nrm > 0.0 {
            *s = nrm;
            a.column_mut(c).scale_mut(1.0 / nrm);
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if cond > tolerances::FIT_CONDITION {
        return Err(Error::IllConditioned(cond));
    }
    let x = svd
        .solve(rhs, 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((
        DVector::from_iterator(x.len(), x.iter().zip(&scale).map(|(v, s)| v / s)),
        cond,
    ))
}

fn probe_rule(n: usize) -> Result<QuadratureRule> {
    QuadratureRule::product_gauss(n, 16)
}

/// Fits the expansion G(x_{j0} + ρΘ) = (a ρ^{1−n} + b ρ) R_{j0}Θ + c + … .
///
/// The ρ^{1−n} coefficient is fitted from ρ^{n−1}·(projection of G) on
/// {1, ρ^n}; the linear coefficient from the projection of the regular
/// part on {1, ρ, ρ², ρ³}; c from the spherical mean of the regular part on
/// {1, ρ²}.
pub fn expansion_probe(data: &GreenData, j0: usize, radii: &[f64]) -> Result<ExpansionProbe> {
    let cfg = &data.config;
    if j0 >= cfg.k() {
        return Err(Error::InvalidInput(format!("no point {j0}")));
    }
    if radii.len() < 4 {
        return Err(Error::InvalidInput(
            "expansion fit needs at least four radii".into(),
        ));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&r| r <= 0.0) {
        return Err(Error::InvalidInput(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    let n = data.n();
    let nf = n as f64;
    let half_gap = (0..cfg.k())
        .filter(|&j| j != j0)
        .map(|j| (&cfg.points[j] - &cfg.points[j0]).norm() / 2.0)
        .fold(f64::INFINITY, f64::min);
    if radii[0] >= half_gap {
        return Err(Error::OutOfRange {
            what: "probe radius",
            value: radii[0],
            range: format!("(0, {half_gap})"),
        });
    }
    let omega = omega_n(n)?;
    let rule = probe_rule(n)?;
    let r0 = &cfg.rotations[j0];
    let p0 = &cfg.points[j0];

    let mut full = Vec::with_capacity(radii.len());
    let mut reg = Vec::with_capacity(radii.len());
    let mut mean = Vec::with_capacity(radii.len());
    for &rho in radii {
        let mut pf = 0.0;
        let mut pr = 0.0;
        let mut m = vec![0.0; n];
        for q in 0..rule.len() {
            let th = rule.node(q);
            let w = rule.weight(q);
            let x: Vec<f64> = (0..n).map(|c| p0[c] + rho * th[c]).collect();
            let rth: Vec<f64> = (0..n)
                .map(|c| (0..n).map(|k| r0[(c, k)] * th[k]).sum())
                .collect();
            let g = green_eval(data, &x)?;
            let gr = regular_part(data, j0, &x)?;
            pf += w * g.iter().zip(&rth).map(|(a, b)| a * b).sum::<f64>();
            pr += w * gr.iter().zip(&rth).map(|(a, b)| a * b).sum::<f64>();
            for c in 0..n {
                m[c] += w * gr[c];
            }
        }
        full.push(pf / omega);
        reg.push(pr / omega);
        mean.push(m.into_iter().map(|v| v / omega).collect::<Vec<_>>());
    }

    let rows = radii.len();
    let sing_design =
        DMatrix::from_fn(rows, 2, |i, c| if c == 0 { 1.0 } else { radii[i].powf(nf) });
    let sing_rhs = DVector::from_fn(rows, |i, _| full[i] * radii[i].powf(nf - 1.0));
    let (sing, c1) = scaled_lstsq(&sing_design, &sing_rhs)?;

    let lin_design = DMatrix::from_fn(rows, 4, |i, c| radii[i].powi(c as i32));
    let lin_rhs = DVector::from_vec(reg);
    let (lin, c2) = scaled_lstsq(&lin_design, &lin_rhs)?;

    let const_design = DMatrix::from_fn(
        rows,
        2,
        |i, c| if c == 0 { 1.0 } else { radii[i] * radii[i] },
    );
    let mut constant_vec = vec![0.0; n];
    let mut c3: f64 = 0.0;
    for (c, slot) in constant_vec.iter_mut().enumerate() {
        let rhs = DVector::from_fn(rows, |i, _| mean[i][c]);
        let (v, cc) = scaled_lstsq(&const_design, &rhs)?;
        *slot = v[0];
        c3 = c3.max(cc);
    }

    Ok(ExpansionProbe {
        singular_coeff: sing[0],
        linear_coeff: lin[1],
        constant_vec,
        fit_condition: c1.max(c2).max(c3),
    })
}

/// Default probe radii at point j0: ρ, ρ/2, ρ/4, ρ/8 with
/// ρ = min(1e−3, a quarter of the distance to the nearest other point).
pub fn default_radii(config: &Configuration, j0: usize) -> Vec<f64> {
    let gap = (0..config.k())
        .filter(|&j| j != j0)
        .map(|j| (&config.points[j] - &config.points[j0]).norm())
        .fold(f64::INFINITY, f64::min);
    let rho = tolerances::PROBE_RADIUS.min(0.25 * gap);
    (0..4).map(|i| rho / f64::powi(2.0, i)).collect()
}

/// |linear coefficient| of the expansion at every point.
pub fn balance_residual(data: &GreenData) -> Result<Vec<f64>> {
    (0..data.config.k())
        .map(|j| {
            expansion_probe(data, j, &default_radii(&data.config, j)).map(|p| p.linear_coeff.abs())
        })
        .collect()
}

/// The graph x ↦ (x, εG(x)) over a box grid in R^n with analytic jets.
/// Nodes inside any closed ball B(x_j, ρ_*) are masked.
pub fn graph_patch(
    data: &GreenData,
    epsilon: f64,
    grid: Grid,
    rho_star: f64,
) -> Result<ImmersionPatch> {
    let n = data.n();
    if grid.dim() != n {
        return Err(Error::InvalidInput(format!(
            "graph grid has {} axes, expected {n}",
            grid.dim()
        )));
    }
    if !(rho_star > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidInput("need ρ_* > 0 and finite ε".into()));
    }
    let points = &data.config.points;
    let patch = ImmersionPatch::sample_with_jets(grid, 2 * n, |x| {
        let inside = points.iter().any(|p| {
            x.iter()
                .zip(p.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                <= rho_star
        });
        if inside {
            return None;
        }
        let jet = green_jet(data, x).ok()?;
        let value = x
            .iter()
            .copied()
            .chain(jet.value.iter().map(|g| epsilon * g))
            .collect();
        let first = (0..n)
            .map(|i| {
                let mut v = vec![0.0; 2 * n];
                v[i] = 1.0;
                for c in 0..n {
                    v[n + c] = epsilon * jet.first[i][c];
                }
                v
            })
            .collect();
        let second = jet
            .second
            .iter()
            .map(|s| {
                let mut v = vec![0.0; 2 * n];
                for c in 0..n {
                    v[n + c] = epsilon * s[c];
                }
                v
            })
            .collect();
        Some(PointJet {
            value,
            first,
            second,
        })
    });
    if patch.valid_count() == 0 {
        return Err(Error::GridTooCoarse(
            "every graph node lies inside a neck ball".into(),
        ));
    }
    Ok(patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Axis;

    fn single(alpha: f64, a0: DMatrix<f64>) -> GreenData {
        let cfg = Configuration::new(
            3,
            vec![DVector::zeros(3)],
            vec![DMatrix::identity(3, 3)],
            a0,
            1e-3,
            0.3,
        )
        .unwrap();
        GreenData::new(cfg, DVector::from_element(1, alpha)).unwrap()
    }

    #[test]
    fn point_source() {
        let g = green_eval(&single(1.0, DMatrix::zeros(3, 3)), &[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(g, vec![0.25, 0.0, 0.0]);
        let g = green_eval(&single(0.0, DMatrix::identity(3, 3)), &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(g, vec![0.3, -1.0, 2.0]);
        assert!(green_eval(&single(1.0, DMatrix::zeros(3, 3)), &[0.0; 3]).is_err());
    }

    #[test]
    fn jets_match_differences() {
        let d = GreenData::new(
            Configuration::flagship(),
            DVector::from_vec(vec![4.0, 12.0]),
        )
        .unwrap();
        let x = [0.2, 0.7, -0.4];
        let jet = green_jet(&d, &x).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let gp = green_jet(&d, &xp).unwrap();
            let gm = green_jet(&d, &xm).unwrap();
            for c in 0..3 {
                let fd = (gp.value[c] - gm.value[c]) / (2.0 * h);
                assert!((fd - jet.first[i][c]).abs() < 1e-5 * (1.0 + fd.abs()));
                for k in i..3 {
                    let fd2 = (gp.first[k][c] - gm.first[k][c]) / (2.0 * h);
                    let idx = crate::geometry::sym_index(3, i, k);
                    assert!((fd2 - jet.second[idx][c]).abs() < 1e-4 * (1.0 + fd2.abs()));
                }
            }
        }
    }

    #[test]
    fn lone_point_has_no_linear_term() {
        let d = single(2.0, DMatrix::zeros(3, 3));
        let p = expansion_probe(&d, 0, &[1e-2, 5e-3, 2.5e-3, 1.25e-3]).unwrap();
        assert!((p.singular_coeff - 2.0).abs() < 1e-10);
        assert!(p.linear_coeff.abs() < 1e-10);
        assert_eq!(balance_residual(&d).unwrap().len(), 1);
    }

    #[test]
    fn flat_graph() {
        let d = single(0.0, DMatrix::zeros(3, 3));
        let grid = Grid::new(vec![Axis::closed(1.0, 1.2, 5); 3]);
        let patch = graph_patch(&d, 1e-3, grid, 0.3).unwrap();
        assert!(patch.curvature_sweep().sup < 1e-14);
    }
}
