//! Assembly of the approximate glued submanifold: the outer Green graph with
//! holes around the marked points plus one translated, rotated and rescaled
//! neck per point. Boundary gaps, curvature residuals and distances to the
//! limiting planes are measured here.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::PI;

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::geometry::{chart_point, AmbientPoint, Axis, Grid, ImmersionPatch};
use crate::green::{graph_patch, green_eval, green_jet, translation_constant, GreenData};
use crate::harmonics::{sh_analyze, ShGrid};
use crate::matching::BoundaryDiscrepancy;
use crate::neck::{neck_patch_t, s_of_radius, s_to_t, sphere_axes, NeckParams};
use crate::par;
use crate::quadrature::{omega_n, QuadratureRule};

/// s_* on the lower branch with r(s_*) = ρ_*, and t_* = t(s_*).
pub fn scales_from(epsilon: f64, rho_star: f64, beta: f64, n: usize) -> Result<(f64, f64)> {
    let p = NeckParams::new(
        n,
        beta,
        epsilon,
        DMatrix::identity(n, n),
        AmbientPoint::zeros(n),
    )?;
    let s = s_of_radius(&p, rho_star)?;
    Ok((s, s_to_t(s, n)?))
}

/// Resolution of the assembled pieces. `None` fields fall back to defaults
/// derived from the configuration.
#[derive(Clone, Debug, Serialize)]
pub struct GridSpec {
    /// Outer box half-width; default 2/ρ₀.
    pub box_half: Option<f64>,
    /// Outer grid step; default ρ_*/4.
    pub outer_h: Option<f64>,
    pub neck_t_nodes: usize,
    pub neck_polar_nodes: usize,
    pub neck_azimuth_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            box_half: None,
            outer_h: None,
            neck_t_nodes: 48,
            neck_polar_nodes: 24,
            neck_azimuth_nodes: 48,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NeckPiece {
    pub params: NeckParams,
    pub s_star: f64,
    pub t_star: f64,
    /// Sampled over t ∈ [t_*, −t_*] and the sphere chart.
    pub patch: ImmersionPatch,
}

#[derive(Clone, Debug)]
pub struct GluedSurface {
    pub config: Configuration,
    pub alpha: Vec<f64>,
    pub green: GreenData,
    pub outer: ImmersionPatch,
    pub necks: Vec<NeckPiece>,
    pub config_digest: String,
    pub grid: GridSpec,
}

/// Builds the outer graph and the k necks with β_j = α_j. Neck j is the
/// scaled H_{R_j} translated by x_j + iεc_j, c_j the regular part of G at x_j.
pub fn assemble(config: &Configuration, alpha: &[f64], spec: &GridSpec) -> Result<GluedSurface> {
    let n = config.n;
    if alpha.len() != config.k() {
        return Err(Error::InvalidInput(format!(
            "{} neck scales for {} points",
            alpha.len(),
            config.k()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::OutOfRange {
            what: "neck scale alpha",
            value: *a,
            range: "(0, ∞)".into(),
        });
    }
    let eps = config.epsilon;
    let rho = config.rho_star;
    if let Some(d) = config.min_distance() {
        if rho >= 0.5 * d {
            return Err(Error::OutOfRange {
                what: "rho_star",
                value: rho,
                range: format!("(0, {}) (half the point separation)", 0.5 * d),
            });
        }
    }
    let green = GreenData::new(config.clone(), DVector::from_column_slice(alpha))?;

    let half = spec.box_half.unwrap_or(2.0 / config.rho0());
    let h = spec.outer_h.or(config.options.grid_h).unwrap_or(rho / 4.0);
    let axis = Axis::with_step(-half, half, h);
    let outer = graph_patch(&green, eps, Grid::new(vec![axis; n]), rho)?;

    let mut necks = Vec::with_capacity(config.k());
    for j in 0..config.k() {
        let c = translation_constant(&green, j)?;
        let translation = AmbientPoint::new(
            config.points[j].clone(),
            DVector::from_iterator(n, c.iter().map(|v| eps * v)),
        )?;
        let params = NeckParams::new(n, alpha[j], eps, config.rotations[j].clone(), translation)?;
        let (s_star, t_star) = scales_from(eps, rho, alpha[j], n)?;
        let t_axis = Axis::closed(t_star, -t_star, spec.neck_t_nodes);
        let sphere = sphere_axes(n, spec.neck_polar_nodes, spec.neck_azimuth_nodes);
        let patch = neck_patch_t(&params, t_axis, sphere)?;
        necks.push(NeckPiece {
            params,
            s_star,
            t_star,
            patch,
        });
    }
    Ok(GluedSurface {
        config: config.clone(),
        alpha: alpha.to_vec(),
        green,
        outer,
        necks,
        config_digest: config.digest(),
        grid: spec.clone(),
    })
}

/// Unit vectors Θ with quadrature weights used on the matching spheres. For
/// n = 3 these are the nodes of the harmonic-analysis grid.
#[derive(Clone, Debug)]
pub struct BoundaryNodes {
    pub theta: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub sh_grid: Option<ShGrid>,
}

impl BoundaryNodes {
    pub fn for_config(config: &Configuration) -> Result<Self> {
        let n = config.n;
        if n == 3 {
            let g = ShGrid::for_degree(config.options.sh_degree);
            let theta = (0..g.len()).map(|i| chart_point(&g.angles(i))).collect();
            let weights = (0..g.len()).map(|i| g.weight(i)).collect();
            Ok(Self {
                theta,
                weights,
                sh_grid: Some(g),
            })
        } else {
            let rule = QuadratureRule::product_gauss(n, 12)?;
            Ok(Self {
                theta: (0..rule.len()).map(|i| rule.node(i).to_vec()).collect(),
                weights: (0..rule.len()).map(|i| rule.weight(i)).collect(),
                sh_grid: None,
            })
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Samples of both pieces on the matching sphere of end j, in the frame of
/// R_j: value gap (neck − outer) and ρ_*·∂_r of that gap.
#[derive(Clone, Debug)]
pub struct EndSamples {
    pub value: Vec<Vec<f64>>,
    pub conormal: Vec<Vec<f64>>,
    /// Angle between the neck conormal −∂_sX and the graph direction
    /// (Θ, ε∂_rG), per node.
    pub angle: Vec<f64>,
    /// |neck point − graph point| per node.
    pub position: Vec<f64>,
}

fn mat_t_vec(r: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|c| (0..n).map(|m| r[(m, c)] * v[m]).sum())
        .collect()
}

fn unit_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let d: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x / na - y / nb).powi(2))
        .sum::<f64>()
        .sqrt();
    2.0 * (0.5 * d).min(1.0).asin()
}

pub fn end_samples(surface: &GluedSurface, j: usize, nodes: &BoundaryNodes) -> Result<EndSamples> {
    let cfg = &surface.config;
    let n = cfg.n;
    let eps = cfg.epsilon;
    let rho = cfg.rho_star;
    let neck = surface
        .necks
        .get(j)
        .ok_or_else(|| Error::InvalidInput(format!("no neck {j}")))?;
    let r = &cfg.rotations[j];
    let rows = par::try_map_range(nodes.len(), |i| -> Result<_> {
        let th = &nodes.theta[i];
        let x: Vec<f64> = (0..n).map(|c| cfg.points[j][c] + rho * th[c]).collect();
        let jet = green_jet(&surface.green, &x)?;
        let xn = neck.params.point_at(neck.s_star, th);
        let ds = neck.params.ds_at(neck.s_star, th);
        let gy: Vec<f64> = jet.value.iter().map(|g| eps * g).collect();
        let gap: Vec<f64> = (0..n).map(|c| xn.y[c] - gy[c]).collect();
        let dx: Vec<f64> = (0..n).map(|c| xn.x[c] - x[c]).collect();
        let position = gap.iter().chain(&dx).map(|v| v * v).sum::<f64>().sqrt();
        // ∂_r of the neck as a graph over the x-sphere: ∂_s y / (∂_s x · Θ)
        let drds: f64 = ds.x.iter().zip(th).map(|(a, b)| a * b).sum();
        let dg: Vec<f64> = (0..n)
            .map(|c| eps * (0..n).map(|i| jet.first[i][c] * th[i]).sum::<f64>())
            .collect();
        let dgap: Vec<f64> = (0..n).map(|c| rho * (ds.y[c] / drds - dg[c])).collect();
        let neck_dir: Vec<f64> = ds.x.iter().chain(ds.y.iter()).map(|v| -v).collect();
        let graph_dir: Vec<f64> = th.iter().copied().chain(dg.iter().copied()).collect();
        Ok((
            mat_t_vec(r, &gap),
            mat_t_vec(r, &dgap),
            unit_angle(&neck_dir, &graph_dir),
            position,
        ))
    })?;
    let mut out = EndSamples {
        value: Vec::with_capacity(rows.len()),
        conormal: Vec::with_capacity(rows.len()),
        angle: Vec::with_capacity(rows.len()),
        position: Vec::with_capacity(rows.len()),
    };
    for (v, c, a, p) in rows {
        out.value.push(v);
        out.conormal.push(c);
        out.angle.push(a);
        out.position.push(p);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct EndGap {
    pub position_sup: f64,
    pub conormal_angle_sup: f64,
    /// (1/ω_n)∫ D·Θ for the value gap D in the R_j frame.
    pub collinear_value: f64,
    /// Same for the ρ_*-scaled radial derivative of the gap.
    pub collinear_conormal: f64,
}

pub fn boundary_gap(surface: &GluedSurface) -> Result<Vec<EndGap>> {
    let nodes = BoundaryNodes::for_config(&surface.config)?;
    let omega = omega_n(surface.config.n)?;
    (0..surface.necks.len())
        .map(|j| {
            let s = end_samples(surface, j, &nodes)?;
            let proj = |f: &[Vec<f64>]| {
                f.iter()
                    .zip(&nodes.theta)
                    .zip(&nodes.weights)
                    .map(|((v, th), w)| w * v.iter().zip(th).map(|(a, b)| a * b).sum::<f64>())
                    .sum::<f64>()
                    / omega
            };
            Ok(EndGap {
                position_sup: s.position.iter().copied().fold(0.0, f64::max),
                conormal_angle_sup: s.angle.iter().copied().fold(0.0, f64::max),
                collinear_value: proj(&s.value),
                collinear_conormal: proj(&s.conormal),
            })
        })
        .collect()
}

/// Discrepancies per end as harmonic expansions of degree L (n = 3 only).
pub fn boundary_discrepancies(surface: &GluedSurface) -> Result<Vec<BoundaryDiscrepancy>> {
    let nodes = BoundaryNodes::for_config(&surface.config)?;
    let grid = nodes.sh_grid.as_ref().ok_or_else(|| {
        Error::InvalidInput("harmonic discrepancies are available for n = 3 only".into())
    })?;
    let l = surface.config.options.sh_degree;
    (0..surface.necks.len())
        .map(|j| {
            let s = end_samples(surface, j, &nodes)?;
            let to3 = |f: &[Vec<f64>]| f.iter().map(|v| [v[0], v[1], v[2]]).collect::<Vec<_>>();
            Ok(BoundaryDiscrepancy {
                value: sh_analyze(grid, &to3(&s.value), l)?,
                conormal: sh_analyze(grid, &to3(&s.conormal), l)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchCurvature {
    pub name: String,
    pub sup: f64,
    pub nodes: usize,
    /// Counts of log10|H| in unit bins; bin i covers [lo + i, lo + i + 1).
    pub histogram_lo: i32,
    pub histogram: Vec<usize>,
}

fn summarize(name: String, patch: &ImmersionPatch) -> PatchCurvature {
    let sweep = patch.curvature_sweep();
    let lo = -16;
    let mut histogram = vec![0usize; 20];
    for &v in &sweep.norms {
        let b = if v > 0.0 {
            v.log10().floor() as i32 - lo
        } else {
            0
        };
        histogram[b.clamp(0, 19) as usize] += 1;
    }
    PatchCurvature {
        name,
        sup: sweep.sup,
        nodes: sweep.nodes.len(),
        histogram_lo: lo,
        histogram,
    }
}

/// Mean-curvature sup and histogram for the outer patch and every neck.
pub fn curvature_report(surface: &GluedSurface) -> Vec<PatchCurvature> {
    let mut out = vec![summarize("outer".into(), &surface.outer)];
    for (j, nk) in surface.necks.iter().enumerate() {
        out.push(summarize(format!("neck{j}"), &nk.patch));
    }
    out
}

/// Orthonormal basis (2n × n) of the plane Π_j: x ↦ x_j + cos(π/n)x + i sin(π/n)R_j x.
fn plane_basis(r: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let a = PI / n as f64;
    let mut b = DMatrix::zeros(2 * n, n);
    for c in 0..n {
        b[(c, c)] = a.cos();
        for m in 0..n {
            b[(n + m, c)] = a.sin() * r[(m, c)];
        }
    }
    b
}

/// Largest distance from a sampled point of the surface to the union of the
/// planes Π_0 = R^n and Π_j, over points at distance > `exclusion` from
/// every x_j.
pub fn hausdorff_to_planes(surface: &GluedSurface, exclusion: f64) -> f64 {
    let cfg = &surface.config;
    let n = cfg.n;
    let bases: Vec<DMatrix<f64>> = cfg.rotations.iter().map(|r| plane_basis(r, n)).collect();
    let dist = |p: &[f64]| -> Option<f64> {
        let mut best: f64 = p[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
        for (j, b) in bases.iter().enumerate() {
            let mut d = DVector::from_column_slice(p);
            for c in 0..n {
                d[c] -= cfg.points[j][c];
            }
            if d.norm() <= exclusion {
                return None;
            }
            let proj = b * (b.transpose() * &d);
            best = best.min((d - proj).norm());
        }
        Some(best)
    };
    let mut patches: Vec<&ImmersionPatch> = vec![&surface.outer];
    patches.extend(surface.necks.iter().map(|nk| &nk.patch));
    patches
        .into_iter()
        .map(|patch| {
            par::map_range(patch.len(), |i| {
                if patch.is_valid(i) {
                    dist(patch.point(i)).unwrap_or(0.0)
                } else {
                    0.0
                }
            })
            .into_iter()
            .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// max over valid neck samples of |ε^{−1/n}(X − x_j − iεc_j) − Y| where Y is
/// the sample of the neck with β = α_j, ε = 1 at the same parameters.
pub fn rescaling_defect(surface: &GluedSurface) -> Result<f64> {
    let n = surface.config.n;
    let eps = surface.config.epsilon;
    let f = eps.powf(-1.0 / n as f64);
    let mut worst: f64 = 0.0;
    for nk in &surface.necks {
        let model = NeckParams::new(
            n,
            nk.params.beta,
            1.0,
            nk.params.rotation.clone(),
            AmbientPoint::zeros(n),
        )?;
        let grid = nk.patch.grid();
        for i in 0..nk.patch.len() {
            if !nk.patch.is_valid(i) {
                continue;
            }
            let c = grid.coords(i);
            let s = crate::neck::t_to_s(c[0], n)?;
            let y = model.point_at(s, &chart_point(&c[1..])).to_real_coords();
            let p = nk.patch.point(i);
            let t = nk.params.translation.to_real_coords();
            let d = (0..2 * n)
                .map(|m| (f * (p[m] - t[m]) - y[m]).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d / (1.0 + y.iter().map(|v| v * v).sum::<f64>().sqrt()));
        }
    }
    Ok(worst)
}

/// Value of the outer graph's height at x, used by reports: εG(x).
pub fn outer_height(surface: &GluedSurface, x: &[f64]) -> Result<Vec<f64>> {
    Ok(green_eval(&surface.green, x)?
        .into_iter()
        .map(|g| surface.config.epsilon * g)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_example() {
        let (s, t) = scales_from(1e-4, 0.2, 1.0, 3).unwrap();
        let lhs = (3.0 * s).sin();
        let rhs = 3e-4 * s.cos().powi(3) / 0.008;
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(t < 0.0);
        let e = (-3.0 * t).exp();
        assert!((e - (3.0 * s).sin() / (1.0 - (3.0 * s).cos())).abs() < 1e-9 * e);
    }

    #[test]
    fn smaller_epsilon_pushes_scales_down() {
        let (s1, t1) = scales_from(1e-3, 0.3, 1.0, 3).unwrap();
        let (s2, t2) = scales_from(1e-6, 0.3, 1.0, 3).unwrap();
        assert!(s2 < s1 && t2 < t1);
        assert!(scales_from(1.0, 0.1, 1.0, 3).is_err());
    }

    #[test]
    fn flagship_assembles() {
        let cfg = Configuration::flagship();
        let spec = GridSpec {
            outer_h: Some(0.25),
            neck_t_nodes: 8,
            neck_polar_nodes: 8,
            neck_azimuth_nodes: 8,
            ..GridSpec::default()
        };
        let s = assemble(&cfg, &[4.0, 12.0], &spec).unwrap();
        assert_eq!(s.necks.len(), 2);
        for nk in &s.necks {
            let r = crate::neck::radius_of_s(&nk.params, nk.s_star).unwrap();
            assert!((r - cfg.rho_star).abs() < 1e-10);
        }
        assert!(rescaling_defect(&s).unwrap() < 1e-10);
        assert!(assemble(&cfg, &[-4.0, 12.0], &spec).is_err());
    }
}
