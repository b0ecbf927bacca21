//! The Lawlor neck H_R: X(s, Θ) = (nβε)^{1/n} (sin ns)^{−1/n} (cos s Θ + i sin s RΘ),
//! translated, with its s ↔ t ↔ r coordinate changes.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{chart_point, check_orthogonal, AmbientPoint, Axis, Grid, ImmersionPatch};
use crate::tolerances;

#[derive(Clone, Debug)]
pub struct NeckParams {
    pub n: usize,
    pub beta: f64,
    pub epsilon: f64,
    pub rotation: DMatrix<f64>,
    pub translation: AmbientPoint,
}

impl NeckParams {
    pub fn new(
        n: usize,
        beta: f64,
        epsilon: f64,
        rotation: DMatrix<f64>,
        translation: AmbientPoint,
    ) -> Result<Self> {
        ensure_dim(n)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::OutOfRange {
                what: "beta",
                value: beta,
                range: "(0, ∞)".into(),
            });
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::OutOfRange {
                what: "epsilon",
                value: epsilon,
                range: "(0, ∞)".into(),
            });
        }
        if rotation.nrows() != n || translation.n() != n {
            return Err(Error::InvalidInput(
                "rotation or translation has the wrong size".into(),
            ));
        }
        let defect = check_orthogonal(&rotation);
        if !(defect < tolerances::ORTHOGONALITY) {
            return Err(Error::InvalidInput(format!(
                "neck rotation is not orthogonal (defect {defect:e})"
            )));
        }
        Ok(Self {
            n,
            beta,
            epsilon,
            rotation,
            translation,
        })
    }

    /// H_I itself: nβε = 1, no rotation, no translation.
    pub fn unit(n: usize) -> Result<Self> {
        ensure_dim(n)?;
        Self::new(
            n,
            1.0 / n as f64,
            1.0,
            DMatrix::identity(n, n),
            AmbientPoint::zeros(n),
        )
    }

    /// (nβε)^{1/n}.
    pub fn scale(&self) -> f64 {
        (self.n as f64 * self.beta * self.epsilon).powf(1.0 / self.n as f64)
    }

    /// Point at parameter s over the unit vector Θ.
    pub fn point_at(&self, s: f64, theta: &[f64]) -> AmbientPoint {
        let n = self.n;
        let f = self.scale() * (n as f64 * s).sin().powf(-1.0 / n as f64);
        let th = DVector::from_column_slice(theta);
        let rt = &self.rotation * &th;
        AmbientPoint {
            x: th * (f * s.cos()) + &self.translation.x,
            y: rt * (f * s.sin()) + &self.translation.y,
        }
    }

    /// ∂_s X over Θ, as (x, y) parts.
    pub fn ds_at(&self, s: f64, theta: &[f64]) -> AmbientPoint {
        let n = self.n as f64;
        let sig = (n * s).sin();
        let p = sig.powf(-1.0 / n);
        let dp = -(n * s).cos() * sig.powf(-1.0 / n - 1.0);
        let c = self.scale();
        let th = DVector::from_column_slice(theta);
        let rt = &self.rotation * &th;
        AmbientPoint {
            x: th * (c * (dp * s.cos() - p * s.sin())),
            y: rt * (c * (dp * s.sin() + p * s.cos())),
        }
    }
}

fn check_s(s: f64, n: usize) -> Result<()> {
    let hi = PI / n as f64;
    if !(s > 0.0 && s < hi) {
        return Err(Error::OutOfRange {
            what: "s",
            value: s,
            range: format!("(0, π/{n})"),
        });
    }
    Ok(())
}

pub fn neck_point(params: &NeckParams, s: f64, angles: &[f64]) -> Result<AmbientPoint> {
    check_s(s, params.n)?;
    if angles.len() != params.n - 1 {
        return Err(Error::InvalidInput(format!(
            "expected {} chart angles, got {}",
            params.n - 1,
            angles.len()
        )));
    }
    Ok(params.point_at(s, &chart_point(angles)))
}

pub fn neck_point_t(params: &NeckParams, t: f64, angles: &[f64]) -> Result<AmbientPoint> {
    neck_point(params, t_to_s(t, params.n)?, angles)
}

/// e^{nt} = tan(ns/2).
pub fn s_to_t(s: f64, n: usize) -> Result<f64> {
    ensure_dim(n)?;
    check_s(s, n)?;
    let nf = n as f64;
    Ok((0.5 * nf * s).tan().ln() / nf)
}

pub fn t_to_s(t: f64, n: usize) -> Result<f64> {
    ensure_dim(n)?;
    if !t.is_finite() {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            range: "(−∞, ∞)".into(),
        });
    }
    let nf = n as f64;
    Ok(2.0 / nf * (nf * t).exp().atan())
}

/// r(s) = (nβε)^{1/n} cos s (sin ns)^{−1/n}.
pub fn radius_of_s(params: &NeckParams, s: f64) -> Result<f64> {
    check_s(s, params.n)?;
    Ok(radius_unchecked(params, s))
}

fn radius_unchecked(params: &NeckParams, s: f64) -> f64 {
    let n = params.n as f64;
    params.scale() * s.cos() * (n * s).sin().powf(-1.0 / n)
}

/// Argmin and minimum of r on (0, π/n). For n = 2 the radius decreases to
/// zero, so the whole interval is the lower branch.
pub fn branch_minimum(params: &NeckParams) -> (f64, f64) {
    let hi = PI / params.n as f64;
    if params.n == 2 {
        return (hi, 0.0);
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (1e-9 * hi, hi * (1.0 - 1e-9));
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (radius_unchecked(params, c), radius_unchecked(params, d));
    for _ in 0..200 {
        if b - a < 1e-15 * hi {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = radius_unchecked(params, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = radius_unchecked(params, d);
        }
    }
    let s = 0.5 * (a + b);
    (s, radius_unchecked(params, s))
}

/// Inverse of r on the lower branch (0, s_min], by bisection in log s.
pub fn s_of_radius(params: &NeckParams, r: f64) -> Result<f64> {
    let (s_min, r_min) = branch_minimum(params);
    if !(r.is_finite() && r > 0.0) || r < r_min {
        return Err(Error::NeckTooLarge {
            requested: r,
            minimum: r_min,
        });
    }
    let top = if params.n == 2 {
        s_min * (1.0 - 1e-15)
    } else {
        s_min
    };
    if radius_unchecked(params, top) >= r {
        return Ok(top);
    }
    let mut lo = 0.5 * top;
    let mut guard = 0;
    while radius_unchecked(params, lo) < r {
        lo *= 0.5;
        guard += 1;
        if guard > 3000 || lo == 0.0 {
            return Err(Error::OutOfRange {
                what: "r",
                value: r,
                range: "radii reachable in double precision".into(),
            });
        }
    }
    let mut hi = top;
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if radius_unchecked(params, mid) >= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (radius_unchecked(params, lo), radius_unchecked(params, hi));
    Ok(if (rl - r).abs() <= (rh - r).abs() {
        lo
    } else {
        hi
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoteResidual {
    /// sup over all radii and angles of |X(s(ρ), Θ) − (ρΘ + iεβρ^{1−n}RΘ)|.
    pub sup: f64,
    /// max of residual / (ε³ ρ^{1−3n}).
    pub constant: f64,
    pub per_radius: Vec<(f64, f64)>,
}

/// Gap between the lower end and its leading-order graph.
pub fn asymptote_residual(
    params: &NeckParams,
    rhos: &[f64],
    angles: &[Vec<f64>],
) -> Result<AsymptoteResidual> {
    let n = params.n;
    let nf = n as f64;
    let floor = 2.0 * params.scale();
    let mut sup: f64 = 0.0;
    let mut constant: f64 = 0.0;
    let mut per_radius = Vec::with_capacity(rhos.len());
    let origin = AmbientPoint::zeros(n);
    let centered = NeckParams {
        translation: origin,
        ..params.clone()
    };
    for &rho in rhos {
        if rho < floor {
            return Err(Error::OutOfRange {
                what: "rho",
                value: rho,
                range: format!("[{floor}, ∞) (twice the neck scale)"),
            });
        }
        let s = s_of_radius(&centered, rho)?;
        let height = params.epsilon * params.beta * rho.powf(1.0 - nf);
        let mut worst: f64 = 0.0;
        for a in angles {
            if a.len() != n - 1 {
                return Err(Error::InvalidInput(
                    "angle tuple has the wrong length".into(),
                ));
            }
            let th = chart_point(a);
            let p = centered.point_at(s, &th);
            let thv = DVector::from_vec(th);
            let gx = &thv * rho;
            let gy = &params.rotation * &thv * height;
            let gap = ((p.x - gx).norm_squared() + (p.y - gy).norm_squared()).sqrt();
            worst = worst.max(gap);
        }
        sup = sup.max(worst);
        constant = constant.max(worst / (params.epsilon.powi(3) * rho.powf(1.0 - 3.0 * nf)));
        per_radius.push((rho, worst));
    }
    Ok(AsymptoteResidual {
        sup,
        constant,
        per_radius,
    })
}

/// n − 2 polar axes at cell midpoints of [0, π] and one periodic azimuth.
pub fn sphere_axes(n: usize, polar_nodes: usize, azimuth_nodes: usize) -> Vec<Axis> {
    let mut axes: Vec<Axis> = (0..n.saturating_sub(2))
        .map(|_| Axis::midpoints(0.0, PI, polar_nodes))
        .collect();
    axes.push(Axis::azimuth(azimuth_nodes));
    axes
}

/// True when a polar angle sits within two steps of a pole. `axes` are the
/// sphere axes only (polar axes first, azimuth last).
pub fn near_pole(angles: &[f64], axes: &[Axis]) -> bool {
    let polar = axes.len().saturating_sub(1);
    (0..polar).any(|j| {
        let h = axes[j].step;
        angles[j] < 2.0 * h || angles[j] > PI - 2.0 * h
    })
}

/// Neck sampled over (s, angles); pole-adjacent nodes masked.
pub fn neck_patch_s(
    params: &NeckParams,
    s_axis: Axis,
    angle_axes: Vec<Axis>,
) -> Result<ImmersionPatch> {
    let n = params.n;
    if angle_axes.len() != n - 1 {
        return Err(Error::InvalidInput(format!("need {} sphere axes", n - 1)));
    }
    for i in [0, s_axis.len.saturating_sub(1)] {
        check_s(s_axis.coord(i), n)?;
    }
    let sphere = angle_axes.clone();
    let mut axes = vec![s_axis];
    axes.extend(angle_axes);
    let grid = Grid::new(axes);
    let p = params.clone();
    let mut patch = ImmersionPatch::sample(grid, 2 * n, move |c| {
        Some(p.point_at(c[0], &chart_point(&c[1..])).to_real_coords())
    });
    patch.mask_where(|c| near_pole(&c[1..], &sphere));
    Ok(patch)
}

/// Neck sampled over (t, angles).
pub fn neck_patch_t(
    params: &NeckParams,
    t_axis: Axis,
    angle_axes: Vec<Axis>,
) -> Result<ImmersionPatch> {
    let n = params.n;
    if angle_axes.len() != n - 1 {
        return Err(Error::InvalidInput(format!("need {} sphere axes", n - 1)));
    }
    let sphere = angle_axes.clone();
    let mut axes = vec![t_axis];
    axes.extend(angle_axes);
    let grid = Grid::new(axes);
    let p = params.clone();
    let mut patch = ImmersionPatch::sample(grid, 2 * n, move |c| {
        let s = t_to_s(c[0], n).ok()?;
        if !(s > 0.0 && s < PI / n as f64) {
            return None;
        }
        Some(p.point_at(s, &chart_point(&c[1..])).to_real_coords())
    });
    patch.mask_where(|c| near_pole(&c[1..], &sphere));
    Ok(patch)
}
