//! Real spherical harmonics on S² for R³-valued boundary maps, harmonic
//! extensions and the Dirichlet-to-Neumann operators.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::gauss_legendre;

/// Number of real harmonics of degree ≤ l.
pub fn sh_count(l: usize) -> usize {
    (l + 1) * (l + 1)
}

/// Index of Y_{k,m}, −k ≤ m ≤ k.
pub fn sh_index(k: usize, m: i64) -> usize {
    ((k * k + k) as i64 + m) as usize
}

/// Orthonormal real harmonics Y_{k,m}(θ, φ) for k ≤ l, no Condon–Shortley
/// phase, in the order of `sh_index`.
pub fn real_sh_all(l: usize, theta: f64, phi: f64) -> Vec<f64> {
    let (st, ct) = theta.sin_cos();
    // q[k][m]: normalized associated Legendre times the 1/√(2π) azimuth factor
    let mut q = vec![vec![0.0; l + 1]; l + 1];
    q[0][0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=l {
        let mf = m as f64;
        q[m][m] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * st * q[m - 1][m - 1];
    }
    for m in 0..l {
        q[m + 1][m] = (2.0 * m as f64 + 3.0).sqrt() * ct * q[m][m];
    }
    for m in 0..=l {
        for k in m + 2..=l {
            let (kf, mf) = (k as f64, m as f64);
            let a = ((4.0 * kf * kf - 1.0) / (kf * kf - mf * mf)).sqrt();
            let b = (((kf - 1.0).powi(2) - mf * mf) / (4.0 * (kf - 1.0).powi(2) - 1.0)).sqrt();
            q[k][m] = a * (ct * q[k - 1][m] - b * q[k - 2][m]);
        }
    }
    let mut out = vec![0.0; sh_count(l)];
    let r2 = 2f64.sqrt();
    for k in 0..=l {
        out[sh_index(k, 0)] = q[k][0];
        for m in 1..=k {
            let (s, c) = (m as f64 * phi).sin_cos();
            out[sh_index(k, m as i64)] = r2 * q[k][m] * c;
            out[sh_index(k, -(m as i64))] = r2 * q[k][m] * s;
        }
    }
    out
}

/// Gauss–Legendre nodes in cos θ times uniform nodes in φ.
#[derive(Clone, Debug)]
pub struct ShGrid {
    pub theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub phi: Vec<f64>,
}

impl ShGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        Self {
            theta: x.iter().map(|c| c.acos()).collect(),
            theta_weights: w,
            phi: (0..n_phi)
                .map(|j| 2.0 * PI * j as f64 / n_phi as f64)
                .collect(),
        }
    }

    /// Smallest grid accepted for degree l: 2l + 2 nodes per angle.
    pub fn for_degree(l: usize) -> Self {
        Self::new(2 * l + 2, 2 * l + 2)
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (θ, φ) of node i; φ varies fastest.
    pub fn angles(&self, i: usize) -> [f64; 2] {
        let np = self.phi.len();
        [self.theta[i / np], self.phi[i % np]]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.theta_weights[i / self.phi.len()] * 2.0 * PI / self.phi.len() as f64
    }

    pub fn resolves(&self, l: usize) -> bool {
        self.theta.len() >= 2 * l + 2 && self.phi.len() >= 2 * l + 2
    }
}

/// Real coefficients of the three components of a map S² → R³.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShExpansion {
    pub degree: usize,
    pub coeffs: [Vec<f64>; 3],
}

impl ShExpansion {
    pub fn zeros(degree: usize) -> Self {
        let z = vec![0.0; sh_count(degree)];
        Self {
            degree,
            coeffs: [z.clone(), z.clone(), z],
        }
    }

    /// cΘ: Θ_x = √(4π/3) Y_{1,1}, Θ_y = √(4π/3) Y_{1,−1}, Θ_z = √(4π/3) Y_{1,0}.
    pub fn theta(degree: usize, c: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidInput("Θ needs degree at least 1".into()));
        }
        let mut e = Self::zeros(degree);
        let s = c * (4.0 * PI / 3.0).sqrt();
        e.coeffs[0][sh_index(1, 1)] = s;
        e.coeffs[1][sh_index(1, -1)] = s;
        e.coeffs[2][sh_index(1, 0)] = s;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        3 * sh_count(self.degree)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn map_degrees<F: Fn(usize) -> f64>(&self, f: F) -> Self {
        let mut out = self.clone();
        for comp in out.coeffs.iter_mut() {
            for k in 0..=self.degree {
                let fk = f(k);
                for v in &mut comp[k * k..(k + 1) * (k + 1)] {
                    *v *= fk;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_degrees(|_| s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.degree != other.degree {
            return Err(Error::InvalidInput(format!(
                "degree mismatch {} vs {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Raises the degree with zero padding; lowering truncates.
    pub fn with_degree(&self, degree: usize) -> Self {
        let mut out = Self::zeros(degree);
        let m = sh_count(degree.min(self.degree));
        for (o, c) in out.coeffs.iter_mut().zip(&self.coeffs) {
            o[..m].copy_from_slice(&c[..m]);
        }
        out
    }
}

/// Projects samples of a map S² → R³ taken at the nodes of `grid`.
pub fn sh_analyze(grid: &ShGrid, samples: &[[f64; 3]], degree: usize) -> Result<ShExpansion> {
    if !grid.resolves(degree) {
        return Err(Error::UnderResolved {
            degree,
            needed: 2 * degree + 2,
            got: grid.theta.len().min(grid.phi.len()),
        });
    }
    if samples.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples for a grid of {} nodes",
            samples.len(),
            grid.len()
        )));
    }
    let count = sh_count(degree);
    let rows = par::map_range(grid.theta.len(), |i| {
        let mut acc = [vec![0.0; count], vec![0.0; count], vec![0.0; count]];
        for j in 0..grid.phi.len() {
            let node = i * grid.phi.len() + j;
            let w = grid.weight(node);
            let y = real_sh_all(degree, grid.theta[i], grid.phi[j]);
            for (c, a) in acc.iter_mut().enumerate() {
                let v = w * samples[node][c];
                a.iter_mut().zip(&y).for_each(|(s, yk)| *s += v * yk);
            }
        }
        acc
    });
    let mut out = ShExpansion::zeros(degree);
    for row in rows {
        for (o, r) in out.coeffs.iter_mut().zip(row) {
            o.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
    }
    Ok(out)
}

pub fn sh_synthesize(exp: &ShExpansion, theta: f64, phi: f64) -> [f64; 3] {
    let y = real_sh_all(exp.degree, theta, phi);
    let mut v = [0.0; 3];
    for (c, out) in v.iter_mut().enumerate() {
        *out = exp.coeffs[c].iter().zip(&y).map(|(a, b)| a * b).sum();
    }
    v
}

/// Samples a map S² → R³ on the grid, f(θ, φ).
pub fn sample_on<F>(grid: &ShGrid, f: F) -> Vec<[f64; 3]>
where
    F: Fn(f64, f64) -> [f64; 3] + Sync + Send,
{
    par::map_range(grid.len(), |i| {
        let [t, p] = grid.angles(i);
        f(t, p)
    })
}

/// ∂_r of the interior extension at r = 1: degree k scales by k.
pub fn p_int(phi: &ShExpansion) -> ShExpansion {
    phi.map_degrees(|k| k as f64)
}

/// ∂_r of the exterior extension at r = 1: degree k scales by −(k + 1).
pub fn p_ext(phi: &ShExpansion) -> ShExpansion {
    phi.map_degrees(|k| -(k as f64 + 1.0))
}

/// Eigenvalue −(2k + 1) of 𝒫_ext − 𝒫_int on degree k.
pub fn dtn_eigenvalue(k: usize) -> f64 {
    -(2.0 * k as f64 + 1.0)
}

/// Φ with (𝒫_ext − 𝒫_int)Φ = Ψ.
pub fn dtn_solve(psi: &ShExpansion) -> ShExpansion {
    psi.map_degrees(|k| 1.0 / dtn_eigenvalue(k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Interior,
    Exterior,
}

/// Σ r^k φ_k inside the unit ball, Σ r^{−1−k} φ_k outside.
pub fn harmonic_extension(
    phi: &ShExpansion,
    side: Side,
    r: f64,
    theta: f64,
    az: f64,
) -> Result<[f64; 3]> {
    let ok = match side {
        Side::Interior => (0.0..=1.0).contains(&r),
        Side::Exterior => r >= 1.0 && r.is_finite(),
    };
    if !ok {
        return Err(Error::OutOfRange {
            what: "extension radius",
            value: r,
            range: match side {
                Side::Interior => "[0, 1]".into(),
                Side::Exterior => "[1, ∞)".into(),
            },
        });
    }
    let y = real_sh_all(phi.degree, theta, az);
    let mut v = [0.0; 3];
    for k in 0..=phi.degree {
        let f = match side {
            Side::Interior => r.powi(k as i32),
            Side::Exterior => r.powi(-(k as i32) - 1),
        };
        for (c, out) in v.iter_mut().enumerate() {
            let part: f64 = (k * k..(k + 1) * (k + 1))
                .map(|i| phi.coeffs[c][i] * y[i])
                .sum();
            *out += f * part;
        }
    }
    Ok(v)
}

/// (1/ω₃)∫Φ·Θ and Φ minus that multiple of Θ.
pub fn split_theta(phi: &ShExpansion) -> Result<(f64, ShExpansion)> {
    if phi.degree < 1 {
        return Ok((0.0, phi.clone()));
    }
    let s = (4.0 * PI / 3.0).sqrt();
    let c = s
        * (phi.coeffs[0][sh_index(1, 1)]
            + phi.coeffs[1][sh_index(1, -1)]
            + phi.coeffs[2][sh_index(1, 0)])
        / (4.0 * PI);
    let orth = phi.sub(&ShExpansion::theta(phi.degree, c)?)?;
    Ok((c, orth))
}
