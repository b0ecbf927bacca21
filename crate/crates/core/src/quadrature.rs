//! Integration over S^{n−1}.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::chart_point;
use crate::par;
use crate::tolerances;

/// |S^{n−1}| = 2π^{n/2}/Γ(n/2), via ω_{n+2} = 2π ω_n / n.
pub fn omega_n(n: usize) -> Result<f64> {
    ensure_dim(n)?;
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    let mut w = if n % 2 == 0 { 2.0 * PI } else { 4.0 * PI };
    while k < n {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    Ok(w)
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    ProductGauss,
    MonteCarlo,
}

/// Estimate with its standard error (zero for deterministic rules).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Nodes Θ_i on S^{n−1} with weights summing to ω_n.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: RuleKind,
    seed: Option<u64>,
}

impl QuadratureRule {
    /// Gauss–Legendre in each polar angle (with its sin-power weight) and the
    /// periodic trapezoid rule in the azimuth.
    pub fn product_gauss(n: usize, per_angle: usize) -> Result<Self> {
        ensure_dim(n)?;
        if per_angle == 0 {
            return Err(Error::InvalidInput(
                "quadrature needs at least one node per angle".into(),
            ));
        }
        let (x, w) = gauss_legendre(per_angle);
        let polar: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| (0.5 * PI * (x + 1.0), 0.5 * PI * w))
            .collect();
        let az_step = 2.0 * PI / per_angle as f64;
        let count = per_angle.pow((n - 1) as u32);
        let mut nodes = Vec::with_capacity(count * n);
        let mut weights = Vec::with_capacity(count);
        let mut idx = vec![0usize; n - 1];
        let mut angles = vec![0.0; n - 1];
        for _ in 0..count {
            let mut wt = az_step;
            for j in 0..n - 2 {
                let (th, w) = polar[idx[j]];
                angles[j] = th;
                wt *= w * th.sin().powi((n - 2 - j) as i32);
            }
            angles[n - 2] = idx[n - 2] as f64 * az_step;
            nodes.extend(chart_point(&angles));
            weights.push(wt);
            for j in (0..n - 1).rev() {
                idx[j] += 1;
                if idx[j] < per_angle {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(Self {
            n,
            nodes,
            weights,
            kind: RuleKind::ProductGauss,
            seed: None,
        })
    }

    /// Normalized Gaussian samples with equal weights ω_n/N.
    pub fn monte_carlo(n: usize, samples: usize, seed: u64) -> Result<Self> {
        ensure_dim(n)?;
        if samples == 0 {
            return Err(Error::InvalidInput(
                "Monte-Carlo rule needs at least one sample".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = Vec::with_capacity(samples * n);
        let mut v = vec![0.0; n];
        for _ in 0..samples {
            loop {
                for c in v.iter_mut() {
                    *c = StandardNormal.sample(&mut rng);
                }
                let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if r > 1e-300 {
                    nodes.extend(v.iter().map(|c| c / r));
                    break;
                }
            }
        }
        let w = omega_n(n)? / samples as f64;
        Ok(Self {
            n,
            nodes,
            weights: vec![w; samples],
            kind: RuleKind::MonteCarlo,
            seed: Some(seed),
        })
    }

    /// Product rule with the default node count for n ≤ 4, Monte-Carlo above.
    pub fn default_for(n: usize, seed: u64) -> Result<Self> {
        if n <= 4 {
            Self::product_gauss(n, tolerances::QUADRATURE_NODES)
        } else {
            Self::monte_carlo(n, tolerances::MC_SAMPLES, seed)
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.n..(i + 1) * self.n]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weight_sum(&self) -> f64 {
        par::pairwise_sum(&self.weights)
    }

    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let terms = par::map_range(self.len(), |i| self.weights[i] * f(self.node(i)));
        par::pairwise_sum(&terms)
    }

    /// Like [`integrate`](Self::integrate) but also returns σ/√N for
    /// Monte-Carlo rules.
    pub fn estimate<F>(&self, f: F) -> Estimate
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let vals = par::map_range(self.len(), |i| f(self.node(i)));
        let terms: Vec<f64> = vals.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        let value = par::pairwise_sum(&terms);
        let std_error = match self.kind {
            RuleKind::ProductGauss => 0.0,
            RuleKind::MonteCarlo => {
                let n = vals.len() as f64;
                let omega = self.weight_sum();
                let mean = value / omega;
                let sq: Vec<f64> = vals.iter().map(|v| (v - mean) * (v - mean)).collect();
                let var = par::pairwise_sum(&sq) / (n - 1.0).max(1.0);
                omega * (var / n).sqrt()
            }
        };
        Estimate { value, std_error }
    }
}

pub fn integrate<F>(rule: &QuadratureRule, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    rule.integrate(f)
}

/// ∫ (Θ·u)(Θ·v) dθ = (ω_n/n) u·v.
pub fn second_moment(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "second moment of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let n = u.len();
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(omega_n(n)? / n as f64 * dot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_values() {
        assert_eq!(omega_n(2).unwrap(), 2.0 * PI);
        assert_eq!(omega_n(3).unwrap(), 4.0 * PI);
        assert!((omega_n(4).unwrap() - 2.0 * PI * PI).abs() < 1e-13 * 2.0 * PI * PI);
        assert!((omega_n(5).unwrap() - 8.0 * PI * PI / 3.0).abs() < 1e-13 * 30.0);
        assert!(omega_n(1).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let i12: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((i12 - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn product_rule_weights_sum_to_area() {
        for n in 2..=4 {
            let r = QuadratureRule::product_gauss(n, 12).unwrap();
            let w = omega_n(n).unwrap();
            assert!((r.weight_sum() - w).abs() < 1e-12 * w, "n = {n}");
            for i in 0..r.len() {
                let nrm: f64 = r.node(i).iter().map(|c| c * c).sum();
                assert!((nrm - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let r = QuadratureRule::product_gauss(3, 32).unwrap();
        assert!((r.integrate(|t| t[0] * t[0]) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!(r.integrate(|t| t[0]).abs() < 1e-13);
        assert!(
            (second_moment(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap() - 4.0 * PI / 3.0).abs()
                < 1e-15
        );
        assert_eq!(second_moment(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = second_moment(&[2.0, 0.0, 0.0, 0.0], &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((s - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let a = QuadratureRule::monte_carlo(5, 1000, 3).unwrap();
        let b = QuadratureRule::monte_carlo(5, 1000, 3).unwrap();
        assert_eq!(a.node(999), b.node(999));
        let e = a.estimate(|t| t[0] * t[0]);
        assert!(e.std_error > 0.0);
    }
}
