//! Points of C^n ≅ R^{2n}, the hyperspherical chart, and a central-difference
//! engine for sampled immersions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::par;

/// x + iy ∈ C^n.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl AmbientPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "real part has length {} but imaginary part has length {}",
                x.len(),
                y.len()
            )));
        }
        ensure_dim(x.len())?;
        Ok(Self { x, y })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            y: DVector::zeros(n),
        }
    }

    pub fn real(x: DVector<f64>) -> Self {
        let n = x.len();
        Self {
            x,
            y: DVector::zeros(n),
        }
    }

    /// Splits a 2n-vector into real and imaginary halves.
    pub fn from_real_coords(v: &[f64]) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "odd coordinate count {} for a point of C^n",
                v.len()
            )));
        }
        let n = v.len() / 2;
        Self::new(
            DVector::from_column_slice(&v[..n]),
            DVector::from_column_slice(&v[n..]),
        )
    }

    pub fn to_real_coords(&self) -> Vec<f64> {
        self.x.iter().chain(self.y.iter()).copied().collect()
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared()).sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        ((&self.x - &other.x).norm_squared() + (&self.y - &other.y).norm_squared()).sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            x: &self.x + &other.x,
            y: &self.y + &other.y,
        }
    }
}

/// Θ(θ) and its coordinate derivatives ∂_jΘ.
#[derive(Clone, Debug)]
pub struct ChartValue {
    pub theta: DVector<f64>,
    pub derivatives: Vec<DVector<f64>>,
}

/// Θ = (sin θ_1 Θ'(θ_2, …), cos θ_1), ending with (cos φ, sin φ) on S¹.
/// The derivatives are mutually orthogonal, so the round metric is diagonal.
pub fn sphere_chart_eval(angles: &[f64], n: usize) -> Result<ChartValue> {
    ensure_dim(n)?;
    if angles.len() != n - 1 {
        return Err(Error::InvalidInput(format!(
            "S^{} chart takes {} angles, got {}",
            n - 1,
            n - 1,
            angles.len()
        )));
    }
    let (theta, derivs) = chart_raw(angles);
    Ok(ChartValue {
        theta: DVector::from_vec(theta),
        derivatives: derivs.into_iter().map(DVector::from_vec).collect(),
    })
}

/// Unit vector only, no derivatives. Caller guarantees `angles.len() ≥ 1`.
pub(crate) fn chart_point(angles: &[f64]) -> Vec<f64> {
    if angles.len() == 1 {
        let (s, c) = angles[0].sin_cos();
        return vec![c, s];
    }
    let (s1, c1) = angles[0].sin_cos();
    let mut v: Vec<f64> = chart_point(&angles[1..])
        .into_iter()
        .map(|w| s1 * w)
        .collect();
    v.push(c1);
    v
}

pub(crate) fn chart_raw(angles: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    if angles.len() == 1 {
        let (s, c) = angles[0].sin_cos();
        return (vec![c, s], vec![vec![-s, c]]);
    }
    let (sub, sub_d) = chart_raw(&angles[1..]);
    let (s1, c1) = angles[0].sin_cos();
    let mut theta: Vec<f64> = sub.iter().map(|v| s1 * v).collect();
    theta.push(c1);
    let mut derivs = Vec::with_capacity(angles.len());
    let mut d0: Vec<f64> = sub.iter().map(|v| c1 * v).collect();
    d0.push(-s1);
    derivs.push(d0);
    for d in sub_d {
        let mut v: Vec<f64> = d.iter().map(|w| s1 * w).collect();
        v.push(0.0);
        derivs.push(v);
    }
    (theta, derivs)
}

/// max |MᵀM − I|; infinite for non-square input.
pub fn check_orthogonal(m: &DMatrix<f64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.ncols();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).amax()
}

/// One uniform grid axis. Node i sits at `start + i·step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
    pub periodic: bool,
}

impl Axis {
    /// `len` nodes including both end points.
    pub fn closed(lo: f64, hi: f64, len: usize) -> Self {
        let step = if len > 1 {
            (hi - lo) / (len - 1) as f64
        } else {
            0.0
        };
        Self {
            start: lo,
            step,
            len,
            periodic: false,
        }
    }

    /// Nodes at cell midpoints of [lo, hi]; used for polar angles so that no
    /// node lands on a pole.
    pub fn midpoints(lo: f64, hi: f64, len: usize) -> Self {
        let step = (hi - lo) / len as f64;
        Self {
            start: lo + 0.5 * step,
            step,
            len,
            periodic: false,
        }
    }

    /// [0, 2π) with wrap-around neighbours.
    pub fn azimuth(len: usize) -> Self {
        Self {
            start: 0.0,
            step: std::f64::consts::TAU / len as f64,
            len,
            periodic: true,
        }
    }

    /// Nodes from `lo` with spacing `step` up to (at most) `hi`.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Self {
        let len = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Self {
            start: lo,
            step,
            len,
            periodic: false,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.coord(i)).collect()
    }
}

/// Tensor grid, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Self {
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].len;
        }
        Self { axes, strides }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.step).collect()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, lin: usize) -> Vec<usize> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| (lin / s) % a.len)
            .collect()
    }

    pub fn coords(&self, lin: usize) -> Vec<f64> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a.coord((lin / s) % a.len))
            .collect()
    }

    /// Index of the node `offset` steps along `axis`, wrapping periodic axes.
    pub fn neighbor(&self, lin: usize, axis: usize, offset: isize) -> Option<usize> {
        let a = &self.axes[axis];
        let stride = self.strides[axis];
        let i = ((lin / stride) % a.len) as isize;
        let mut j = i + offset;
        if a.periodic {
            j = j.rem_euclid(a.len as isize);
        } else if j < 0 || j >= a.len as isize {
            return None;
        }
        Some((lin as isize + (j - i) * stride as isize) as usize)
    }
}

/// Value plus first and second parameter derivatives of an immersion at one
/// node. `second` holds ∂_i∂_j X for i ≤ j in row order.
#[derive(Clone, Debug)]
pub struct PointJet {
    pub value: Vec<f64>,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
struct Jets {
    first: Vec<f64>,
    second: Vec<f64>,
}

pub(crate) fn sym_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * (i + 1) / 2 + j
}

/// Samples of an immersion of an m-dimensional parameter box into R^dim.
///
/// Masked nodes carry no geometry (chart poles, holes cut out of a box).
/// When analytic jets are supplied they replace finite differences.
#[derive(Clone, Debug)]
pub struct ImmersionPatch {
    grid: Grid,
    dim: usize,
    samples: Vec<f64>,
    mask: Vec<bool>,
    jets: Option<Jets>,
}

/// Parameter derivatives at a node: J is dim × m.
#[derive(Clone, Debug)]
pub struct NodeDerivatives {
    pub jacobian: DMatrix<f64>,
    pub second: Vec<DVector<f64>>,
}

impl ImmersionPatch {
    pub fn sample<F>(grid: Grid, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Option<Vec<f64>> + Sync + Send,
    {
        let vals = par::map_range(grid.len(), |lin| f(&grid.coords(lin)));
        let mut samples = vec![0.0; grid.len() * dim];
        let mut mask = vec![false; grid.len()];
        for (lin, v) in vals.into_iter().enumerate() {
            if let Some(v) = v {
                assert_eq!(v.len(), dim, "immersion returned wrong dimension");
                samples[lin * dim..(lin + 1) * dim].copy_from_slice(&v);
                mask[lin] = true;
            }
        }
        Self {
            grid,
            dim,
            samples,
            mask,
            jets: None,
        }
    }

    pub fn sample_with_jets<F>(grid: Grid, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Option<PointJet> + Sync + Send,
    {
        let m = grid.dim();
        let ns = m * (m + 1) / 2;
        let vals = par::map_range(grid.len(), |lin| f(&grid.coords(lin)));
        let len = grid.len();
        let mut samples = vec![0.0; len * dim];
        let mut first = vec![0.0; len * m * dim];
        let mut second = vec![0.0; len * ns * dim];
        let mut mask = vec![false; len];
        for (lin, jet) in vals.into_iter().enumerate() {
            if let Some(jet) = jet {
                samples[lin * dim..(lin + 1) * dim].copy_from_slice(&jet.value);
                for (a, d) in jet.first.iter().enumerate() {
                    let o = (lin * m + a) * dim;
                    first[o..o + dim].copy_from_slice(d);
                }
                for (a, d) in jet.second.iter().enumerate() {
                    let o = (lin * ns + a) * dim;
                    second[o..o + dim].copy_from_slice(d);
                }
                mask[lin] = true;
            }
        }
        Self {
            grid,
            dim,
            samples,
            mask,
            jets: Some(Jets { first, second }),
        }
    }

    /// Patch with no nodes; exports as a header-only file.
    pub fn empty(param_dim: usize, dim: usize) -> Self {
        let grid = Grid::new(
            (0..param_dim)
                .map(|_| Axis {
                    start: 0.0,
                    step: 1.0,
                    len: 0,
                    periodic: false,
                })
                .collect(),
        );
        Self {
            grid,
            dim,
            samples: Vec::new(),
            mask: Vec::new(),
            jets: None,
        }
    }

    /// Invalidates every node whose parameters satisfy `pred`.
    pub fn mask_where<P: Fn(&[f64]) -> bool>(&mut self, pred: P) {
        for lin in 0..self.grid.len() {
            if self.mask[lin] && pred(&self.grid.coords(lin)) {
                self.mask[lin] = false;
            }
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn param_dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn has_jets(&self) -> bool {
        self.jets.is_some()
    }

    pub fn is_valid(&self, lin: usize) -> bool {
        self.mask[lin]
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v).count()
    }

    pub fn point(&self, lin: usize) -> &[f64] {
        &self.samples[lin * self.dim..(lin + 1) * self.dim]
    }

    fn valid_neighbor(&self, lin: usize, axis: usize, off: isize) -> Option<usize> {
        self.grid.neighbor(lin, axis, off).filter(|&j| self.mask[j])
    }

    /// True when the node and its full second-order stencil are valid.
    pub fn evaluable(&self, lin: usize) -> bool {
        if !self.mask[lin] {
            return false;
        }
        if self.jets.is_some() {
            return true;
        }
        let m = self.param_dim();
        for a in 0..m {
            for off in [-1isize, 1] {
                let Some(p) = self.valid_neighbor(lin, a, off) else {
                    return false;
                };
                for b in a + 1..m {
                    if self.valid_neighbor(p, b, 1).is_none()
                        || self.valid_neighbor(p, b, -1).is_none()
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn derivatives(&self, lin: usize) -> Result<NodeDerivatives> {
        let m = self.param_dim();
        let dim = self.dim;
        let stencil_err = || Error::Stencil {
            node: self.grid.unravel(lin),
        };
        if !self.mask[lin] {
            return Err(stencil_err());
        }
        if let Some(j) = &self.jets {
            let ns = m * (m + 1) / 2;
            let jac = DMatrix::from_fn(dim, m, |r, c| j.first[(lin * m + c) * dim + r]);
            let second = (0..ns)
                .map(|a| {
                    let o = (lin * ns + a) * dim;
                    DVector::from_column_slice(&j.second[o..o + dim])
                })
                .collect();
            return Ok(NodeDerivatives {
                jacobian: jac,
                second,
            });
        }
        let h = self.grid.spacings();
        let x0 = DVector::from_column_slice(self.point(lin));
        let get = |k: usize| DVector::from_column_slice(self.point(k));
        let mut jac = DMatrix::zeros(dim, m);
        let mut second = vec![DVector::zeros(dim); m * (m + 1) / 2];
        for a in 0..m {
            let p = self.valid_neighbor(lin, a, 1).ok_or_else(stencil_err)?;
            let q = self.valid_neighbor(lin, a, -1).ok_or_else(stencil_err)?;
            let (xp, xq) = (get(p), get(q));
            jac.set_column(a, &((&xp - &xq) / (2.0 * h[a])));
            second[sym_index(m, a, a)] = (&xp - &x0 * 2.0 + &xq) / (h[a] * h[a]);
            for b in a + 1..m {
                let pp = self.valid_neighbor(p, b, 1).ok_or_else(stencil_err)?;
                let pq = self.valid_neighbor(p, b, -1).ok_or_else(stencil_err)?;
                let qp = self.valid_neighbor(q, b, 1).ok_or_else(stencil_err)?;
                let qq = self.valid_neighbor(q, b, -1).ok_or_else(stencil_err)?;
                second[sym_index(m, a, b)] =
                    (get(pp) - get(pq) - get(qp) + get(qq)) / (4.0 * h[a] * h[b]);
            }
        }
        Ok(NodeDerivatives {
            jacobian: jac,
            second,
        })
    }

    pub fn first_fundamental_form_at(&self, lin: usize) -> Result<DMatrix<f64>> {
        let d = self.derivatives(lin)?;
        let g = d.jacobian.transpose() * &d.jacobian;
        if g.clone().cholesky().is_none() {
            return Err(Error::DegenerateJacobian {
                node: self.grid.unravel(lin),
            });
        }
        Ok(g)
    }

    /// H = (I − J g⁻¹ Jᵀ) Σ g^{ij} ∂_i∂_j X.
    pub fn mean_curvature_at(&self, lin: usize) -> Result<DVector<f64>> {
        let d = self.derivatives(lin)?;
        let m = self.param_dim();
        let g = d.jacobian.transpose() * &d.jacobian;
        let chol = g.cholesky().ok_or_else(|| Error::DegenerateJacobian {
            node: self.grid.unravel(lin),
        })?;
        let ginv = chol.inverse();
        let mut lap = DVector::zeros(self.dim);
        for i in 0..m {
            for j in 0..m {
                lap.axpy(ginv[(i, j)], &d.second[sym_index(m, i, j)], 1.0);
            }
        }
        let tang = &d.jacobian * (&ginv * (d.jacobian.transpose() * &lap));
        Ok(lap - tang)
    }

    /// Mean curvature at every evaluable node.
    pub fn curvature_sweep(&self) -> CurvatureSweep {
        let vals = par::map_range(self.len(), |lin| {
            if !self.evaluable(lin) {
                return None;
            }
            let h = self.mean_curvature_at(lin).ok()?;
            let d = self.derivatives(lin).ok()?;
            let mut defect: f64 = 0.0;
            for c in 0..self.param_dim() {
                let col = d.jacobian.column(c);
                defect = defect.max(col.dot(&h).abs() / col.norm());
            }
            Some((lin, h.norm(), defect))
        });
        let mut nodes = Vec::new();
        let mut norms = Vec::new();
        let mut sup: f64 = 0.0;
        let mut tangent_defect: f64 = 0.0;
        for (lin, nrm, def) in vals.into_iter().flatten() {
            nodes.push(lin);
            norms.push(nrm);
            sup = sup.max(nrm);
            tangent_defect = tangent_defect.max(def);
        }
        CurvatureSweep {
            sup,
            tangent_defect,
            nodes,
            norms,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurvatureSweep {
    pub sup: f64,
    /// max over nodes and tangent directions of |⟨H, ∂_iX⟩| / |∂_iX|.
    pub tangent_defect: f64,
    pub nodes: Vec<usize>,
    pub norms: Vec<f64>,
}

pub fn first_fundamental_form(patch: &ImmersionPatch, node: &[usize]) -> Result<DMatrix<f64>> {
    patch.first_fundamental_form_at(patch.grid().index(node))
}

pub fn mean_curvature_vector(patch: &ImmersionPatch, node: &[usize]) -> Result<DVector<f64>> {
    patch.mean_curvature_at(patch.grid().index(node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn chart_examples() {
        let c = sphere_chart_eval(&[PI / 2.0, 0.0], 3).unwrap();
        assert!((c.theta[0] - 1.0).abs() < 1e-15);
        assert!(c.theta[1].abs() < 1e-15 && c.theta[2].abs() < 1e-15);
        let c = sphere_chart_eval(&[0.0], 2).unwrap();
        assert_eq!(c.theta.as_slice(), &[1.0, 0.0]);
        assert!(matches!(
            sphere_chart_eval(&[], 1),
            Err(Error::Dimension(1))
        ));
    }

    #[test]
    fn chart_derivatives_match_finite_differences() {
        let angles = [0.7, 1.9, 4.0];
        let c = sphere_chart_eval(&angles, 4).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let mut ap = angles;
            let mut am = angles;
            ap[j] += h;
            am[j] -= h;
            let fd = (DVector::from_vec(chart_point(&ap)) - DVector::from_vec(chart_point(&am)))
                / (2.0 * h);
            assert!((fd - &c.derivatives[j]).amax() < 1e-9);
        }
    }

    #[test]
    fn orthogonality_defect() {
        assert_eq!(check_orthogonal(&DMatrix::identity(3, 3)), 0.0);
        let m = DMatrix::<f64>::identity(3, 3) * 1.01;
        assert!((check_orthogonal(&m) - 0.0201).abs() < 1e-12);
        assert!(check_orthogonal(&DMatrix::zeros(2, 3)).is_infinite());
    }

    #[test]
    fn grid_neighbors_wrap_on_periodic_axes() {
        let g = Grid::new(vec![Axis::closed(0.0, 1.0, 3), Axis::azimuth(4)]);
        let lin = g.index(&[1, 0]);
        assert_eq!(g.neighbor(lin, 1, -1), Some(g.index(&[1, 3])));
        assert_eq!(g.neighbor(lin, 0, 2), None);
        assert_eq!(g.unravel(g.index(&[2, 3])), vec![2, 3]);
    }

    #[test]
    fn flat_plane_has_identity_metric_and_zero_curvature() {
        let g = Grid::new(vec![Axis::closed(-1.0, 1.0, 9), Axis::closed(-1.0, 1.0, 9)]);
        let p = ImmersionPatch::sample(g, 4, |u| Some(vec![u[0], u[1], 0.0, 0.0]));
        let gm = first_fundamental_form(&p, &[4, 4]).unwrap();
        assert!((gm - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        assert!(mean_curvature_vector(&p, &[3, 5]).unwrap().amax() < 1e-13);
        assert!(matches!(
            mean_curvature_vector(&p, &[0, 4]),
            Err(Error::Stencil { .. })
        ));
    }

    #[test]
    fn collapsed_patch_is_degenerate() {
        let g = Grid::new(vec![Axis::closed(-1.0, 1.0, 5), Axis::closed(-1.0, 1.0, 5)]);
        let p = ImmersionPatch::sample(g, 3, |u| Some(vec![u[0], u[0], 0.0]));
        assert!(matches!(
            first_fundamental_form(&p, &[2, 2]),
            Err(Error::DegenerateJacobian { .. })
        ));
    }
}
