//! Input configuration: marked points, rotations, A₀ and the gluing
//! parameters, read from a JSON file.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::check_orthogonal;
use crate::tolerances;

/// Optional run overrides carried by the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub quadrature_nodes: usize,
    pub grid_h: Option<f64>,
    pub sh_degree: usize,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            quadrature_nodes: tolerances::QUADRATURE_NODES,
            grid_h: None,
            sh_degree: tolerances::SH_DEGREE,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Configuration {
    pub n: usize,
    pub points: Vec<DVector<f64>>,
    pub rotations: Vec<DMatrix<f64>>,
    pub a0: DMatrix<f64>,
    pub epsilon: f64,
    pub rho_star: f64,
    pub options: RunOptions,
}

impl Configuration {
    pub fn new(
        n: usize,
        points: Vec<DVector<f64>>,
        rotations: Vec<DMatrix<f64>>,
        a0: DMatrix<f64>,
        epsilon: f64,
        rho_star: f64,
    ) -> Result<Self> {
        let cfg = Self {
            n,
            points,
            rotations,
            a0,
            epsilon,
            rho_star,
            options: RunOptions::default(),
        };
        cfg.validate().map_err(|(_, e)| e)?;
        Ok(cfg)
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    /// Checks every invariant. The key names the offending field so that the
    /// file parser can anchor the message to a line.
    fn validate(&self) -> std::result::Result<(), (&'static str, Error)> {
        let n = self.n;
        ensure_dim(n).map_err(|e| ("n", e))?;
        if self.points.is_empty() {
            return Err((
                "points",
                Error::InvalidInput("at least one point is required".into()),
            ));
        }
        if self.rotations.len() != self.points.len() {
            return Err((
                "rotations",
                Error::InvalidInput(format!(
                    "{} points but {} rotations",
                    self.points.len(),
                    self.rotations.len()
                )),
            ));
        }
        for (j, p) in self.points.iter().enumerate() {
            if p.len() != n {
                return Err((
                    "points",
                    Error::InvalidInput(format!(
                        "point {j} has {} coordinates, expected {n}",
                        p.len()
                    )),
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err((
                    "points",
                    Error::InvalidInput(format!("point {j} is not finite")),
                ));
            }
        }
        for a in 0..self.points.len() {
            for b in a + 1..self.points.len() {
                let d = (&self.points[a] - &self.points[b]).norm();
                if d <= tolerances::POINT_SEPARATION {
                    return Err((
                        "points",
                        Error::InvalidInput(format!(
                            "points {a} and {b} coincide (distance {d:e})"
                        )),
                    ));
                }
            }
        }
        for (j, r) in self.rotations.iter().enumerate() {
            if r.nrows() != n || r.ncols() != n {
                return Err((
                    "rotations",
                    Error::InvalidInput(format!(
                        "rotation {j} is {}x{}, expected {n}x{n}",
                        r.nrows(),
                        r.ncols()
                    )),
                ));
            }
            let defect = check_orthogonal(r);
            if !(defect < tolerances::ORTHOGONALITY) {
                return Err((
                    "rotations",
                    Error::InvalidInput(format!(
                        "rotation {j} is not orthogonal (defect {defect:e} > {:e})",
                        tolerances::ORTHOGONALITY
                    )),
                ));
            }
        }
        if self.a0.nrows() != n || self.a0.ncols() != n {
            return Err((
                "a0",
                Error::InvalidInput(format!(
                    "A0 is {}x{}, expected {n}x{n}",
                    self.a0.nrows(),
                    self.a0.ncols()
                )),
            ));
        }
        if self.a0.iter().any(|v| !v.is_finite()) {
            return Err(("a0", Error::InvalidInput("A0 is not finite".into())));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err((
                "epsilon",
                Error::InvalidInput(format!("epsilon = {} must be positive", self.epsilon)),
            ));
        }
        if !(self.rho_star > 0.0 && self.rho_star.is_finite()) {
            return Err((
                "rho_star",
                Error::InvalidInput(format!("rho_star = {} must be positive", self.rho_star)),
            ));
        }
        if self.options.quadrature_nodes == 0 {
            return Err((
                "quadrature_nodes",
                Error::InvalidInput("quadrature_nodes must be positive".into()),
            ));
        }
        if let Some(h) = self.options.grid_h {
            if !(h > 0.0 && h.is_finite()) {
                return Err((
                    "grid_h",
                    Error::InvalidInput(format!("grid_h = {h} must be positive")),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json_str(src: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(src).map_err(|e| Error::Config {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let cfg = raw
            .clone()
            .into_config()
            .map_err(|(key, e)| Error::Config {
                line: line_of_key(src, key),
                msg: e.to_string(),
            })?;
        cfg.validate().map_err(|(key, e)| Error::Config {
            line: line_of_key(src, key),
            msg: match e {
                Error::InvalidInput(m) => m,
                other => other.to_string(),
            },
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&src)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawConfig::from_config(self)).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let canonical =
            serde_json::to_string(&RawConfig::from_config(self)).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// n = 3, x = ±e₁, R₁ = I, R₂ the quarter turn about e₁, A₀ = I.
    pub fn flagship() -> Self {
        let r2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        Self::new(
            3,
            vec![
                DVector::from_vec(vec![1.0, 0.0, 0.0]),
                DVector::from_vec(vec![-1.0, 0.0, 0.0]),
            ],
            vec![DMatrix::identity(3, 3), r2],
            DMatrix::identity(3, 3),
            1e-4,
            0.5,
        )
        .expect("flagship configuration is valid")
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut c = self.clone();
        c.epsilon = epsilon;
        c.validate().map_err(|(_, e)| e)?;
        Ok(c)
    }

    pub fn with_a0(&self, a0: DMatrix<f64>) -> Result<Self> {
        let mut c = self.clone();
        c.a0 = a0;
        c.validate().map_err(|(_, e)| e)?;
        Ok(c)
    }

    pub fn min_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for a in 0..self.k() {
            for b in a + 1..self.k() {
                let d = (&self.points[a] - &self.points[b]).norm();
                best = Some(best.map_or(d, |v: f64| v.min(d)));
            }
        }
        best
    }

    /// Largest ρ₀ with disjoint balls B(x_j, ρ₀) inside B(0, 1/ρ₀).
    pub fn rho0(&self) -> f64 {
        let m = self.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        let inside = 0.5 * (-m + (m * m + 4.0).sqrt());
        match self.min_distance() {
            Some(d) => inside.min(0.5 * d),
            None => inside,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixInput {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

impl MatrixInput {
    fn to_matrix(&self, n: usize, what: &str) -> std::result::Result<DMatrix<f64>, Error> {
        match self {
            MatrixInput::Flat(v) => {
                if v.len() != n * n {
                    return Err(Error::InvalidInput(format!(
                        "{what} has {} entries, expected {} (row-major {n}x{n})",
                        v.len(),
                        n * n
                    )));
                }
                Ok(DMatrix::from_row_slice(n, n, v))
            }
            MatrixInput::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidInput(format!("{what} is not {n}x{n}")));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Ok(DMatrix::from_row_slice(n, n, &flat))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: usize,
    points: Vec<Vec<f64>>,
    rotations: Vec<MatrixInput>,
    a0: MatrixInput,
    epsilon: f64,
    rho_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quadrature_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sh_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl RawConfig {
    fn into_config(self) -> std::result::Result<Configuration, (&'static str, Error)> {
        let n = self.n;
        ensure_dim(n).map_err(|e| ("n", e))?;
        let rotations = self
            .rotations
            .iter()
            .enumerate()
            .map(|(j, m)| m.to_matrix(n, &format!("rotation {j}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| ("rotations", e))?;
        let a0 = self.a0.to_matrix(n, "A0").map_err(|e| ("a0", e))?;
        let defaults = RunOptions::default();
        Ok(Configuration {
            n,
            points: self.points.into_iter().map(DVector::from_vec).collect(),
            rotations,
            a0,
            epsilon: self.epsilon,
            rho_star: self.rho_star,
            options: RunOptions {
                quadrature_nodes: self.quadrature_nodes.unwrap_or(defaults.quadrature_nodes),
                grid_h: self.grid_h,
                sh_degree: self.sh_degree.unwrap_or(defaults.sh_degree),
                seed: self.seed.unwrap_or(defaults.seed),
            },
        })
    }

    fn from_config(c: &Configuration) -> Self {
        let rows = |m: &DMatrix<f64>| {
            MatrixInput::Rows(
                (0..m.nrows())
                    .map(|r| m.row(r).iter().copied().collect())
                    .collect(),
            )
        };
        let defaults = RunOptions::default();
        Self {
            n: c.n,
            points: c
                .points
                .iter()
                .map(|p| p.iter().copied().collect())
                .collect(),
            rotations: c.rotations.iter().map(rows).collect(),
            a0: rows(&c.a0),
            epsilon: c.epsilon,
            rho_star: c.rho_star,
            quadrature_nodes: (c.options.quadrature_nodes != defaults.quadrature_nodes)
                .then_some(c.options.quadrature_nodes),
            grid_h: c.options.grid_h,
            sh_degree: (c.options.sh_degree != defaults.sh_degree).then_some(c.options.sh_degree),
            seed: (c.options.seed != defaults.seed).then_some(c.options.seed),
        }
    }
}

/// 1-based line of the first occurrence of `"key"`, or 1.
fn line_of_key(src: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    src.lines()
        .position(|l| l.contains(&needle))
        .map_or(1, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAGSHIP: &str = r#"{
  "n": 3,
  "points": [[1, 0, 0], [-1, 0, 0]],
  "rotations": [
    [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    [1, 0, 0, 0, 0, -1, 0, 1, 0]
  ],
  "a0": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
  "epsilon": 1e-4,
  "rho_star": 0.5
}"#;

    #[test]
    fn parses_both_matrix_layouts() {
        let c = Configuration::from_json_str(FLAGSHIP).unwrap();
        assert_eq!((c.n, c.k()), (3, 2));
        assert_eq!(c.rotations[1], Configuration::flagship().rotations[1]);
        assert_eq!(c.digest(), Configuration::flagship().digest());
    }

    #[test]
    fn rejects_bad_rotation_with_defect_and_line() {
        let src = FLAGSHIP.replace(
            "[1, 0, 0, 0, 0, -1, 0, 1, 0]",
            "[1.001, 0, 0, 0, 0, -1, 0, 1, 0]",
        );
        match Configuration::from_json_str(&src) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 4);
                assert!(
                    msg.contains("rotation 1") && msg.contains("defect"),
                    "{msg}"
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_shapes() {
        let src = FLAGSHIP.replace("[-1, 0, 0]]", "[1, 0, 0]]");
        let e = Configuration::from_json_str(&src).unwrap_err().to_string();
        assert!(e.contains("points 0 and 1"), "{e}");
        let src = FLAGSHIP.replace(
            "\"a0\": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]",
            "\"a0\": [[1, 0], [0, 1]]",
        );
        let e = Configuration::from_json_str(&src).unwrap_err().to_string();
        assert!(e.contains("A0"), "{e}");
        let src = FLAGSHIP.replace("1e-4", "1e-4x");
        assert!(matches!(
            Configuration::from_json_str(&src),
            Err(Error::Config { line: 9, .. })
        ));
    }

    #[test]
    fn rho0_for_flagship() {
        let c = Configuration::flagship();
        let r = c.rho0();
        assert!((r * (1.0 + r) - 1.0).abs() < 1e-14);
    }
}
