//! Default thresholds. Every pass/fail flag in a report compares a measured
//! value against one of these unless a flag overrides it.

/// Orthogonality defect max|RᵀR − I| accepted for rotations.
pub const ORTHOGONALITY: f64 = 1e-10;
/// Minimum pairwise distance between marked points.
pub const POINT_SEPARATION: f64 = 1e-9;
/// H1: singular values below this fraction of σ_max are treated as zero.
pub const H1_RANK_CUT: f64 = 1e-10;
/// H1: ξ counts as outside the image when its residual exceeds this.
pub const H1_RESIDUAL: f64 = 1e-8;
/// H2: Γ counts as invertible when σ_min/σ_max exceeds this.
pub const H2_RCOND: f64 = 1e-10;
/// Relative residual |Γα − Λ| / |Λ| accepted after the solve.
pub const SOLVE_RESIDUAL: f64 = 1e-10;
/// Symmetry defect accepted for Jacobi-field matrix arguments.
pub const MATRIX_SYMMETRY: f64 = 1e-10;

/// Runge–Kutta relative and absolute tolerance.
pub const RK_TOL: f64 = 1e-10;
/// Largest Runge–Kutta step.
pub const RK_MAX_STEP: f64 = 1e-2;
/// |a| + |b| above this is reported as blow-up.
pub const BLOWUP: f64 = 1e12;
/// Minimum number of samples in a decay-rate fit window.
pub const DECAY_FIT_MIN_POINTS: usize = 50;

/// Column-scaled condition number above which a probe fit is rejected.
pub const FIT_CONDITION: f64 = 1e8;
/// Green's function evaluation refuses points this close to a pole.
pub const SINGULAR_DISTANCE: f64 = 1e-12;
/// Largest probe radius used by the balancing check.
pub const PROBE_RADIUS: f64 = 1e-3;
/// Balancing residual accepted at α = Γ⁻¹Λ.
pub const BALANCE: f64 = 1e-8;

/// Gauss–Legendre nodes per hyperspherical angle.
pub const QUADRATURE_NODES: usize = 32;
/// Monte-Carlo sample count used above n = 4.
pub const MC_SAMPLES: usize = 1_000_000;
/// Default spherical-harmonic truncation degree.
pub const SH_DEGREE: usize = 8;
/// Largest spherical-harmonic degree accepted by the matching solver.
pub const SH_DEGREE_MAX: usize = 64;
