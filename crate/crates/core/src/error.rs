use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension n = {0} is below the minimum of 2")]
    Dimension(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} = {value} is outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("finite-difference stencil at node {node:?} touches a masked or missing node")]
    Stencil { node: Vec<usize> },

    #[error("degenerate Jacobian at node {node:?}")]
    DegenerateJacobian { node: Vec<usize> },

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("neck too large for requested radius: r = {requested} is below the branch minimum {minimum}")]
    NeckTooLarge { requested: f64, minimum: f64 },

    #[error("matrix does not have the declared symmetry (defect {0:e})")]
    Symmetry(f64),

    #[error("ODE solution blew up at t = {t}")]
    BlowUp { t: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("ill-conditioned least-squares fit (condition number {0:e})")]
    IllConditioned(f64),

    #[error("evaluation point lies {0:e} from a singular point")]
    Singular(f64),

    #[error(
        "grid under-resolves degree {degree}: need at least {needed} nodes per angle, got {got}"
    )]
    UnderResolved {
        degree: usize,
        needed: usize,
        got: usize,
    },

    #[error("interaction matrix is singular (rcond {0:e})")]
    SingularGamma(f64),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Dimension(n))
    } else {
        Ok(())
    }
}
