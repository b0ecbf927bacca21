//! Numerical toolkit for desingularizing unions of n-planes in C^n by
//! Lawlor necks: the interaction system Γα = Λ and hypotheses H1–H3, neck
//! geometry and its Jacobi fields, mode-by-mode spectral checks, the
//! Green's-function outer graph, sphere Dirichlet-to-Neumann matching in
//! dimension 3, and assembly of the leading-order glued surface.

pub mod app;
pub mod config;
pub mod error;
pub mod export;
pub mod geometry;
pub mod glue;
pub mod green;
pub mod harmonics;
pub mod interaction;
pub mod jacobi;
pub mod matching;
pub mod neck;
pub mod ode;
pub mod par;
pub mod quadrature;
pub mod report;
pub mod spectrum;
pub mod tolerances;

pub use config::Configuration;
pub use error::{Error, Result};
