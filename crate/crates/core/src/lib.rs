//! Constructive Sobolev extension toolkit.
//!
//! The pipeline: decompose the complement of a boundary set into Whitney
//! cubes, reflect exterior cubes onto interior ones through quasihyperbolic
//! chains, fit local polynomials, and glue them with a partition of unity
//! into an extension operator for Sobolev functions that vanish on the
//! Dirichlet part of the boundary. Everything is instrumented so that the
//! geometric constants the construction depends on can be measured and
//! checked on concrete 2D domains.

pub mod certify;
pub mod cube;
pub mod extend;
pub mod geometry;
pub mod harness;
pub mod polyfit;
pub mod qhmetric;
pub mod reflect;
pub mod util;
pub mod whitney;

pub use cube::DyadicCube;
pub use geometry::{BoxRegion, BuiltinDomain, DomainSpec, PointClass};
pub use whitney::{CubeQuery, WhitneyDecomposition};


/// Tolerance for boundary classification with analytic oracles.
pub const TOL_B: f64 = 1e-9;

/// Errors shared across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum SobexError {
    #[error("window too coarse: no dyadic root cell fits the window {0}")]
    WindowTooCoarse(String),
    #[error("query point {0:?} lies outside the window")]
    OutsideWindow(Vec<f64>),
    #[error("query point {0:?} lies in the unresolved shell; deepen max_level")]
    Unresolved(Vec<f64>),
    #[error("query point {0:?} lies on the Neumann boundary set")]
    PointOnGamma(Vec<f64>),
    #[error("domain file error: {0}")]
    DomainFile(String),
    #[error("reflection incomplete: {0} cube(s) without a reflected partner")]
    ReflectionIncomplete(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
