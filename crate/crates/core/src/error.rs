use thiserror::Error;

/// Failure modes of the numerical routines.
///
/// Every variant carries the measured quantity that tripped the check so
/// callers can report it or retry with a larger truncation/grid.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Fock truncation too small: tail mass {tail_mass:e} exceeds {limit:e} at dim {dim}")]
    Truncation { tail_mass: f64, limit: f64, dim: usize },

    #[error("Fock index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },

    #[error("quadrature did not converge: {what} (last change {change:e})")]
    Quadrature { what: &'static str, change: f64 },

    #[error("grid too coarse: {what} (discrepancy {discrepancy:e})")]
    GridResolution { what: &'static str, discrepancy: f64 },

    #[error("sampling grid holds only {mass} of the probability mass")]
    Sampling { mass: f64 },

    #[error("outcome density {density:e} below conditioning threshold {threshold:e}")]
    Conditioning { density: f64, threshold: f64 },

    #[error("grid does not contain the state: {what}")]
    GridExtent { what: String },

    #[error("wave function reached the grid boundary at step {step}: edge mass {edge_mass:e}")]
    BoundaryLeak { step: usize, edge_mass: f64 },

    #[error("Fock projection leaked {leakage:e} (allowed {limit:e}) with dim {dim}")]
    Leakage { leakage: f64, limit: f64, dim: usize },

    #[error("dimension {dim} exceeds the limit {max} for {what}")]
    Dimension { dim: usize, max: usize, what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
