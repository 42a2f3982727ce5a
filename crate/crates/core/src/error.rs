use thiserror::Error;

use crate::flow::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("flow integration produced a non-finite state at t = {time} (last valid state {last_valid:?})")]
    IntegrationFailure { time: f64, last_valid: Point },

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Point),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error in `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("failed to parse configuration: {0}")]
    Parse(String),

    #[error("characteristic {index} has a single node; the generator needs at least two")]
    DegenerateGrid { index: usize },

    #[error("grid has no boundary characteristics, so the {0} trace is empty")]
    EmptyTrace(&'static str),

    #[error("mollifier support 1/{n} is shorter than the grid step {ds}")]
    Resolution { n: usize, ds: f64 },

    #[error("time {t} is not a multiple of the grid step {ds}")]
    NotAligned { t: f64, ds: f64 },

    #[error("truncation criterion violated: estimated limsup |||H chi_delta||| = {c} >= 1")]
    CriterionViolated { c: f64 },

    #[error("no contractive certificate for lambda = {lambda}; measured contraction ratio {rho}")]
    Divergence { lambda: f64, rho: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
