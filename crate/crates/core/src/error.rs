use thiserror::Error;

use crate::decomp::SolveLog;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("mean {mean} and variance {variance} must both be positive")]
    BadMoments { mean: f64, variance: f64 },
    #[error("coefficient of variation {cv} is outside the attainable Weibull range [{lo}, {hi}]")]
    WeibullRange { cv: f64, lo: f64, hi: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue}")]
    NotPsd { eigenvalue: f64 },
    #[error("multiplier kappa = {0} must be nonnegative")]
    NegativeKappa(f64),
    #[error("Wasserstein order p = {0} must lie in [1, 2)")]
    RadiusOrder(f64),
    #[error("network error: {0}")]
    Network(String),
    #[error("model is infeasible: {0}")]
    Infeasible(String),
    #[error("{what} stopped after {iterations} iterations")]
    IterationLimit {
        what: &'static str,
        iterations: usize,
        log: Box<SolveLog>,
    },
    #[error("line tuple {0:?} is still violated after its exact form was added")]
    Stalled((usize, usize, usize, usize)),
    #[error("cross-validation failed at kappa = {kappa}: {message}")]
    CrossValidation {
        kappa: f64,
        message: String,
        /// `(kappa, score)` pairs finished before the failure.
        partial: Vec<(f64, f64)>,
    },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error(transparent)]
    Conic(#[from] windplan_conic::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
