use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("quadratic coefficient {coef} on variable {var} must be nonnegative and finite")]
    NegativeQuadratic { var: usize, coef: f64 },
    #[error("quadratic objective terms must be lowered before solving")]
    QuadraticNotLowered,
    #[error("program contains cone blocks; the simplex handles linear programs only")]
    NotLinear,
    #[error("backend rejected the program: {0}")]
    Backend(String),
    #[error("relaxation at the root node is infeasible")]
    RootInfeasible,
    #[error("relaxation at the root node is unbounded")]
    RootUnbounded,
    #[error("relaxation solve failed with status {0:?}")]
    Relaxation(crate::Status),
    #[error("branch-and-bound node limit {0} reached")]
    NodeLimit(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
