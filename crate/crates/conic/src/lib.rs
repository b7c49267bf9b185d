//! Conic programs for small planning models.
//!
//! [`ConicProgram`] is the solver-agnostic representation. Continuous
//! relaxations go through [`solve_conic`], an interior-point backend with a
//! thin presolve; [`residuals`] re-checks any returned point independently of
//! the backend. [`simplex`] is a dense textbook simplex used as an oracle for
//! linear programs, and [`branch_and_bound`] handles integrality marks.

mod bnb;
mod error;
mod lower;
mod program;
mod residuals;
pub mod simplex;
mod solver;

pub use bnb::{branch_and_bound, BnbSettings, ConicRelaxation, IntegerSolution, RelaxationSolver};
pub use error::{Error, Result};
pub use lower::lower_quadratic_objective;
pub use program::{CanonicalProgram, ConicProgram, LinExpr, Row, Sense, SocBlock, VarId, Variable};
pub use residuals::{certificate_residual, residuals, Residuals};
pub use solver::{solve_conic, PrimalDualSolution, SolverSettings, Status};
