//! Solver abstraction over the two convex problem classes the optimizers
//! need: linear-objective QCQPs with norm bounds (SCA subproblem) and
//! trace-constrained semidefinite programs (SDR subproblem).
//!
//! The bundled engine is Clarabel; problems are translated to conic form
//! (quadratic constraints to second-order cones via PSD factorization,
//! Hermitian SDPs via the real embedding) and every "optimal" point is
//! re-validated against the original constraints before it is reported.

mod dump;
mod qcqp;
mod sdp;

pub use dump::{dump_qcqp, dump_sdp};
pub use qcqp::{solve_qcqp, ConvexQuadraticProgram, LinearExpr, NormBound, QuadRep, QuadraticConstraint};
pub use sdp::{solve_sdp, SemidefiniteProgram, TraceConstraint};

/// Absolute feasibility tolerance (after scaling) for accepting a solution.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

/// Result of a conic solve: primal point, objective and the worst scaled
/// residual of the original (unlifted) constraints at that point.
#[derive(Debug, Clone)]
pub struct SolverOutcome<T> {
    pub status: SolveStatus,
    pub solution: Option<T>,
    pub objective: Option<f64>,
    pub max_residual: f64,
}

impl<T> SolverOutcome<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub(crate) fn status_only(status: SolveStatus) -> Self {
        Self { status, solution: None, objective: None, max_residual: f64::NAN }
    }
}
