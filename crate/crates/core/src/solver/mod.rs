//! Numerical kernels: a dense simplex LP solver, a projected-gradient convex
//! minimizer, and a brute-force grid oracle for cross-checking.

pub mod convex;
pub mod lp;
pub mod oracle;

pub use convex::{minimize_convex, Budget, ConvexProblem, ConvexSolution, FnObjective, Objective};
pub use lp::{solve_lp, Constraint, LpOutcome, LpProblem, Sense};
pub use oracle::{grid_oracle, GridPoint};
