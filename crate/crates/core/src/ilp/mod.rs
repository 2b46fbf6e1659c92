//! Exact 0-1 integer programs used by the pipeline: duplicate-away rounding,
//! per-section patch clustering with a cardinality layer, and the refinement
//! knapsack. Problem sizes stay small at desk scale, so the assignment solver
//! is a deterministic branch-and-bound validated against exhaustive
//! enumeration instead of an external MILP dependency.

mod assignment;
mod knapsack;

pub use assignment::{
    solve_assignment, AssignmentIlp, Cardinality, Column, Coupling, IlpSolution, IlpStatus,
};
pub use knapsack::{solve_knapsack, KnapsackItem};
