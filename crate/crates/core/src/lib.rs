//! Memory-independent communication lower bounds for parallel matrix
//! multiplication, and the machinery to check that they are tight.
//!
//! - [`model`]: regimes, the lower bound, and the memory-dependent comparison.
//! - [`kkt`]: the underlying optimization problem, its closed-form optimum
//!   and an independent numeric oracle.
//! - [`grid`]: processor grids, their communication cost, and grid selection.
//! - [`sim`]: a message-counting simulation of the grid algorithm.
//! - [`projection`]: brute-force projection checks on tiny lattices.

pub mod error;
pub mod exact;
pub mod grid;
pub mod kkt;
pub mod model;
pub mod projection;
pub mod sim;

pub use error::{Error, Result};
pub use exact::Real;
pub use grid::{analytic_grid, comm_cost, exhaustive_grid, AnalyticGrid, CostBreakdown, GridChoice, ProcessorGrid};
pub use kkt::{analytic_solution, kkt_verify, numeric_minimize_oracle, quasiconvexity_check, OptProblem, OptSolution};
pub use model::{
    bound_dominance, classify_regime, lower_bound, square_bound, BoundReport, MachineModel, ProblemShape, Regime,
    RegimeTag,
};
pub use projection::{min_projection_sum, projections_of, SearchMode, WorkSet};
pub use sim::{build_machine, compare_to_prediction, run_algorithm, SimReport, VirtualMachine};
