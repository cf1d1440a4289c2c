//! Shortest path network interdiction by decomposition and refinement.
//!
//! The network is cut into small weakly connected blocks; each block
//! subproblem (fixed labels outside, free interdictions on arcs entering or
//! inside the block) is solved exactly or as a QUBO and the answers are
//! recombined into a global interdiction set. A greedy pass builds an
//! initial solution and a refinement loop improves it, reshuffling the
//! partition every iteration.

pub mod bench;
pub mod cli;
pub mod error;
pub mod graph;
pub mod instance;
pub mod partition;
pub mod qubo;
pub mod refine;
pub mod subsolvers;

pub use error::{Result, SpniError};
pub use graph::{
    all_labels, calc_length, calc_path, is_weakly_connected, ArcId, ArcSpec, InterdictionSet, Network,
    NodeId, PathLength, ProblemInstance,
};
pub use partition::{partition, Partitioning};
pub use refine::{initial_solution, refine, solve_spni, RefineConfig, RefineTrace};
pub use subsolvers::{solve_sub, SubSolverKind};
