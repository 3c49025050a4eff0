//! Frustration-free two-local projector chains: solution counting, exact
//! zero-energy construction, matrix product state ground-state search and a
//! dense reference diagonalizer.

pub mod chain;
pub mod container;
pub mod counting;
pub mod dense_oracle;
pub mod error;
pub mod exact_solver;
pub mod linalg;
pub mod mps;
pub mod projectors;

pub use chain::{ChainSpec, Field};
pub use container::{Container, ContainerKind};
pub use counting::{classify_regime, first_frustrated_length, solution_count_sequence, CountReport, Regime};
pub use error::{Error, Result};
pub use exact_solver::{propagate_solutions, SolutionStack, SolverOptions};
pub use linalg::C64;
pub use mps::{ground_search, ConvergenceRow, ConvergenceTrace, MpsState, StopRule, TauSchedule, TrotterOrder};
pub use projectors::{BondProjector, ProjectorChain};
