//! Geometric entanglement of translation-invariant Gaussian chains split into
//! N equal blocks.
//!
//! The pipeline is [`models`] (sector matrices ω_η) → [`solver`] (optimal
//! product state ω_op) → [`entanglement`] (E_η in bits) → [`analysis`]
//! (block-size sweeps and the κ* fit). [`oracle`] holds bipartite reference
//! computations that do not go through the solver.

pub mod analysis;
pub mod entanglement;
pub mod error;
pub mod exec;
pub mod kernels;
pub mod models;
pub mod oracle;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use exec::Execution;
pub use kernels::{ComplexMatrix, C64};
pub use models::{Boundary, ChainSpec, PartitionSpec, Statistics};
