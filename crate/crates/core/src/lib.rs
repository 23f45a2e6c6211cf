//! Multiway cut under `l_p` and general monotonic-norm objectives.
//!
//! The solver follows a covering / uncrossing / aggregation pipeline on top of
//! a pluggable Unbalanced Terminal Cut backend. Brute-force oracles and the
//! small-set vertex expansion reduction live alongside it for verification.

pub mod covering;
pub mod error;
pub mod format;
pub mod generate;
pub mod graph;
pub mod invariant;
pub mod norms;
pub mod oracle;
pub mod partitioning;
pub mod reduction;
pub mod report;
pub mod utc;

pub use error::{Error, Result};
pub use graph::{CutVector, Partition, TerminalSet, VertexSet, WeightedGraph, INFINITE};
pub use norms::{Bipartite, NormKind, NormSpec};
pub use partitioning::{Outcome, PipelineConfig, Variant};
pub use utc::{UtcBackend, UtcSelect};
