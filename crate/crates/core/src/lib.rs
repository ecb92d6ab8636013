//! Random permutations from stick-breaking partitions of the unit interval.
//!
//! The crate builds the cycle partition of such a permutation three
//! equivalent ways (decrement Markov chain, occupancy-scheme thinning, and
//! the interval construction), computes exact order/product statistics with
//! their prime-power gap identity, derives the centering and scaling
//! sequences of the associated limit theorems (normal and stable regimes),
//! simulates the underlying perturbed random walks, and drives reproducible
//! seeded experiments with CSV output.

pub mod cycle_stats;
pub mod error;
pub mod experiment;
pub mod factor;
pub mod limits;
pub mod numeric;
pub mod partition;
pub mod quad;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
pub use factor::{FactorModel, Moment, MomentSummary};
pub use limits::CaseTag;
pub use partition::CyclePartition;
