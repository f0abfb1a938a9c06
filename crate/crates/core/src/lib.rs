//! Planted k-densest sub-hypergraph recovery.
//!
//! A hidden set of `k` out of `p` nodes biases the weights of the `binom(k, d)`
//! hyperedges it spans; every one of the `binom(p, d)` hyperedge weights also
//! carries standard Gaussian noise. This crate generates such instances and
//! recovers the hidden set with approximate message passing (AMP), predicts AMP
//! with state evolution, solves small instances exactly, and evaluates the
//! statistical and computational thresholds of the model.

pub mod amp;
pub mod combinatorics;
pub mod coverage;
pub mod error;
pub mod exact;
pub mod exec;
pub mod instance;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod se;
pub mod stats;
pub mod sweep;
pub mod tensor;
pub mod thresholds;

pub use error::{Error, Result};
pub use exec::Exec;
pub use instance::{PlantedInstance, ProblemParams, SignalVector, Snr};
pub use tensor::{IndexTuple, NodeVector, SymTensor};
