//! Local average consensus on one-dimensional sensor chains.
//!
//! Sensors exchange values only with their two immediate neighbors, one hop
//! per synchronous round. The crate runs the distributed update schemes under
//! a harness that logs every message, evaluates the same targets directly
//! from their closed forms, and provides the frequency-response, noise and
//! random-spacing analysis used to characterise them.

pub mod acceptance;
pub mod algorithm;
pub mod analysis;
pub mod arbitrary;
pub mod chain;
pub mod dynamic;
pub mod error;
pub mod export;
pub mod field;
pub mod figures;
pub mod harness;
pub mod oracle;
pub mod spacing;
pub mod static_consensus;

pub use algorithm::AlgorithmSpec;
pub use chain::{Boundary, ChainConfig};
pub use error::{Error, Result};
pub use field::{FieldKind, MeasurementField, NoiseDistribution, NoiseSpec};
pub use harness::{audit_locality, run, ConsensusTrace};
pub use static_consensus::Rho;
