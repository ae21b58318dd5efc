//! Downlink simulation of RIS-aided massive MIMO with low-resolution DACs.
//!
//! The crate covers channel generation over a fixed geometry, MRT precoding
//! with additive quantization noise, Monte Carlo and closed-form ergodic
//! rates, and particle-swarm design of the RIS phase shifts.

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod phases;
pub mod precoding;
pub mod pso;
pub mod rate;
pub mod rng;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
pub use phases::{PhaseRegime, PhaseVector};
pub use precoding::DacBits;
pub use rate::{AnalyticRates, MomentModel, RateBreakdown};
