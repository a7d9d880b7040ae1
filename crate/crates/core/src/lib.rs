//! Fountain-coded decentralized storage and doped belief-propagation
//! collection for circular squad sensor networks.
//!
//! The crate is split along the pipeline a collector sees:
//!
//! * [`degree`]: code-symbol degree distributions (Ideal/Robust Soliton) and
//!   the Poisson helpers used by the ripple model.
//! * [`codec`]: XOR encoding and the peeling decoder with degree-two doping.
//! * [`network`]: the relay ring, dissemination schedules, squad storage and
//!   supersquad collection.
//! * [`analytics`]: degree evolution, the ripple random walk, interdoping
//!   yield distributions and the expected-doping prediction.
//! * [`cost`]: per-packet collection cost of the competing strategies.
//!
//! All randomness is driven by caller-supplied generators; [`rng`] provides
//! the seeded per-trial streams used by the experiment harness.

pub mod analytics;
pub mod codec;
pub mod cost;
pub mod degree;
mod error;
pub mod network;
pub mod rng;

pub use error::{Error, Result};
