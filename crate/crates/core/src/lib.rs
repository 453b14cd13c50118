//! Multi-modal agent-based transport simulator with ride-hailing rebalancing
//! strategies, a MADDPG rebalancing policy and resilience metrics.

pub mod demand;
pub mod engine;
pub mod error;
pub mod marl;
pub mod mfd;
pub mod network;
pub mod resilience;
pub mod ridehail;
pub mod rng;
pub mod strategies;
pub mod transit;
mod util;

pub use error::{Error, Result};
