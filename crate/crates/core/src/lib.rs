//! Slice-aware RAN resource allocation: a seeded TDD cell simulator, an
//! SLA-driven reward, and a double deep Q-learning controller that picks the
//! per-frame PRB split and intra-slice scheduler.

pub mod action_space;
pub mod agent;
pub mod error;
pub mod harness;
pub mod policy;
pub mod ransim;
pub mod reward;
pub mod telemetry;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// Index of a UE in the simulator roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UeId(pub u32);

impl std::fmt::Display for UeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
