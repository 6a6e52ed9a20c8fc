//! Action-robust and antifragile reinforcement learning for UAV deconfliction
//! under observation-space attacks.
//!
//! The crate bundles:
//! - a small differentiable dense-network core ([`diffnet`]),
//! - a 3D UAV deconfliction environment driven by interfered fluid dynamics
//!   ([`env`]),
//! - replay/DDPG/action-robust training with Langevin-noise updates
//!   ([`robust`]),
//! - gradient-based observation attacks ([`attack`]),
//! - a Wasserstein-1 TD-error forgetting metric ([`forgetting`]),
//! - curriculum-guided critic adaptation ([`adapt`]),
//! - benchmark baselines ([`baselines`]) and the experiment harness
//!   ([`harness`]) behind the `uav-rl` CLI.

pub mod adapt;
pub mod attack;
pub mod baselines;
pub mod diffnet;
pub mod env;
pub mod error;
pub mod forgetting;
pub mod harness;
pub mod replay;
pub mod robust;
pub mod sgld;

pub use error::{Error, Result};
