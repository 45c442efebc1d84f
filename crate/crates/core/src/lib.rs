//! Blended Exploitation and Exploration (BEE) laboratory.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: explicit finite MDPs, policies and oracle solvers.
//! - [`bee`]: exact exploitation / exploration / blended backups and the
//!   evaluation, improvement and iteration procedures built on them.
//! - [`env`]: desk-scale environments (grid maze, random-walk particle,
//!   point mass) and the noisy-action wrapper.
//! - [`replay`]: ring-buffer transition store.
//! - [`nn`]: dense networks with exact reverse-mode gradients, Adam, Polyak
//!   averaging and the tanh-squashed Gaussian policy head.
//! - [`bac`]: the deep blended actor-critic agent.
//! - [`mb`]: the Dyna-style model-based extension.
//! - [`diagnostics`]: Monte-Carlo Q oracles, estimation gaps and the
//!   under-exploitation metric.
//! - [`harness`]: experiment configuration, scenarios, CSV/heatmap output and
//!   the tabular comparison studies.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bac;
pub mod bee;
pub mod diagnostics;
pub mod env;
mod error;
pub mod harness;
pub mod mb;
pub mod mdp;
pub mod nn;
pub mod replay;
pub mod rng;

pub use error::{BeeError, Result};

pub use bac::{BacAgent, BacConfig, ExploreVariant, LambdaMode, ValueLoss};
pub use bee::BlendConfig;
pub use diagnostics::RunRecord;
pub use env::{EnvKind, EnvSpec, Environment, RewardMode, StepResult};
pub use mb::{DynamicsEnsemble, MbConfig};
pub use mdp::{MixturePolicy, QTable, TabularMdp, TabularPolicy, ValueTable};
pub use nn::{NetParams, NetSpec, OptimState};
pub use replay::{ReplayBuffer, Transition};
pub use harness::{run_experiment, ExperimentConfig, Manifest, RunOptions, Scenario};
