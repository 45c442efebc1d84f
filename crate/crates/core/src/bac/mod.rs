//! Blended actor-critic: twin critics trained toward a mix of an in-sample
//! exploitation target and an entropy-regularized exploration target.

mod agent;
mod lambda;
mod run;

use serde::{Deserialize, Serialize};

use crate::nn::Activation;
use crate::replay::DEFAULT_CAPACITY;
use crate::{BeeError, Result};

pub use agent::{BacAgent, Targets, UpdateStats};
pub use lambda::{ada_lambda, row_lambda, LambdaState, ADA_DECAY};
pub use run::{evaluate_policy, evaluate_policy_in, BacRun, EvalStats, STREAM_ACT, STREAM_BATCH, STREAM_ENV, STREAM_INIT, STREAM_NOISE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// The configured constant.
    #[default]
    Fixed,
    /// Per row, take whichever target is smaller.
    Min,
    /// Per row, take whichever target is larger.
    Max,
    /// Ratio of the current to the previous smoothed Bellman error.
    Ada,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueLoss {
    #[default]
    Expectile,
    SparseQ,
    ExponentialQ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExploreVariant {
    /// Stochastic policy with an entropy bonus.
    #[default]
    Entropy,
    /// Deterministic policy with clipped-noise target smoothing.
    TargetSmoothing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacConfig {
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    pub expectile_tau: f64,
    pub value_loss: ValueLoss,
    /// Temperature of the sparse and exponential value losses.
    pub value_alpha: f64,
    /// Entropy target; `None` means `-action_dim`.
    pub ent_target: Option<f64>,
    pub init_alpha: f64,
    pub auto_alpha: bool,
    pub lr: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub polyak_rho: f64,
    pub warmup_transitions: usize,
    pub double_q: bool,
    pub explore_variant: ExploreVariant,
    pub smoothing_sigma: f64,
    pub smoothing_clip: f64,
    /// Gaussian noise on the deterministic policy while collecting data.
    pub action_noise: f64,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub buffer_capacity: usize,
}

impl Default for BacConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            lambda_mode: LambdaMode::Fixed,
            expectile_tau: 0.7,
            value_loss: ValueLoss::Expectile,
            value_alpha: 2.0,
            ent_target: None,
            init_alpha: 1.0,
            auto_alpha: true,
            lr: 3e-4,
            batch_size: 256,
            gamma: 0.99,
            polyak_rho: 0.005,
            warmup_transitions: 1000,
            double_q: true,
            explore_variant: ExploreVariant::Entropy,
            smoothing_sigma: 0.2,
            smoothing_clip: 0.5,
            action_noise: 0.1,
            hidden_sizes: vec![256, 256],
            activation: Activation::Relu,
            buffer_capacity: DEFAULT_CAPACITY,
        }
    }
}

impl BacConfig {
    /// Every violated field, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.lambda) {
            errs.push(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.expectile_tau > 0.5 && self.expectile_tau < 1.0) {
            errs.push(format!("expectile_tau must lie in (0.5, 1), got {}", self.expectile_tau));
        }
        if !(self.value_alpha > 0.0) {
            errs.push("value_alpha must be positive".into());
        }
        if !(self.init_alpha > 0.0) {
            errs.push("init_alpha must be positive".into());
        }
        if !(self.lr > 0.0) {
            errs.push("lr must be positive".into());
        }
        if self.batch_size == 0 {
            errs.push("batch_size must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            errs.push(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.polyak_rho) {
            errs.push(format!("polyak_rho must lie in [0, 1], got {}", self.polyak_rho));
        }
        if self.warmup_transitions == 0 {
            errs.push("warmup_transitions must be at least 1".into());
        }
        if self.smoothing_sigma < 0.0 || self.smoothing_clip < 0.0 || self.action_noise < 0.0 {
            errs.push("smoothing and action noise scales must be non-negative".into());
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            errs.push("hidden_sizes needs at least one positive width".into());
        }
        if self.buffer_capacity == 0 {
            errs.push("buffer_capacity must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(BeeError::Config(errs))
        }
    }
}
