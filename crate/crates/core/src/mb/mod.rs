//! Dyna-style extension: a Gaussian dynamics ensemble generates short
//! rollouts from real states. Exploitation targets use real data only and
//! exploration targets use the model data.

mod ensemble;
mod run;

use serde::{Deserialize, Serialize};

use crate::{BeeError, Result};

pub use ensemble::{DynamicsEnsemble, EnsembleSpec};
pub use run::MbRun;

/// Rollout length grows linearly from `min_length` at `start_epoch` to
/// `max_length` at `end_epoch`, clamped outside that window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutSchedule {
    pub min_length: usize,
    pub max_length: usize,
    pub start_epoch: usize,
    pub end_epoch: usize,
}

impl Default for RolloutSchedule {
    fn default() -> Self {
        Self {
            min_length: 1,
            max_length: 15,
            start_epoch: 20,
            end_epoch: 100,
        }
    }
}

impl RolloutSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.start_epoch >= self.end_epoch || self.min_length > self.max_length || self.min_length == 0 {
            return Err(BeeError::arg(
                "rollout schedule needs start_epoch < end_epoch and 1 <= min_length <= max_length",
            ));
        }
        Ok(())
    }

    /// Rollout length at `epoch`, rounded down.
    pub fn length(&self, epoch: usize) -> usize {
        let (x, y) = (self.min_length as f64, self.max_length as f64);
        let (a, b) = (self.start_epoch as f64, self.end_epoch as f64);
        let raw = x + (epoch as f64 - a) / (b - a) * (y - x);
        raw.max(x).min(y).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MbConfig {
    pub k_ensemble: usize,
    pub rollout_schedule: RolloutSchedule,
    /// Model rollouts started at the beginning of every epoch.
    pub rollouts_per_update: usize,
    /// Passes over the real data per ensemble retraining.
    pub model_train_epochs: usize,
    /// Real environment steps (each followed by one agent update) per epoch.
    pub steps_per_epoch: usize,
    pub model_hidden: Vec<usize>,
    pub model_lr: f64,
    pub model_batch: usize,
    pub real_capacity: usize,
    pub model_capacity: usize,
}

impl Default for MbConfig {
    fn default() -> Self {
        Self {
            k_ensemble: 5,
            rollout_schedule: RolloutSchedule::default(),
            rollouts_per_update: 400,
            model_train_epochs: 5,
            steps_per_epoch: 1000,
            model_hidden: vec![128, 128],
            model_lr: 1e-3,
            model_batch: 256,
            real_capacity: 1_000_000,
            model_capacity: 400_000,
        }
    }
}

impl MbConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.k_ensemble < 2 {
            errs.push("k_ensemble must be at least 2".to_string());
        }
        if let Err(e) = self.rollout_schedule.validate() {
            errs.push(e.to_string());
        }
        if self.rollouts_per_update == 0 || self.steps_per_epoch == 0 || self.model_train_epochs == 0 {
            errs.push("rollouts_per_update, steps_per_epoch and model_train_epochs must be positive".into());
        }
        if self.model_hidden.is_empty() || self.model_hidden.contains(&0) {
            errs.push("model_hidden needs at least one positive width".into());
        }
        if !(self.model_lr > 0.0) || self.model_batch == 0 {
            errs.push("model_lr and model_batch must be positive".into());
        }
        if self.real_capacity == 0 || self.model_capacity == 0 {
            errs.push("buffer capacities must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(BeeError::Config(errs))
        }
    }
}
