//! Experiment configuration: parsing, validation and hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::particle::ParticleOperator;
use crate::bac::BacConfig;
use crate::env::EnvSpec;
use crate::mb::MbConfig;
use crate::{BeeError, Result};

/// Environment variable naming the directory relative output paths live under.
pub const OUTPUT_ROOT_VAR: &str = "BEE_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(flatten)]
    pub spec: EnvSpec,
    /// Gaussian action noise added before the environment's own clipping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentConfig {
    Bac(BacConfig),
    Mb {
        #[serde(default)]
        bac: BacConfig,
        #[serde(default)]
        mb: MbConfig,
    },
}

impl AgentConfig {
    pub fn bac(&self) -> &BacConfig {
        match self {
            Self::Bac(c) => c,
            Self::Mb { bac, .. } => bac,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub total_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Buffer (s, a) pairs scored by Monte-Carlo rollouts at each evaluation;
    /// zero disables the estimation-gap columns.
    pub mc_pairs: usize,
    pub mc_rollouts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            total_steps: 10_000,
            eval_every: 1000,
            eval_episodes: 10,
            mc_pairs: 0,
            mc_rollouts: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    #[default]
    None,
    /// Adds the transitions of a replay dump to the buffer at `step`
    /// (0 means right after warm-up).
    SerendipityInjection { step: usize, trajectory_file: PathBuf },
    /// Reinitializes the policy, critics and value network at `step`.
    CounteractFailure { step: usize },
    OperatorComparisonGrid {
        #[serde(default = "default_grid_lambdas")]
        lambdas: Vec<f64>,
    },
    OperatorComparisonParticle {
        #[serde(default = "default_operators")]
        operators: Vec<ParticleOperator>,
        #[serde(default = "default_checkpoints")]
        checkpoints: Vec<usize>,
    },
}

fn default_grid_lambdas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

fn default_operators() -> Vec<ParticleOperator> {
    vec![ParticleOperator::Bee, ParticleOperator::Standard]
}

fn default_checkpoints() -> Vec<usize> {
    vec![100, 200, 500]
}

impl Scenario {
    pub fn trigger_step(&self) -> Option<usize> {
        match self {
            Self::SerendipityInjection { step, .. } | Self::CounteractFailure { step } => Some(*step),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub scenario: Scenario,
    pub output_dir: PathBuf,
}

fn collect(errs: &mut Vec<String>, prefix: &str, r: Result<()>) {
    match r {
        Ok(()) => {}
        Err(BeeError::Config(list)) => errs.extend(list.into_iter().map(|e| format!("{prefix}: {e}"))),
        Err(e) => errs.push(format!("{prefix}: {e}")),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        collect(&mut errs, "env", self.env.spec.validate());
        if let Some(sigma) = self.env.noise_sigma {
            if !(sigma >= 0.0) {
                errs.push("env.noise_sigma: must be non-negative".into());
            } else if sigma > 0.0 && self.env.spec.action_space().is_discrete() {
                errs.push("env.noise_sigma: action noise needs a continuous action space".into());
            }
        }
        let is_comparison = matches!(
            self.scenario,
            Scenario::OperatorComparisonGrid { .. } | Scenario::OperatorComparisonParticle { .. }
        );
        if !is_comparison && self.env.spec.action_space().is_discrete() {
            errs.push("env.kind: the learning agents need a continuous action space".into());
        }
        match &self.agent {
            AgentConfig::Bac(c) => collect(&mut errs, "agent", c.validate()),
            AgentConfig::Mb { bac, mb } => {
                collect(&mut errs, "agent.bac", bac.validate());
                collect(&mut errs, "agent.mb", mb.validate());
                if bac.lambda_mode != crate::bac::LambdaMode::Fixed {
                    errs.push("agent.bac.lambda_mode: model-based runs need lambda_mode fixed".into());
                }
            }
        }
        let run = &self.run;
        if run.seeds.is_empty() {
            errs.push("run.seeds: at least one seed is required".into());
        }
        if run.eval_every == 0 {
            errs.push("run.eval_every: must be at least 1".into());
        }
        if run.total_steps < run.eval_every {
            errs.push(format!(
                "run.total_steps: {} is smaller than eval_every {}",
                run.total_steps, run.eval_every
            ));
        }
        if run.eval_episodes == 0 {
            errs.push("run.eval_episodes: must be at least 1".into());
        }
        if run.mc_pairs > 0 && run.mc_rollouts == 0 {
            errs.push("run.mc_rollouts: must be positive when mc_pairs is set".into());
        }
        if let Some(step) = self.scenario.trigger_step() {
            if step > run.total_steps {
                errs.push(format!("scenario.step: {step} is beyond total_steps {}", run.total_steps));
            }
        }
        match &self.scenario {
            Scenario::SerendipityInjection { .. } if matches!(self.agent, AgentConfig::Mb { .. }) => {
                errs.push("scenario.kind: injection is only supported for the model-free agent".into());
            }
            Scenario::CounteractFailure { .. } if matches!(self.agent, AgentConfig::Mb { .. }) => {
                errs.push("scenario.kind: reinitialization is only supported for the model-free agent".into());
            }
            Scenario::OperatorComparisonGrid { lambdas } => {
                if lambdas.is_empty() || lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
                    errs.push("scenario.lambdas: need values in [0, 1]".into());
                }
            }
            Scenario::OperatorComparisonParticle { operators, checkpoints } => {
                if operators.is_empty() {
                    errs.push("scenario.operators: need at least one operator".into());
                }
                if checkpoints.is_empty() || checkpoints.contains(&0) {
                    errs.push("scenario.checkpoints: need positive iteration counts".into());
                }
            }
            _ => {}
        }
        if self.output_dir.as_os_str().is_empty() {
            errs.push("output_dir: must not be empty".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(BeeError::Config(errs))
        }
    }

    /// Hex SHA-256 of the canonical JSON form (defaults filled in).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `output_dir`, placed under `$BEE_OUTPUT_ROOT` when relative.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output(&self.output_dir)
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if dir.is_relative() => Path::new(&root).join(dir),
        _ => dir.to_path_buf(),
    }
}
