//! Desk-scale environments and the noisy-action wrapper.
//!
//! All environments share the [`Environment`] step contract: actions are
//! real vectors (discrete environments read the first component as an
//! index), out-of-range actions are clipped and flagged, and stepping a
//! finished episode without a reset is a state error.

mod grid;
mod noisy;
mod particle;
mod point_mass;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{BeeError, Result};

pub use grid::{GridMaze, MazeLayout, DEFAULT_MAZE};
pub use noisy::{noisy_wrap, NoisyAction};
pub use particle::{particle_oracle_q, particle_oracle_with, ANGLE_BINS, ParticleGrid, ParticleHole, ParticleOracle, ParticleParams};
pub use point_mass::{PointMass, PointMassParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    GridMaze,
    ParticleHole,
    PointMass,
}

impl FromStr for EnvKind {
    type Err = BeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid_maze" => Ok(EnvKind::GridMaze),
            "particle_hole" => Ok(EnvKind::ParticleHole),
            "point_mass" => Ok(EnvKind::PointMass),
            other => Err(BeeError::arg(format!("unknown environment kind `{other}`"))),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::GridMaze => "grid_maze",
            EnvKind::ParticleHole => "particle_hole",
            EnvKind::PointMass => "point_mass",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    Dense,
    Sparse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete(usize),
    Box { low: Vec<f64>, high: Vec<f64> },
}

impl ActionSpace {
    /// Length of the action vector the environment expects.
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Discrete(_) => 1,
            ActionSpace::Box { low, .. } => low.len(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete(_))
    }

    /// Clips `action` into the space; the flag reports whether anything moved.
    pub fn clip(&self, action: &[f64]) -> (Vec<f64>, bool) {
        match self {
            ActionSpace::Discrete(n) => {
                let raw = action.first().copied().unwrap_or(0.0);
                let idx = if raw.is_finite() { raw.round().clamp(0.0, (*n - 1) as f64) } else { 0.0 };
                (vec![idx], idx != raw)
            }
            ActionSpace::Box { low, high } => {
                let mut clipped = false;
                let out = low
                    .iter()
                    .zip(high)
                    .enumerate()
                    .map(|(i, (&lo, &hi))| {
                        let raw = action.get(i).copied().unwrap_or(0.0);
                        let raw = if raw.is_finite() { raw } else { 0.0 };
                        let v = raw.clamp(lo, hi);
                        clipped |= v != raw || action.get(i).is_none_or(|a| !a.is_finite());
                        v
                    })
                    .collect();
                (out, clipped || action.len() != low.len())
            }
        }
    }

    /// Maps a normalised action in [-1, 1]^d onto a box space.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        match self {
            ActionSpace::Discrete(_) => unit.to_vec(),
            ActionSpace::Box { low, high } => low
                .iter()
                .zip(high)
                .zip(unit)
                .map(|((lo, hi), u)| lo + (u.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo))
                .collect(),
        }
    }
}

/// Environment description; the variant parameters for all kinds live side
/// by side and only the one matching `kind` is read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub horizon: usize,
    #[serde(default)]
    pub reward_mode: RewardMode,
    /// Maze text for `grid_maze`; the built-in layout when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maze: Option<String>,
    #[serde(default)]
    pub particle: ParticleParams,
    #[serde(default)]
    pub point_mass: PointMassParams,
}

impl EnvSpec {
    pub fn grid_maze() -> Self {
        Self::with_kind(EnvKind::GridMaze, 100, RewardMode::Sparse)
    }

    pub fn particle_hole() -> Self {
        Self::with_kind(EnvKind::ParticleHole, 200, RewardMode::Sparse)
    }

    pub fn point_mass(reward_mode: RewardMode) -> Self {
        Self::with_kind(EnvKind::PointMass, 200, reward_mode)
    }

    fn with_kind(kind: EnvKind, horizon: usize, reward_mode: RewardMode) -> Self {
        Self {
            kind,
            horizon,
            reward_mode,
            maze: None,
            particle: ParticleParams::default(),
            point_mass: PointMassParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(BeeError::arg("horizon must be at least 1"));
        }
        if let ActionSpace::Box { low, high } = self.action_space() {
            if low.iter().zip(&high).any(|(l, h)| !(l < h)) {
                return Err(BeeError::arg("box bounds need low < high in every dimension"));
            }
        }
        match self.kind {
            EnvKind::GridMaze => self.layout().map(|_| ()),
            EnvKind::ParticleHole => self.particle.validate(),
            EnvKind::PointMass => self.point_mass.validate(),
        }
    }

    pub fn layout(&self) -> Result<MazeLayout> {
        MazeLayout::parse(self.maze.as_deref().unwrap_or(DEFAULT_MAZE))
    }

    pub fn action_space(&self) -> ActionSpace {
        match self.kind {
            EnvKind::GridMaze => ActionSpace::Discrete(4),
            EnvKind::ParticleHole => ActionSpace::Box {
                low: vec![-std::f64::consts::PI],
                high: vec![std::f64::consts::PI],
            },
            EnvKind::PointMass => ActionSpace::Box {
                low: vec![-1.0; 2],
                high: vec![1.0; 2],
            },
        }
    }

    pub fn observation_dim(&self) -> usize {
        match self.kind {
            EnvKind::GridMaze | EnvKind::ParticleHole => 2,
            EnvKind::PointMass => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub success: bool,
    /// The action the dynamics actually executed, after clipping.
    pub applied_action: Vec<f64>,
    pub action_clipped: bool,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns the first observation.
    fn reset(&mut self) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    /// Full simulator state (equal to the observation for every built-in env).
    fn state(&self) -> Vec<f64>;

    /// Places the simulator in `state` and starts a fresh episode from it.
    fn set_state(&mut self, _state: &[f64]) -> Result<()> {
        Err(BeeError::Capability("state injection".into()))
    }

    /// Analytic termination predicate on an observation, used to end model
    /// rollouts.
    fn is_terminal_observation(&self, observation: &[f64]) -> bool;

    /// Bounds of every observation component.
    fn observation_bounds(&self) -> (Vec<f64>, Vec<f64>);

    fn action_space(&self) -> ActionSpace {
        self.spec().action_space()
    }
}

/// Episode bookkeeping shared by the built-in environments.
#[derive(Clone, Debug, Default)]
pub(crate) struct EpisodeClock {
    pub elapsed: usize,
    pub done: bool,
}

impl EpisodeClock {
    pub fn restart(&mut self) {
        self.elapsed = 0;
        self.done = false;
    }

    pub fn begin_step(&self) -> Result<()> {
        if self.done {
            return Err(BeeError::state("step called on a finished episode; call reset first"));
        }
        Ok(())
    }

    /// Advances the clock and returns the truncation flag.
    pub fn end_step(&mut self, terminated: bool, horizon: usize) -> bool {
        self.elapsed += 1;
        let truncated = !terminated && self.elapsed >= horizon;
        self.done = terminated || truncated;
        truncated
    }
}

pub fn make_env(spec: &EnvSpec, seed: u64) -> Result<Box<dyn Environment>> {
    spec.validate()?;
    Ok(match spec.kind {
        EnvKind::GridMaze => Box::new(GridMaze::new(spec.clone())?),
        EnvKind::ParticleHole => Box::new(ParticleHole::new(spec.clone(), seed)?),
        EnvKind::PointMass => Box::new(PointMass::new(spec.clone(), seed)?),
    })
}
