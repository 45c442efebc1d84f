use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvSpec, Environment, EpisodeClock, RewardMode, StepResult};
use crate::rng::{seeded, SeedRng};
use crate::{BeeError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointMassParams {
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub dt: f64,
    pub friction: f64,
    pub max_speed: f64,
    /// Half-width of the uniform start box around the origin.
    pub start_noise: f64,
}

impl Default for PointMassParams {
    fn default() -> Self {
        Self {
            goal: [0.5, 0.5],
            goal_radius: 0.1,
            dt: 0.05,
            friction: 0.1,
            max_speed: 2.0,
            start_noise: 0.1,
        }
    }
}

impl PointMassParams {
    pub fn validate(&self) -> Result<()> {
        let inside = self.goal.iter().all(|g| g.abs() <= 1.0);
        if !inside || self.goal_radius <= 0.0 || self.dt <= 0.0 || self.max_speed <= 0.0 {
            return Err(BeeError::arg("point mass needs a goal in [-1, 1]² and positive radius, dt and speed"));
        }
        if !(0.0..1.0).contains(&self.start_noise) || self.friction < 0.0 {
            return Err(BeeError::arg("point mass start noise must lie in [0, 1) and friction be non-negative"));
        }
        Ok(())
    }
}

/// 2-D point mass driven by a bounded force inside the box `[-1, 1]²`.
/// Observation is `[x, y, vx, vy]`; hitting a wall zeroes that velocity
/// component.
#[derive(Clone, Debug)]
pub struct PointMass {
    spec: EnvSpec,
    state: [f64; 4],
    rng: SeedRng,
    clock: EpisodeClock,
}

impl PointMass {
    pub fn new(spec: EnvSpec, seed: u64) -> Result<Self> {
        spec.point_mass.validate()?;
        let mut env = Self {
            spec,
            state: [0.0; 4],
            rng: seeded(seed),
            clock: EpisodeClock::default(),
        };
        env.reset();
        Ok(env)
    }

    fn goal_distance(&self, obs: &[f64]) -> f64 {
        let g = self.spec.point_mass.goal;
        (obs[0] - g[0]).hypot(obs[1] - g[1])
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        let w = self.spec.point_mass.start_noise;
        let (x, y) = if w > 0.0 {
            (self.rng.random_range(-w..w), self.rng.random_range(-w..w))
        } else {
            (0.0, 0.0)
        };
        self.state = [x, y, 0.0, 0.0];
        self.clock.restart();
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        self.clock.begin_step()?;
        let (applied, clipped) = self.action_space().clip(action);
        let p = &self.spec.point_mass;
        for d in 0..2 {
            let v = self.state[2 + d] + p.dt * (applied[d] - p.friction * self.state[2 + d]);
            let v = v.clamp(-p.max_speed, p.max_speed);
            let x = self.state[d] + p.dt * v;
            if x.abs() > 1.0 {
                self.state[d] = x.clamp(-1.0, 1.0);
                self.state[2 + d] = 0.0;
            } else {
                self.state[d] = x;
                self.state[2 + d] = v;
            }
        }
        let dist = self.goal_distance(&self.state);
        let success = dist <= p.goal_radius;
        let reward = match self.spec.reward_mode {
            RewardMode::Dense => -dist,
            RewardMode::Sparse => f64::from(u8::from(success)),
        };
        let truncated = self.clock.end_step(success, self.spec.horizon);
        Ok(StepResult {
            observation: self.state(),
            reward,
            terminated: success,
            truncated,
            success,
            applied_action: applied,
            action_clipped: clipped,
        })
    }

    fn state(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        let vmax = self.spec.point_mass.max_speed;
        match state {
            [x, y, vx, vy] if x.abs() <= 1.0 && y.abs() <= 1.0 && vx.abs() <= vmax && vy.abs() <= vmax => {
                self.state = [*x, *y, *vx, *vy];
                self.clock.restart();
                Ok(())
            }
            _ => Err(BeeError::arg("point mass state must be [x, y, vx, vy] within bounds")),
        }
    }

    fn is_terminal_observation(&self, observation: &[f64]) -> bool {
        observation.len() == 4 && self.goal_distance(observation) <= self.spec.point_mass.goal_radius
    }

    fn observation_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let v = self.spec.point_mass.max_speed;
        (vec![-1.0, -1.0, -v, -v], vec![1.0, 1.0, v, v])
    }
}
