use rand::Rng;

use super::{BacAgent, BacConfig};
use crate::diagnostics::RunRecord;
use crate::env::{make_env, EnvSpec, Environment};
use crate::replay::{ReplayBuffer, Transition};
use crate::rng::{child, SeedRng};
use crate::{BeeError, Result};

/// Independent random streams derived from a run seed.
pub const STREAM_ENV: u64 = 0;
pub const STREAM_ACT: u64 = 1;
pub const STREAM_BATCH: u64 = 2;
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_INIT: u64 = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalStats {
    pub mean_return: f64,
    pub success_rate: f64,
}

/// Runs `episodes` deterministic-policy episodes on a fresh environment.
pub fn evaluate_policy(agent: &BacAgent, spec: &EnvSpec, episodes: usize, seed: u64) -> Result<EvalStats> {
    let mut env = make_env(spec, seed)?;
    evaluate_policy_in(agent, env.as_mut(), episodes)
}

/// Deterministic-policy episodes on a caller-supplied environment, which is
/// reset before each episode.
pub fn evaluate_policy_in(agent: &BacAgent, env: &mut dyn Environment, episodes: usize) -> Result<EvalStats> {
    let space = env.action_space();
    // Deterministic actions draw nothing; the stream only satisfies the signature.
    let mut dummy = child(0, STREAM_ACT);
    let (mut total, mut successes) = (0.0, 0usize);
    for _ in 0..episodes {
        let mut obs = env.reset();
        loop {
            let unit = agent.act(&obs, true, &mut dummy);
            let r = env.step(&space.from_unit(&unit))?;
            total += r.reward;
            obs = r.observation;
            if r.success {
                successes += 1;
            }
            if r.terminated || r.truncated {
                break;
            }
        }
    }
    let n = episodes.max(1) as f64;
    Ok(EvalStats {
        mean_return: total / n,
        success_rate: successes as f64 / n,
    })
}

/// One online training run: agent, environment, replay buffer and the
/// collection state.
pub struct BacRun {
    pub agent: BacAgent,
    pub env: Box<dyn Environment>,
    pub buffer: ReplayBuffer,
    seed: u64,
    act_rng: SeedRng,
    batch_rng: SeedRng,
    observation: Vec<f64>,
    episode_return: f64,
    step: u64,
}

impl std::fmt::Debug for BacRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BacRun")
            .field("seed", &self.seed)
            .field("step", &self.step)
            .field("buffer", &self.buffer.len())
            .finish()
    }
}

impl BacRun {
    /// Builds the agent and fills the buffer with the warm-up transitions,
    /// drawn with uniform random actions.
    pub fn new(cfg: BacConfig, env: Box<dyn Environment>, seed: u64) -> Result<Self> {
        let spec = env.spec().clone();
        let state_dim = spec.observation_dim();
        let action_dim = spec.action_space().dim();
        if spec.action_space().is_discrete() {
            return Err(BeeError::arg("the actor-critic agent needs a continuous action space"));
        }
        let buffer = ReplayBuffer::new(cfg.buffer_capacity, state_dim, action_dim)?;
        let warmup = cfg.warmup_transitions;
        let agent = BacAgent::new(cfg, state_dim, action_dim, seed)?;
        let mut run = Self {
            agent,
            env,
            buffer,
            seed,
            act_rng: child(seed, STREAM_ACT),
            batch_rng: child(seed, STREAM_BATCH),
            observation: Vec::new(),
            episode_return: 0.0,
            step: 0,
        };
        run.observation = run.env.reset();
        for _ in 0..warmup {
            let unit: Vec<f64> = (0..action_dim).map(|_| run.act_rng.random_range(-1.0..1.0)).collect();
            run.collect(unit)?;
        }
        Ok(run)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    /// Executes one unit-scaled action, stores the transition and returns
    /// the finished episode's return and success flag, if any.
    fn collect(&mut self, unit: Vec<f64>) -> Result<Option<(f64, bool)>> {
        let space = self.env.action_space();
        let r = self.env.step(&space.from_unit(&unit))?;
        self.buffer.push(Transition {
            state: std::mem::take(&mut self.observation),
            action: unit,
            reward: r.reward,
            next_state: r.observation.clone(),
            terminated: r.terminated,
        })?;
        self.episode_return += r.reward;
        if r.terminated || r.truncated {
            let done = (self.episode_return, r.success);
            self.episode_return = 0.0;
            self.observation = self.env.reset();
            Ok(Some(done))
        } else {
            self.observation = r.observation;
            Ok(None)
        }
    }

    /// Adds externally produced transitions (for example rare successful
    /// trajectories) and returns how many were stored.
    pub fn inject(&mut self, trajectories: &[Vec<Transition>]) -> Result<usize> {
        self.buffer.inject_trajectories(trajectories)
    }

    /// One environment step with the current stochastic policy followed by
    /// one value, critic and policy update on a single sampled batch.
    pub fn train_iteration(&mut self) -> Result<RunRecord> {
        self.step += 1;
        let unit = self.agent.act(&self.observation, false, &mut self.act_rng);
        let finished = self.collect(unit)?;
        let batch = self
            .buffer
            .sample_arrays(self.agent.config().batch_size, &mut self.batch_rng)?;
        let stats = self.agent.update(&batch).map_err(|e| at_step(e, self.step))?;
        Ok(RunRecord {
            step: self.step,
            episode_return: finished.map(|f| f.0),
            success: finished.map(|f| f64::from(u8::from(f.1))),
            lambda_used: Some(stats.lambda_mean),
            alpha: Some(stats.alpha),
            loss_q: Some(stats.loss_q),
            loss_v: Some(stats.loss_v),
            loss_pi: Some(stats.loss_pi),
            seed: self.seed,
            ..RunRecord::default()
        })
    }
}

pub(crate) fn at_step(err: BeeError, step: u64) -> BeeError {
    match err {
        BeeError::Numeric { context, layer } => BeeError::Numeric {
            context: format!("step {step}: {context}"),
            layer,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RewardMode;

    fn cfg() -> BacConfig {
        BacConfig {
            hidden_sizes: vec![32, 32],
            batch_size: 32,
            warmup_transitions: 100,
            ..BacConfig::default()
        }
    }

    fn run(seed: u64) -> BacRun {
        let env = make_env(&EnvSpec::point_mass(RewardMode::Dense), seed).unwrap();
        BacRun::new(cfg(), env, seed).unwrap()
    }

    #[test]
    fn bookkeeping_after_iterations() {
        let mut r = run(1);
        assert_eq!(r.buffer.len(), 100);
        for _ in 0..200 {
            let rec = r.train_iteration().unwrap();
            for v in [rec.loss_q, rec.loss_v, rec.loss_pi, rec.alpha] {
                assert!(v.unwrap().is_finite());
            }
        }
        assert_eq!(r.buffer.len(), 300);
        assert!(r.buffer.iter().all(|t| t.action.iter().all(|a| a.abs() <= 1.0)));
    }

    #[test]
    fn equal_seeds_give_equal_records() {
        let mut a = run(3);
        let mut b = run(3);
        for _ in 0..50 {
            assert_eq!(a.train_iteration().unwrap(), b.train_iteration().unwrap());
        }
        assert_eq!(a.agent.policy_net(), b.agent.policy_net());
    }

    #[test]
    fn discrete_envs_are_rejected() {
        let env = make_env(&EnvSpec::grid_maze(), 0).unwrap();
        assert!(BacRun::new(cfg(), env, 0).is_err());
    }

    #[test]
    fn evaluation_counts_successes() {
        let r = run(4);
        let spec = EnvSpec::point_mass(RewardMode::Sparse);
        let stats = evaluate_policy(&r.agent, &spec, 3, 11).unwrap();
        assert!((0.0..=1.0).contains(&stats.success_rate));
    }
}
