use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;

use super::{DynamicsEnsemble, EnsembleSpec, MbConfig};
use crate::bac::{BacAgent, BacConfig, LambdaMode, STREAM_ACT, STREAM_BATCH};
use crate::diagnostics::RunRecord;
use crate::env::Environment;
use crate::replay::{Batch, ReplayBuffer, Transition};
use crate::rng::{child, derive_seed, SeedRng};
use crate::{BeeError, Result};

const STREAM_MODEL: u64 = 5;

/// Model-based training run. Real transitions live in `real`, model
/// rollouts in `model`; the model buffer only ever holds the current
/// epoch's rollouts.
pub struct MbRun {
    pub agent: BacAgent,
    pub ensemble: DynamicsEnsemble,
    pub env: Box<dyn Environment>,
    pub real: ReplayBuffer,
    pub model: ReplayBuffer,
    cfg: MbConfig,
    seed: u64,
    act_rng: SeedRng,
    batch_rng: SeedRng,
    observation: Vec<f64>,
    episode_return: f64,
    epoch: usize,
    steps: u64,
    rollout_lengths: Vec<usize>,
}

impl std::fmt::Debug for MbRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MbRun")
            .field("seed", &self.seed)
            .field("epoch", &self.epoch)
            .field("real", &self.real.len())
            .field("model", &self.model.len())
            .finish()
    }
}

impl MbRun {
    pub fn new(agent_cfg: BacConfig, cfg: MbConfig, env: Box<dyn Environment>, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if agent_cfg.lambda_mode != LambdaMode::Fixed {
            return Err(BeeError::Config(vec![
                "model-based runs blend targets from different batches and need lambda_mode fixed".into(),
            ]));
        }
        let spec = env.spec().clone();
        if spec.action_space().is_discrete() {
            return Err(BeeError::arg("the model-based agent needs a continuous action space"));
        }
        let (sd, ad) = (spec.observation_dim(), spec.action_space().dim());
        let ensemble = DynamicsEnsemble::new(
            EnsembleSpec {
                state_dim: sd,
                action_dim: ad,
                members: cfg.k_ensemble,
                hidden_sizes: cfg.model_hidden.clone(),
                lr: cfg.model_lr,
                batch_size: cfg.model_batch,
                activation: crate::nn::Activation::Relu,
            },
            derive_seed(seed, STREAM_MODEL),
        )?;
        let warmup = agent_cfg.warmup_transitions;
        let mut run = Self {
            agent: BacAgent::new(agent_cfg, sd, ad, seed)?,
            ensemble,
            env,
            real: ReplayBuffer::new(cfg.real_capacity, sd, ad)?,
            model: ReplayBuffer::new(cfg.model_capacity, sd, ad)?,
            cfg,
            seed,
            act_rng: child(seed, STREAM_ACT),
            batch_rng: child(seed, STREAM_BATCH),
            observation: Vec::new(),
            episode_return: 0.0,
            epoch: 0,
            steps: 0,
            rollout_lengths: Vec::new(),
        };
        run.observation = run.env.reset();
        for _ in 0..warmup {
            let unit: Vec<f64> = (0..ad).map(|_| run.act_rng.random_range(-1.0..1.0)).collect();
            run.collect(unit)?;
        }
        Ok(run)
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &MbConfig {
        &self.cfg
    }

    /// Length of every model trajectory generated this epoch.
    pub fn rollout_lengths(&self) -> &[usize] {
        &self.rollout_lengths
    }

    fn collect(&mut self, unit: Vec<f64>) -> Result<Option<(f64, bool)>> {
        let space = self.env.action_space();
        let r = self.env.step(&space.from_unit(&unit))?;
        self.real.push(Transition {
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

    /// Refills the model buffer with `rollouts_per_update` trajectories of
    /// at most `horizon` steps, started from real states and driven by the
    /// current policy. Trajectories stop early on the environment's
    /// terminal predicate.
    pub fn generate_rollouts(&mut self, horizon: usize) -> Result<()> {
        self.model.clear();
        let starts = self.real.sample_arrays(self.cfg.rollouts_per_update, &mut self.batch_rng)?;
        let (lo, hi) = self.env.observation_bounds();
        let mut states = starts.states;
        let mut alive: Vec<usize> = (0..states.nrows()).collect();
        let mut lengths = vec![0usize; states.nrows()];
        for _ in 0..horizon {
            if alive.is_empty() {
                break;
            }
            let (actions, _) = self.agent.sample_actions(&states);
            let (mut next, rewards) = self.ensemble.predict(&states, &actions);
            for mut row in next.rows_mut() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = v.clamp(lo[j], hi[j]);
                }
            }
            if next.iter().chain(rewards.iter()).any(|v| !v.is_finite()) {
                return Err(BeeError::numeric(format!("epoch {}: model rollout", self.epoch), None));
            }
            let mut keep = Vec::with_capacity(alive.len());
            for (row, &id) in alive.iter().enumerate() {
                let ns = next.row(row).to_vec();
                let terminated = self.env.is_terminal_observation(&ns);
                self.model.push(Transition {
                    state: states.row(row).to_vec(),
                    action: actions.row(row).to_vec(),
                    reward: rewards[row],
                    next_state: ns,
                    terminated,
                })?;
                lengths[id] += 1;
                if !terminated {
                    keep.push(row);
                }
            }
            states = next.select(Axis(0), &keep);
            alive = keep.iter().map(|&r| alive[r]).collect();
        }
        self.rollout_lengths = lengths;
        Ok(())
    }

    /// Value and exploitation targets from a real batch, exploration
    /// targets and policy states from a model batch. The critic loss is
    /// `λ·mean_real (Q − exploit)² + (1 − λ)·mean_model (Q − explore)²`.
    fn update_split(&mut self) -> Result<(f64, f64, f64)> {
        let n = self.agent.config().batch_size;
        let lambda = self.agent.config().lambda;
        let real = self.real.sample_arrays(n, &mut self.batch_rng)?;
        let model = self.model.sample_arrays(n, &mut self.batch_rng)?;
        let loss_v = self.agent.update_value(&real)?;
        let exploit = self.agent.exploit_column(&real);
        let loss_q = if lambda == 1.0 {
            self.agent.update_critics(&real, &exploit)?
        } else {
            let explore = self.agent.explore_column(&model);
            if lambda == 0.0 {
                self.agent.update_critics(&model, &explore)?
            } else {
                let (states, actions, targets, weights) = stack(&real, &model, &exploit, &explore, lambda);
                self.agent.update_critics_weighted(&states, &actions, &targets, Some(&weights))?
            }
        };
        let (loss_pi, _) = self.agent.update_policy(&model.states)?;
        Ok((loss_v, loss_q, loss_pi))
    }

    /// Retrains the ensemble, regenerates the model buffer at this epoch's
    /// rollout length, then runs `steps_per_epoch` real steps each followed
    /// by one split update. The record carries the mean return of episodes
    /// finished during the epoch.
    pub fn mb_epoch(&mut self) -> Result<RunRecord> {
        let epoch = self.epoch;
        let tag = |e: BeeError| match e {
            BeeError::Numeric { context, layer } => BeeError::Numeric {
                context: format!("epoch {epoch}: {context}"),
                layer,
            },
            other => other,
        };
        self.ensemble.train(&self.real, self.cfg.model_train_epochs).map_err(tag)?;
        let horizon = self.cfg.rollout_schedule.length(epoch);
        self.generate_rollouts(horizon).map_err(tag)?;
        let mut finished = Vec::new();
        let mut last = (0.0, 0.0, 0.0);
        for _ in 0..self.cfg.steps_per_epoch {
            self.steps += 1;
            let unit = self.agent.act(&self.observation, false, &mut self.act_rng);
            if let Some(done) = self.collect(unit)? {
                finished.push(done);
            }
            last = self.update_split().map_err(tag)?;
        }
        self.epoch += 1;
        let mean = |f: &dyn Fn(&(f64, bool)) -> f64| {
            (!finished.is_empty()).then(|| finished.iter().map(f).sum::<f64>() / finished.len() as f64)
        };
        Ok(RunRecord {
            step: self.steps,
            episode_return: mean(&|d| d.0),
            success: mean(&|d| f64::from(u8::from(d.1))),
            lambda_used: Some(self.agent.config().lambda),
            alpha: Some(self.agent.alpha()),
            loss_v: Some(last.0),
            loss_q: Some(last.1),
            loss_pi: Some(last.2),
            seed: self.seed,
            ..RunRecord::default()
        })
    }
}

fn stack(
    real: &Batch,
    model: &Batch,
    exploit: &Array1<f64>,
    explore: &Array1<f64>,
    lambda: f64,
) -> (Array2<f64>, Array2<f64>, Array1<f64>, Array1<f64>) {
    let rows = |a: &Array2<f64>, b: &Array2<f64>| concatenate(Axis(0), &[a.view(), b.view()]).expect("same width");
    let states = rows(&real.states, &model.states);
    let actions = rows(&real.actions, &model.actions);
    let targets = concatenate(Axis(0), &[exploit.view(), explore.view()]).expect("1-d");
    // Each half is averaged over its own rows: the stacked mean divides by
    // both halves together, hence the factor 2 (batches have equal sizes).
    let weights = Array1::from_iter(
        std::iter::repeat_n(2.0 * lambda, exploit.len()).chain(std::iter::repeat_n(2.0 * (1.0 - lambda), explore.len())),
    );
    (states, actions, targets, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, EnvSpec, RewardMode};

    fn small(seed: u64) -> MbRun {
        let agent = BacConfig {
            hidden_sizes: vec![16, 16],
            batch_size: 16,
            warmup_transitions: 200,
            ..BacConfig::default()
        };
        let cfg = MbConfig {
            rollouts_per_update: 50,
            steps_per_epoch: 20,
            model_hidden: vec![16],
            model_batch: 32,
            model_train_epochs: 1,
            rollout_schedule: super::super::RolloutSchedule {
                min_length: 1,
                max_length: 4,
                start_epoch: 0,
                end_epoch: 3,
            },
            ..MbConfig::default()
        };
        let env = make_env(&EnvSpec::point_mass(RewardMode::Dense), seed).unwrap();
        MbRun::new(agent, cfg, env, seed).unwrap()
    }

    #[test]
    fn rollouts_respect_the_schedule_and_are_fresh() {
        let mut run = small(1);
        for epoch in 0..4 {
            let rec = run.mb_epoch().unwrap();
            let h = run.config().rollout_schedule.length(epoch);
            assert!(run.rollout_lengths().iter().all(|&l| l <= h && l >= 1));
            assert_eq!(run.model.len(), run.rollout_lengths().iter().sum::<usize>());
            assert!(rec.loss_q.unwrap().is_finite());
        }
        assert_eq!(run.real.len(), 200 + 4 * 20);
    }

    #[test]
    fn adaptive_lambda_is_rejected() {
        let agent = BacConfig {
            lambda_mode: LambdaMode::Min,
            ..BacConfig::default()
        };
        let env = make_env(&EnvSpec::point_mass(RewardMode::Dense), 0).unwrap();
        assert!(matches!(MbRun::new(agent, MbConfig::default(), env, 0), Err(BeeError::Config(_))));
    }

    #[test]
    fn exploit_targets_ignore_the_model_buffer() {
        let mut run = small(2);
        run.mb_epoch().unwrap();
        let batch = run.real.sample_arrays(8, &mut crate::rng::seeded(0)).unwrap();
        let before = run.agent.exploit_column(&batch);
        run.model.clear();
        assert_eq!(run.agent.exploit_column(&batch), before);
    }

    #[test]
    fn stacked_weights_reproduce_the_split_loss() {
        let e = Array1::from(vec![1.0, 2.0]);
        let x = Array1::from(vec![3.0, 4.0]);
        let b = Batch {
            states: Array2::zeros((2, 1)),
            actions: Array2::zeros((2, 1)),
            rewards: Array1::zeros(2),
            next_states: Array2::zeros((2, 1)),
            terminated: Array1::zeros(2),
        };
        let (_, _, targets, weights) = stack(&b, &b, &e, &x, 0.25);
        let pred = Array1::zeros(4);
        let (loss, _) = crate::nn::losses::weighted_squared_error(pred.view(), targets.view(), Some(weights.view()));
        let expected = 0.25 * (1.0 + 4.0) / 2.0 + 0.75 * (9.0 + 16.0) / 2.0;
        assert!((loss - expected).abs() < 1e-12);
    }
}
