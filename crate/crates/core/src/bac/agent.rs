use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::lambda::{row_lambda, LambdaState};
use super::{BacConfig, ExploreVariant, LambdaMode, ValueLoss};
use crate::nn::{
    concat_cols, deterministic_action, forward_backward, losses, polyak_update, row_matrix, squashed_gaussian_from_noise,
    squashed_gaussian_sample, AdamConfig, NetParams, NetSpec, OptimState, ScalarAdam, SquashedSample,
};
use crate::replay::Batch;
use crate::rng::{child, SeedRng};
use crate::{BeeError, Result};

use super::run::{STREAM_INIT, STREAM_NOISE};

/// Critic targets for one batch, with both columns kept for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    pub exploit: Array1<f64>,
    /// Absent when the weight on exploitation is exactly 1.
    pub explore: Option<Array1<f64>>,
    /// Weight on the exploitation column, per row.
    pub lambda: Array1<f64>,
    pub target: Array1<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub loss_v: f64,
    pub loss_q: f64,
    pub loss_pi: f64,
    pub loss_alpha: Option<f64>,
    pub lambda_mean: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct BacAgent {
    cfg: BacConfig,
    state_dim: usize,
    action_dim: usize,
    q1: NetParams,
    q2: NetParams,
    q1_target: NetParams,
    q2_target: NetParams,
    q1_opt: OptimState,
    q2_opt: OptimState,
    value: NetParams,
    value_opt: OptimState,
    policy: NetParams,
    policy_opt: OptimState,
    log_alpha: f64,
    alpha_opt: ScalarAdam,
    lambda: LambdaState,
    noise_rng: SeedRng,
    updates: u64,
}

fn column(out: &Array2<f64>) -> Array1<f64> {
    out.column(0).to_owned()
}

impl BacAgent {
    /// Networks are initialized in the order critic 1, critic 2, policy,
    /// value from the run's init stream.
    pub fn new(cfg: BacConfig, state_dim: usize, action_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut init = child(seed, STREAM_INIT);
        let hidden = &cfg.hidden_sizes;
        let critic_spec = NetSpec::new(state_dim + action_dim, hidden, 1, cfg.activation);
        let q1 = NetParams::init(critic_spec.clone(), &mut init)?;
        let q2 = NetParams::init(critic_spec, &mut init)?;
        let policy = NetParams::init(NetSpec::new(state_dim, hidden, 2 * action_dim, cfg.activation), &mut init)?;
        let value = NetParams::init(NetSpec::new(state_dim, hidden, 1, cfg.activation), &mut init)?;
        let adam = AdamConfig::with_lr(cfg.lr);
        Ok(Self {
            q1_opt: OptimState::new(&q1, adam),
            q2_opt: OptimState::new(&q2, adam),
            value_opt: OptimState::new(&value, adam),
            policy_opt: OptimState::new(&policy, adam),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
            value,
            policy,
            log_alpha: cfg.init_alpha.ln(),
            alpha_opt: ScalarAdam::new(adam),
            lambda: LambdaState::new(cfg.lambda),
            noise_rng: child(seed, STREAM_NOISE),
            updates: 0,
            state_dim,
            action_dim,
            cfg,
        })
    }

    pub fn config(&self) -> &BacConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    pub fn set_log_alpha(&mut self, log_alpha: f64) {
        self.log_alpha = log_alpha;
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn lambda_state(&self) -> &LambdaState {
        &self.lambda
    }

    pub fn ent_target(&self) -> f64 {
        self.cfg.ent_target.unwrap_or(-(self.action_dim as f64))
    }

    pub fn critics(&self) -> (&NetParams, &NetParams) {
        (&self.q1, &self.q2)
    }

    pub fn target_critics(&self) -> (&NetParams, &NetParams) {
        (&self.q1_target, &self.q2_target)
    }

    pub fn value_net(&self) -> &NetParams {
        &self.value
    }

    pub fn policy_net(&self) -> &NetParams {
        &self.policy
    }

    pub fn policy_net_mut(&mut self) -> &mut NetParams {
        &mut self.policy
    }

    /// Overwrites both critics and their targets with the same parameters.
    pub fn set_critics_flat(&mut self, values: &[f64]) -> Result<()> {
        for net in [&mut self.q1, &mut self.q2, &mut self.q1_target, &mut self.q2_target] {
            net.set_flat(values)?;
        }
        Ok(())
    }

    pub fn critics_mut(&mut self) -> (&mut NetParams, &mut NetParams) {
        (&mut self.q1, &mut self.q2)
    }

    pub fn value_net_mut(&mut self) -> &mut NetParams {
        &mut self.value
    }

    /// Fresh policy, value and critic networks (targets copied from the new
    /// critics) with reset optimizers; temperature and replay data are kept.
    pub fn reinitialize_networks(&mut self, seed: u64) -> Result<()> {
        let mut fresh = BacAgent::new(self.cfg.clone(), self.state_dim, self.action_dim, seed)?;
        fresh.log_alpha = self.log_alpha;
        fresh.alpha_opt = self.alpha_opt.clone();
        fresh.lambda = self.lambda.clone();
        fresh.noise_rng = self.noise_rng.clone();
        fresh.updates = self.updates;
        *self = fresh;
        Ok(())
    }

    fn critic_input(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
        concat_cols(states, actions)
    }

    /// `min(Q1, Q2)` of the target critics (`Q1` alone without double Q).
    pub fn target_q(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Array1<f64> {
        let sa = self.critic_input(states, actions);
        let q1 = column(&self.q1_target.forward(&sa));
        if !self.cfg.double_q {
            return q1;
        }
        let q2 = column(&self.q2_target.forward(&sa));
        Zip::from(&q1).and(&q2).map_collect(|a, b| a.min(*b))
    }

    /// `min(Q1, Q2)` of the online critics.
    pub fn online_q(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Array1<f64> {
        let sa = self.critic_input(states, actions);
        let q1 = column(&self.q1.forward(&sa));
        if !self.cfg.double_q {
            return q1;
        }
        let q2 = column(&self.q2.forward(&sa));
        Zip::from(&q1).and(&q2).map_collect(|a, b| a.min(*b))
    }

    pub fn state_value(&self, states: &Array2<f64>) -> Array1<f64> {
        column(&self.value.forward(states))
    }

    /// Action in `[-1, 1]^d` for one observation.
    pub fn act<R: Rng + ?Sized>(&self, observation: &[f64], deterministic: bool, rng: &mut R) -> Vec<f64> {
        let out = self.policy.forward(&row_matrix(observation));
        match (self.cfg.explore_variant, deterministic) {
            (_, true) => deterministic_action(&out).row(0).to_vec(),
            (ExploreVariant::Entropy, false) => squashed_gaussian_sample(&out, rng).action.row(0).to_vec(),
            (ExploreVariant::TargetSmoothing, false) => {
                let a = deterministic_action(&out);
                if self.cfg.action_noise == 0.0 {
                    return a.row(0).to_vec();
                }
                let normal = Normal::new(0.0, self.cfg.action_noise).expect("validated noise scale");
                a.row(0).iter().map(|x| (x + normal.sample(rng)).clamp(-1.0, 1.0)).collect()
            }
        }
    }

    /// Policy actions and log-probabilities for a batch of states, drawn
    /// from the agent's own noise stream.
    pub fn sample_actions(&mut self, states: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
        let s = squashed_gaussian_sample(&self.policy.forward(states), &mut self.noise_rng);
        (s.action, s.log_prob)
    }

    fn value_loss(&self, v: &Array1<f64>, q: &Array1<f64>) -> (f64, Array1<f64>) {
        match self.cfg.value_loss {
            ValueLoss::Expectile => losses::expectile(v.view(), q.view(), self.cfg.expectile_tau),
            ValueLoss::SparseQ => losses::sparse_q(v.view(), q.view(), self.cfg.value_alpha),
            ValueLoss::ExponentialQ => losses::exponential_q(v.view(), q.view(), self.cfg.value_alpha),
        }
    }

    /// One Adam step on the value network toward the in-sample level of the
    /// target critics at the batch's stored state-action pairs.
    pub fn update_value(&mut self, batch: &Batch) -> Result<f64> {
        let q = self.target_q(&batch.states, &batch.actions);
        self.update_value_toward(&batch.states, &q)
    }

    /// Same step against explicit regression values `q`.
    pub fn update_value_toward(&mut self, states: &Array2<f64>, q: &Array1<f64>) -> Result<f64> {
        let (loss, grads) = self.value_loss_grad(states, q)?;
        self.value_opt.adam_step(&mut self.value, &grads)?;
        Ok(loss)
    }

    /// Value loss against regression values `q` and its gradient with
    /// respect to the value network.
    pub fn value_loss_grad(&self, states: &Array2<f64>, q: &Array1<f64>) -> Result<(f64, NetParams)> {
        forward_backward(&self.value, states, |out| {
            let (l, g) = self.value_loss(&column(out), q);
            (l, g.insert_axis(Axis(1)))
        })
        .map_err(|e| context(e, "value update"))
    }

    pub fn exploit_column(&self, batch: &Batch) -> Array1<f64> {
        let v = self.state_value(&batch.next_states);
        self.bootstrap(batch, &v)
    }

    fn bootstrap(&self, batch: &Batch, next: &Array1<f64>) -> Array1<f64> {
        let g = self.cfg.gamma;
        Zip::from(&batch.rewards)
            .and(&batch.terminated)
            .and(next)
            .map_collect(|r, d, n| r + g * (1.0 - d) * n)
    }

    /// Draws fresh next actions from the policy (or its smoothed
    /// deterministic version) and bootstraps from the target critics.
    pub fn explore_column(&mut self, batch: &Batch) -> Array1<f64> {
        let out = self.policy.forward(&batch.next_states);
        let next = match self.cfg.explore_variant {
            ExploreVariant::Entropy => {
                let sample = squashed_gaussian_sample(&out, &mut self.noise_rng);
                let q = self.target_q(&batch.next_states, &sample.action);
                let alpha = self.alpha();
                Zip::from(&q).and(&sample.log_prob).map_collect(|q, lp| q - alpha * lp)
            }
            ExploreVariant::TargetSmoothing => {
                let mut a = deterministic_action(&out);
                let (sigma, clip) = (self.cfg.smoothing_sigma, self.cfg.smoothing_clip);
                if sigma > 0.0 {
                    let normal = Normal::new(0.0, sigma).expect("validated smoothing sigma");
                    a.mapv_inplace(|x| (x + normal.sample(&mut self.noise_rng).clamp(-clip, clip)).clamp(-1.0, 1.0));
                }
                self.target_q(&batch.next_states, &a)
            }
        };
        self.bootstrap(batch, &next)
    }

    /// Blended critic targets for the batch under the configured weighting.
    pub fn blended_targets(&mut self, batch: &Batch) -> Targets {
        let exploit = self.exploit_column(batch);
        if self.cfg.lambda_mode == LambdaMode::Fixed && self.cfg.lambda == 1.0 {
            let n = exploit.len();
            return Targets {
                target: exploit.clone(),
                exploit,
                explore: None,
                lambda: Array1::ones(n),
            };
        }
        let explore = self.explore_column(batch);
        let constant = match self.cfg.lambda_mode {
            LambdaMode::Ada => {
                let previous = blend(&exploit, &explore, &Array1::from_elem(exploit.len(), self.lambda.current));
                let q = self.online_q(&batch.states, &batch.actions);
                let err = Zip::from(&q).and(&previous).fold(0.0, |acc, q, t| acc + (q - t).abs()) / q.len() as f64;
                self.lambda.advance(err)
            }
            _ => self.cfg.lambda,
        };
        let lambda = row_lambda(self.cfg.lambda_mode, constant, &exploit, &explore);
        if self.cfg.lambda_mode != LambdaMode::Ada {
            self.lambda.current = lambda.mean().unwrap_or(constant);
        }
        Targets {
            target: blend(&exploit, &explore, &lambda),
            exploit,
            explore: Some(explore),
            lambda,
        }
    }

    /// One Adam step per active critic toward fixed targets, then Polyak
    /// averaging of the target critics. Returns the mean squared error
    /// averaged over the active critics.
    pub fn update_critics(&mut self, batch: &Batch, targets: &Array1<f64>) -> Result<f64> {
        self.update_critics_weighted(&batch.states, &batch.actions, targets, None)
    }

    pub(crate) fn update_critics_weighted(
        &mut self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        targets: &Array1<f64>,
        weights: Option<&Array1<f64>>,
    ) -> Result<f64> {
        let (l1, g1) = self.critic_loss_grad(0, states, actions, targets, weights)?;
        self.q1_opt.adam_step(&mut self.q1, &g1)?;
        let mut loss = l1;
        if self.cfg.double_q {
            let (l2, g2) = self.critic_loss_grad(1, states, actions, targets, weights)?;
            self.q2_opt.adam_step(&mut self.q2, &g2)?;
            loss = 0.5 * (l1 + l2);
        }
        polyak_update(&mut self.q1_target, &self.q1, self.cfg.polyak_rho)?;
        if self.cfg.double_q {
            polyak_update(&mut self.q2_target, &self.q2, self.cfg.polyak_rho)?;
        }
        Ok(loss)
    }

    /// Squared TD error of critic `which` (0 or 1) against fixed targets,
    /// optionally weighted per row, with its gradient.
    pub fn critic_loss_grad(
        &self,
        which: usize,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        targets: &Array1<f64>,
        weights: Option<&Array1<f64>>,
    ) -> Result<(f64, NetParams)> {
        let net = if which == 0 { &self.q1 } else { &self.q2 };
        forward_backward(net, &self.critic_input(states, actions), |out| {
            let (l, g) = losses::weighted_squared_error(out.column(0), targets.view(), weights.map(|w| w.view()));
            (l, g.insert_axis(Axis(1)))
        })
        .map_err(|e| context(e, "critic update"))
    }

    /// One Adam step on the policy, then (entropy variant with automatic
    /// tuning) one on the log temperature. Returns the policy loss and the
    /// temperature loss.
    pub fn update_policy(&mut self, states: &Array2<f64>) -> Result<(f64, Option<f64>)> {
        let noise = match self.cfg.explore_variant {
            ExploreVariant::Entropy => Some(Array2::from_shape_simple_fn((states.nrows(), self.action_dim), || {
                self.noise_rng.sample::<f64, _>(StandardNormal)
            })),
            ExploreVariant::TargetSmoothing => None,
        };
        let (loss, grads, sample) = self.policy_objective(states, noise)?;
        self.policy_opt.adam_step(&mut self.policy, &grads)?;
        let n = states.nrows() as f64;
        let alpha = self.alpha();
        let alpha_loss = match sample {
            Some(s) if self.cfg.auto_alpha => {
                let target = self.ent_target();
                let mean_term = s.log_prob.iter().map(|lp| lp + target).sum::<f64>() / n;
                let loss = -alpha * mean_term;
                self.alpha_opt.step(&mut self.log_alpha, -alpha * mean_term);
                Some(loss)
            }
            _ => None,
        };
        Ok((loss, alpha_loss))
    }

    /// Policy loss and its gradient for given standard-normal noise (one row
    /// per state). The noise is ignored by the deterministic variant.
    pub fn policy_loss_grad(&self, states: &Array2<f64>, noise: &Array2<f64>) -> Result<(f64, NetParams)> {
        let noise = match self.cfg.explore_variant {
            ExploreVariant::Entropy => Some(noise.clone()),
            ExploreVariant::TargetSmoothing => None,
        };
        let (loss, grads, _) = self.policy_objective(states, noise)?;
        Ok((loss, grads))
    }

    fn policy_objective(
        &self,
        states: &Array2<f64>,
        noise: Option<Array2<f64>>,
    ) -> Result<(f64, NetParams, Option<SquashedSample>)> {
        let n = states.nrows() as f64;
        let tape = self.policy.forward_tape(states);
        if let Some(layer) = tape.first_non_finite_layer() {
            return Err(BeeError::numeric("policy forward", Some(layer)));
        }
        let out = tape.output().clone();
        let (actions, sample) = match noise {
            Some(eps) => {
                let s = squashed_gaussian_from_noise(&out, eps);
                (s.action.clone(), Some(s))
            }
            None => (deterministic_action(&out), None),
        };
        let sa = self.critic_input(states, &actions);
        let t1 = self.q1.forward_tape(&sa);
        let q1 = column(t1.output());
        // Rows where the second critic is the smaller one route their
        // gradient through it.
        let (q, use_second, t2) = if self.cfg.double_q && sample.is_some() {
            let t2 = self.q2.forward_tape(&sa);
            let q2 = column(t2.output());
            let mask = Zip::from(&q1).and(&q2).map_collect(|a, b| b < a);
            let q = Zip::from(&q1).and(&q2).map_collect(|a, b| a.min(*b));
            (q, mask, Some(t2))
        } else {
            let len = q1.len();
            (q1, Array1::from_elem(len, false), None)
        };
        let alpha = self.alpha();
        let mut d_action = {
            let d1 = Array2::from_shape_fn((q.len(), 1), |(i, _)| if use_second[i] { 0.0 } else { -1.0 / n });
            let (_, dx) = self.q1.backward(&t1, &d1);
            dx.slice(s![.., self.state_dim..]).to_owned()
        };
        if let Some(t2) = &t2 {
            let d2 = Array2::from_shape_fn((q.len(), 1), |(i, _)| if use_second[i] { -1.0 / n } else { 0.0 });
            let (_, dx) = self.q2.backward(t2, &d2);
            d_action += &dx.slice(s![.., self.state_dim..]);
        }
        let (loss, d_out) = match &sample {
            Some(s) => {
                let loss = Zip::from(&s.log_prob).and(&q).fold(0.0, |acc, lp, q| acc + alpha * lp - q) / n;
                let d_lp = Array1::from_elem(q.len(), alpha / n);
                (loss, s.backward(&d_action, &d_lp))
            }
            None => {
                let loss = -q.sum() / n;
                let d = self.action_dim;
                let mut d_out = Array2::zeros(out.dim());
                for i in 0..out.nrows() {
                    for j in 0..d {
                        let a = actions[[i, j]];
                        d_out[[i, j]] = d_action[[i, j]] * (1.0 - a * a);
                    }
                }
                (loss, d_out)
            }
        };
        if !loss.is_finite() {
            return Err(BeeError::numeric("policy loss", None));
        }
        let (grads, _) = self.policy.backward(&tape, &d_out);
        Ok((loss, grads, sample))
    }

    /// Value step, blended targets, critic step, policy step, in that order.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let loss_v = self.update_value(batch)?;
        let targets = self.blended_targets(batch);
        if targets.target.iter().any(|t| !t.is_finite()) {
            return Err(BeeError::numeric("critic targets", None));
        }
        let loss_q = self.update_critics(batch, &targets.target)?;
        let alpha = self.alpha();
        let (loss_pi, loss_alpha) = self.update_policy(&batch.states)?;
        self.updates += 1;
        Ok(UpdateStats {
            loss_v,
            loss_q,
            loss_pi,
            loss_alpha,
            lambda_mean: targets.lambda.mean().unwrap_or(self.cfg.lambda),
            alpha,
        })
    }
}

/// `λ·exploit + (1 − λ)·explore`, per row.
pub(crate) fn blend(exploit: &Array1<f64>, explore: &Array1<f64>, lambda: &Array1<f64>) -> Array1<f64> {
    Zip::from(exploit)
        .and(explore)
        .and(lambda)
        .map_collect(|e, x, l| l * e + (1.0 - l) * x)
}

fn context(err: BeeError, what: &str) -> BeeError {
    match err {
        BeeError::Numeric { context, layer } => BeeError::Numeric {
            context: format!("{what}: {context}"),
            layer,
        },
        other => other,
    }
}
