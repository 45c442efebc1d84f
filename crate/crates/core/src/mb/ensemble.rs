use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::seq::SliceRandom;

use crate::nn::{concat_cols, losses, Activation, AdamConfig, NetParams, NetSpec, OptimState};
use crate::replay::{Batch, ReplayBuffer};
use crate::rng::{child, SeedRng};
use crate::{BeeError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub members: usize,
    pub hidden_sizes: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub activation: Activation,
}

/// `K` Gaussian networks mapping `(s, a)` to the mean and log-variance of
/// `(s' − s, r)`.
#[derive(Clone, Debug)]
pub struct DynamicsEnsemble {
    spec: EnsembleSpec,
    members: Vec<NetParams>,
    opts: Vec<OptimState>,
    shuffles: Vec<SeedRng>,
}

impl DynamicsEnsemble {
    /// Member `i` is initialized and shuffles its data from its own stream.
    pub fn new(spec: EnsembleSpec, seed: u64) -> Result<Self> {
        if spec.members < 2 {
            return Err(BeeError::arg("a dynamics ensemble needs at least 2 members"));
        }
        if spec.batch_size == 0 {
            return Err(BeeError::arg("model batch size must be positive"));
        }
        let out = spec.state_dim + 1;
        let net = NetSpec::new(spec.state_dim + spec.action_dim, &spec.hidden_sizes, 2 * out, spec.activation);
        let mut members = Vec::with_capacity(spec.members);
        let mut shuffles = Vec::with_capacity(spec.members);
        for i in 0..spec.members as u64 {
            let mut init = child(seed, 2 * i);
            members.push(NetParams::init(net.clone(), &mut init)?);
            shuffles.push(child(seed, 2 * i + 1));
        }
        let opts = members
            .iter()
            .map(|m| OptimState::new(m, AdamConfig::with_lr(spec.lr)))
            .collect();
        Ok(Self {
            spec,
            members,
            opts,
            shuffles,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn members(&self) -> &[NetParams] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [NetParams] {
        &mut self.members
    }

    fn out_dim(&self) -> usize {
        self.spec.state_dim + 1
    }

    /// Regression targets `[s' − s, r]` for a batch.
    pub fn targets(batch: &Batch) -> Array2<f64> {
        let delta = &batch.next_states - &batch.states;
        concatenate(Axis(1), &[delta.view(), batch.rewards.view().insert_axis(Axis(1))]).expect("row counts match")
    }

    /// Mean NLL of one member on a batch, with gradients.
    pub fn member_nll(&self, member: usize, inputs: &Array2<f64>, targets: &Array2<f64>) -> Result<(f64, NetParams)> {
        let d = self.out_dim();
        crate::nn::forward_backward(&self.members[member], inputs, |out| {
            let mean = out.slice(s![.., ..d]).to_owned();
            let log_var = out.slice(s![.., d..]).to_owned();
            let (loss, dm, dl) = losses::gaussian_nll(&mean, &log_var, targets);
            (loss, concatenate(Axis(1), &[dm.view(), dl.view()]).expect("same rows"))
        })
    }

    /// `epochs` passes per member over its own shuffle of the buffer.
    /// Returns each member's mean NLL over its final pass.
    pub fn train(&mut self, buffer: &ReplayBuffer, epochs: usize) -> Result<Vec<f64>> {
        if buffer.is_empty() {
            return Err(BeeError::state("cannot fit the dynamics model to an empty buffer"));
        }
        let all: Vec<_> = buffer.iter().collect();
        let (sd, ad) = (buffer.state_dim(), buffer.action_dim());
        let mut last = vec![0.0; self.members.len()];
        for m in 0..self.members.len() {
            let mut order: Vec<usize> = (0..all.len()).collect();
            for _ in 0..epochs {
                order.shuffle(&mut self.shuffles[m]);
                let (mut total, mut batches) = (0.0, 0usize);
                for chunk in order.chunks(self.spec.batch_size) {
                    let items: Vec<_> = chunk.iter().map(|&i| all[i]).collect();
                    let batch = Batch::from_transitions(&items, sd, ad);
                    let inputs = concat_cols(&batch.states, &batch.actions);
                    let (loss, grads) = self.member_nll(m, &inputs, &Self::targets(&batch)).map_err(|e| match e {
                        BeeError::Numeric { context, layer } => BeeError::Numeric {
                            context: format!("ensemble member {m}: {context}"),
                            layer,
                        },
                        other => other,
                    })?;
                    self.opts[m].adam_step(&mut self.members[m], &grads)?;
                    total += loss;
                    batches += 1;
                }
                last[m] = total / batches as f64;
            }
        }
        Ok(last)
    }

    /// Per-member predicted means of `(s' − s, r)`, one matrix per member.
    pub fn member_means(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Vec<Array2<f64>> {
        let inputs = concat_cols(states, actions);
        let d = self.out_dim();
        self.members
            .iter()
            .map(|m| m.forward(&inputs).slice(s![.., ..d]).to_owned())
            .collect()
    }

    /// Per-member standard deviations of `(s' − s, r)`, after the
    /// log-variance clamp.
    pub fn member_stds(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Vec<Array2<f64>> {
        let inputs = concat_cols(states, actions);
        let d = self.out_dim();
        self.members
            .iter()
            .map(|m| {
                m.forward(&inputs)
                    .slice(s![.., d..])
                    .mapv(|lv| (0.5 * lv.clamp(losses::LOG_VAR_MIN, losses::LOG_VAR_MAX)).exp())
            })
            .collect()
    }

    /// Next-state and reward predictions: the arithmetic mean of the
    /// members' means, with the state delta added back.
    pub fn predict(&self, states: &Array2<f64>, actions: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
        let means = self.member_means(states, actions);
        let mut avg = Array2::zeros(means[0].dim());
        for m in &means {
            avg += m;
        }
        avg /= means.len() as f64;
        let sd = self.spec.state_dim;
        let next = states + &avg.slice(s![.., ..sd]);
        (next, avg.column(sd).to_owned())
    }
}
