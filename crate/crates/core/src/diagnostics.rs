//! Estimation-bias instruments: Monte-Carlo Q estimates, the learned-minus-
//! Monte-Carlo gap series with its stage boundary, and the in-sample versus
//! on-policy value gap of a deep agent.

use ndarray::Zip;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bac::BacAgent;
use crate::env::Environment;
use crate::nn::squashed_gaussian_sample;
use crate::replay::ReplayBuffer;
use crate::rng::child;
use crate::{BeeError, Result};

/// Consecutive evaluation points the gap must stay non-positive for.
pub const DEFAULT_STAGE_WINDOW: usize = 10;

/// One row of a run log. Missing values serialize as empty CSV cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: u64,
    pub episode_return: Option<f64>,
    pub success: Option<f64>,
    pub q_learned_mean: Option<f64>,
    pub q_mc_mean: Option<f64>,
    pub gap: Option<f64>,
    pub gap_normalized: Option<f64>,
    pub delta_mu_pi: Option<f64>,
    pub lambda_used: Option<f64>,
    pub alpha: Option<f64>,
    pub loss_q: Option<f64>,
    pub loss_v: Option<f64>,
    pub loss_pi: Option<f64>,
    pub seed: u64,
}

impl RunRecord {
    pub const CSV_HEADER: &'static str = "step,episode_return,success,q_learned_mean,q_mc_mean,gap,gap_normalized,\
delta_mu_pi,lambda_used,alpha,loss_q,loss_v,loss_pi,seed";

    /// Fills `gap` and `gap_normalized` from the two Q means when both exist.
    pub fn with_estimates(mut self, q_learned: Option<f64>, q_mc: Option<f64>) -> Self {
        self.q_learned_mean = q_learned;
        self.q_mc_mean = q_mc;
        if let (Some(q), Some(mc)) = (q_learned, q_mc) {
            let (g, n) = gap_point(q, mc);
            self.gap = Some(g);
            self.gap_normalized = Some(n);
        }
        self
    }

    pub fn to_csv_row(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        [
            self.step.to_string(),
            cell(self.episode_return),
            cell(self.success),
            cell(self.q_learned_mean),
            cell(self.q_mc_mean),
            cell(self.gap),
            cell(self.gap_normalized),
            cell(self.delta_mu_pi),
            cell(self.lambda_used),
            cell(self.alpha),
            cell(self.loss_q),
            cell(self.loss_v),
            cell(self.loss_pi),
            self.seed.to_string(),
        ]
        .join(",")
    }

    pub fn from_csv_row(line: &str) -> Result<Self> {
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != 14 {
            return Err(BeeError::Format(format!("expected 14 CSV cells, found {}", cells.len())));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| BeeError::Format(format!("bad number `{s}`")))
            }
        };
        let int = |s: &str| s.parse::<u64>().map_err(|_| BeeError::Format(format!("bad integer `{s}`")));
        Ok(Self {
            step: int(cells[0])?,
            episode_return: opt(cells[1])?,
            success: opt(cells[2])?,
            q_learned_mean: opt(cells[3])?,
            q_mc_mean: opt(cells[4])?,
            gap: opt(cells[5])?,
            gap_normalized: opt(cells[6])?,
            delta_mu_pi: opt(cells[7])?,
            lambda_used: opt(cells[8])?,
            alpha: opt(cells[9])?,
            loss_q: opt(cells[10])?,
            loss_v: opt(cells[11])?,
            loss_pi: opt(cells[12])?,
            seed: int(cells[13])?,
        })
    }
}

/// Discounted return estimates for each `(state, action)` pair: execute the
/// action from the injected state, then follow `policy` until the episode
/// ends or `horizon` steps (the first action included) have been taken.
/// `policy` maps an observation to an environment-scale action.
pub fn monte_carlo_q<P>(
    env: &mut dyn Environment,
    mut policy: P,
    pairs: &[(Vec<f64>, Vec<f64>)],
    n_rollouts: usize,
    gamma: f64,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    P: FnMut(&[f64], &mut crate::rng::SeedRng) -> Vec<f64>,
{
    if n_rollouts == 0 || horizon == 0 {
        return Err(BeeError::arg("monte carlo estimation needs at least one rollout and one step"));
    }
    let mut rng = child(seed, 0);
    let mut out = Vec::with_capacity(pairs.len());
    for (state, action) in pairs {
        let mut total = 0.0;
        for _ in 0..n_rollouts {
            env.set_state(state)?;
            let mut r = env.step(action)?;
            let mut ret = r.reward;
            let mut discount = 1.0;
            let mut taken = 1;
            while !(r.terminated || r.truncated) && taken < horizon {
                let a = policy(&r.observation, &mut rng);
                r = env.step(&a)?;
                discount *= gamma;
                ret += discount * r.reward;
                taken += 1;
            }
            total += ret;
        }
        out.push(total / n_rollouts as f64);
    }
    Ok(out)
}

fn gap_point(q: f64, mc: f64) -> (f64, f64) {
    let g = q - mc;
    (g, g / mc.abs().max(1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapSeries {
    /// Learned minus Monte-Carlo; negative means underestimation.
    pub gap: Vec<f64>,
    /// `gap / max(|mc|, 1)`.
    pub normalized: Vec<f64>,
    /// First index with a negative gap from which the gap stays
    /// non-positive for `window` consecutive points.
    pub boundary: Option<usize>,
}

pub fn estimation_gap_series(q_values: &[f64], mc_values: &[f64], window: usize) -> Result<GapSeries> {
    if q_values.len() != mc_values.len() {
        return Err(BeeError::arg("learned and Monte-Carlo series must have equal lengths"));
    }
    if mc_values.iter().any(|v| !v.is_finite()) {
        return Err(BeeError::arg("Monte-Carlo values must be finite"));
    }
    if window == 0 {
        return Err(BeeError::arg("stage window must be at least 1"));
    }
    let (gap, normalized): (Vec<f64>, Vec<f64>) = q_values.iter().zip(mc_values).map(|(q, m)| gap_point(*q, *m)).unzip();
    let boundary = (0..gap.len()).find(|&i| gap[i] < 0.0 && i + window <= gap.len() && gap[i..i + window].iter().all(|g| *g <= 0.0));
    Ok(GapSeries {
        gap,
        normalized,
        boundary,
    })
}

/// Mean over a buffer batch of `V(s) − min Q(s, a)` with `a` drawn from the
/// current policy. Positive values mean the policy's actions are worth less
/// than the in-sample value of the buffer's actions.
pub fn delta_mu_pi<R: Rng + ?Sized>(agent: &BacAgent, buffer: &ReplayBuffer, batch_size: usize, rng: &mut R) -> Result<f64> {
    if buffer.is_empty() {
        return Err(BeeError::state("cannot estimate the value gap from an empty buffer"));
    }
    let batch = buffer.sample_arrays(batch_size.max(1), rng)?;
    let sample = squashed_gaussian_sample(&agent.policy_net().forward(&batch.states), rng);
    let v = agent.state_value(&batch.states);
    let q = agent.online_q(&batch.states, &sample.action);
    let total = Zip::from(&v).and(&q).fold(0.0, |acc, v, q| acc + v - q);
    Ok(total / v.len() as f64)
}
