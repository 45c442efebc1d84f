//! Exact exploitation, exploration and blended backups on a [`TabularMdp`],
//! plus the policy evaluation, improvement and iteration procedures built on
//! them.
//!
//! The exploitation backup bootstraps from the best action the behaviour
//! mixture μ has ever taken at the successor state; the exploration backup
//! bootstraps from the current policy's expectation minus the entropy-style
//! term ω(s,a) = α·log π(a|s). The blended backup is the pointwise convex
//! combination `λ·exploit + (1−λ)·explore`.

use crate::mdp::{greedy_policy, sweep_to_fixed_point, MixturePolicy, QTable, TabularMdp, TabularPolicy};
use crate::{BeeError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendConfig {
    /// Weight on the exploitation backup.
    pub lambda: f64,
    /// Scale α of the exploration term ω = α·log π. Zero disables it.
    pub exploration_weight: f64,
}

impl BlendConfig {
    pub fn new(lambda: f64, exploration_weight: f64) -> Result<Self> {
        let cfg = Self {
            lambda,
            exploration_weight,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(BeeError::arg(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.exploration_weight >= 0.0) {
            return Err(BeeError::arg("exploration weight must be non-negative"));
        }
        Ok(())
    }
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            exploration_weight: 0.0,
        }
    }
}

fn check_shape(mdp: &TabularMdp, q: &QTable) -> Result<()> {
    if q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions() {
        return Err(BeeError::arg("Q table shape does not match the MDP"));
    }
    Ok(())
}

/// max over μ-supported actions of q(s,·), per state.
fn supported_max(q: &QTable, mu: &MixturePolicy) -> Result<Vec<f64>> {
    (0..q.n_states())
        .map(|s| {
            (0..q.n_actions())
                .filter(|&a| mu.supports(s, a))
                .map(|a| q.get(s, a))
                .reduce(f64::max)
                .ok_or_else(|| BeeError::arg(format!("state {s} has no action in the mixture support")))
        })
        .collect()
}

/// Σ_a π(a|s)·[q(s,a) − α·log π(a|s)], per state. Zero-probability actions
/// contribute nothing.
fn soft_expectation(q: &QTable, pi: &TabularPolicy, alpha: f64) -> Vec<f64> {
    (0..q.n_states())
        .map(|s| {
            q.row(s)
                .iter()
                .zip(pi.row(s))
                .filter(|(_, &p)| p > 0.0)
                .map(|(&v, &p)| {
                    let omega = if alpha == 0.0 { 0.0 } else { alpha * p.ln() };
                    p * (v - omega)
                })
                .sum()
        })
        .collect()
}

/// 𝒯_exploit Q(s,a) = r(s,a) + γ·Σ P(s'|s,a)·max_{a' ∈ supp μ(·|s')} Q(s',a').
pub fn exploit_backup(mdp: &TabularMdp, q: &QTable, mu: &MixturePolicy) -> Result<QTable> {
    check_shape(mdp, q)?;
    if mu.n_states() != mdp.n_states() || mu.n_actions() != mdp.n_actions() {
        return Err(BeeError::arg("mixture shape does not match the MDP"));
    }
    let v = supported_max(q, mu)?;
    Ok(QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        mdp.backup_with(s, a, |n| v[n])
    }))
}

/// 𝒯_explore Q(s,a) = r(s,a) + γ·Σ P(s'|s,a)·Σ π(a'|s')·[Q(s',a') − α·log π(a'|s')].
pub fn explore_backup(mdp: &TabularMdp, q: &QTable, pi: &TabularPolicy, cfg: &BlendConfig) -> Result<QTable> {
    check_shape(mdp, q)?;
    if pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions() {
        return Err(BeeError::arg("policy shape does not match the MDP"));
    }
    let v = soft_expectation(q, pi, cfg.exploration_weight);
    Ok(QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        mdp.backup_with(s, a, |n| v[n])
    }))
}

/// 𝓑Q = λ·𝒯_exploit Q + (1−λ)·𝒯_explore Q, pointwise.
pub fn bee_backup(
    mdp: &TabularMdp,
    q: &QTable,
    mu: &MixturePolicy,
    pi: &TabularPolicy,
    cfg: &BlendConfig,
) -> Result<QTable> {
    cfg.validate()?;
    let exploit = exploit_backup(mdp, q, mu)?;
    let explore = explore_backup(mdp, q, pi, cfg)?;
    let lambda = cfg.lambda;
    Ok(QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        lambda * exploit.get(s, a) + (1.0 - lambda) * explore.get(s, a)
    }))
}

/// Fixed point Q^{μ,π} of the blended backup, reached by sweeping from `q0`.
pub fn bee_policy_evaluation(
    mdp: &TabularMdp,
    q0: &QTable,
    mu: &MixturePolicy,
    pi: &TabularPolicy,
    cfg: &BlendConfig,
    tol: f64,
) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(BeeError::arg("tolerance must be positive"));
    }
    check_shape(mdp, q0)?;
    sweep_to_fixed_point(q0.clone(), mdp.discount(), tol, |q| bee_backup(mdp, q, mu, pi, cfg))
}

#[derive(Clone, Debug)]
pub struct PolicyIteration {
    pub q: QTable,
    pub policy: TabularPolicy,
    pub mixture: MixturePolicy,
    /// Q_k after each evaluation step, in order.
    pub trace: Vec<QTable>,
    pub converged: bool,
}

impl PolicyIteration {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Blended policy iteration from the uniform policy.
pub fn bee_policy_iteration(mdp: &TabularMdp, cfg: &BlendConfig, max_iters: usize, tol: f64) -> Result<PolicyIteration> {
    let initial = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
    bee_policy_iteration_from(mdp, cfg, initial, max_iters, tol)
}

/// Blended policy iteration: evaluate (μ_k, π_k) to a fixed point, take the
/// greedy policy of the result as π_{k+1}, and append it to the mixture with
/// uniform weights. Stops when the greedy policy repeats; exhausting `max_iters` returns the last iterate with
/// `converged = false`.
pub fn bee_policy_iteration_from(
    mdp: &TabularMdp,
    cfg: &BlendConfig,
    initial: TabularPolicy,
    max_iters: usize,
    tol: f64,
) -> Result<PolicyIteration> {
    if max_iters == 0 {
        return Err(BeeError::arg("max_iters must be at least 1"));
    }
    cfg.validate()?;
    let mut policy = initial;
    let mut mixture = MixturePolicy::single(policy.clone());
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut trace: Vec<QTable> = Vec::new();
    for _ in 0..max_iters {
        q = bee_policy_evaluation(mdp, &q, &mixture, &policy, cfg, tol)?;
        trace.push(q.clone());
        let improved = greedy_policy(&q, None)?;
        // π_k is already in the mixture, so a repeated policy leaves both
        // operators, and hence Q, unchanged.
        if improved == policy {
            return Ok(PolicyIteration {
                q,
                policy,
                mixture,
                trace,
                converged: true,
            });
        }
        mixture.push_uniform(improved.clone())?;
        policy = improved;
    }
    Ok(PolicyIteration {
        q,
        policy,
        mixture,
        trace,
        converged: false,
    })
}
