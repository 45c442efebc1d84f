//! Explicit finite MDPs, tabular policies and the oracle solvers used as
//! ground truth by every tabular property check.
//!
//! Transition kernels are stored sparsely (one successor list per
//! state-action pair) so that the same type serves both the small random
//! fixtures and the 10⁴-state particle discretization.

use rand::Rng;
use rand_distr::Exp1;

use crate::rng::seeded;
use crate::{BeeError, Result};

/// Tolerance on transition-row and policy-row normalisation.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Default fixed-point tolerance for the sweep solvers.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// Successor lists indexed by `s * n_actions + a`.
    transitions: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    discount: f64,
    terminal: Vec<bool>,
    r_max: f64,
}

impl TabularMdp {
    /// Builds and validates an MDP from sparse successor lists.
    ///
    /// `r_max` is taken as the largest absolute reward.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        reward: Vec<f64>,
        discount: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(BeeError::arg("an MDP needs at least one state and one action"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(BeeError::arg(format!("discount {discount} outside (0, 1)")));
        }
        let n_pairs = n_states * n_actions;
        if transitions.len() != n_pairs || reward.len() != n_pairs {
            return Err(BeeError::arg(format!(
                "expected {n_pairs} transition rows and rewards, got {} and {}",
                transitions.len(),
                reward.len()
            )));
        }
        if terminal.len() != n_states {
            return Err(BeeError::arg("terminal mask length must equal n_states"));
        }
        for (idx, row) in transitions.iter().enumerate() {
            let (s, a) = (idx / n_actions, idx % n_actions);
            let mut total = 0.0;
            for &(next, p) in row {
                if next >= n_states {
                    return Err(BeeError::arg(format!("successor {next} out of range at ({s},{a})")));
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(BeeError::arg(format!("invalid probability {p} at ({s},{a})")));
                }
                total += p;
            }
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(BeeError::arg(format!("transition row ({s},{a}) sums to {total}")));
            }
        }
        if let Some(bad) = reward.iter().position(|r| !r.is_finite()) {
            return Err(BeeError::arg(format!("non-finite reward at pair {bad}")));
        }
        for s in (0..n_states).filter(|&s| terminal[s]) {
            for a in 0..n_actions {
                let idx = s * n_actions + a;
                let self_loop = transitions[idx].iter().all(|&(n, p)| n == s || p == 0.0);
                if !self_loop || reward[idx] != 0.0 {
                    return Err(BeeError::arg(format!(
                        "terminal state {s} must self-loop with zero reward"
                    )));
                }
            }
        }
        let r_max = reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            reward,
            discount,
            terminal,
            r_max,
        })
    }

    /// Builds an MDP from a dense `[s][a][s']` probability table.
    pub fn from_dense(
        n_states: usize,
        n_actions: usize,
        probs: &[f64],
        reward: Vec<f64>,
        discount: f64,
        terminal: Vec<bool>,
    ) -> Result<Self> {
        if probs.len() != n_states * n_actions * n_states {
            return Err(BeeError::arg("dense transition table has the wrong size"));
        }
        let transitions = probs
            .chunks(n_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != 0.0)
                    .map(|(n, &p)| (n, p))
                    .collect()
            })
            .collect();
        Self::new(n_states, n_actions, transitions, reward, discount, terminal)
    }

    /// Seeded random MDP: rewards uniform in [-1, 1], transition rows drawn
    /// from a flat Dirichlet via normalised exponential variates.
    pub fn random(n_states: usize, n_actions: usize, discount: f64, seed: u64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(BeeError::arg("n_states and n_actions must be at least 1"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(BeeError::arg(format!("discount {discount} outside (0, 1)")));
        }
        let mut rng = seeded(seed);
        let n_pairs = n_states * n_actions;
        let mut transitions = Vec::with_capacity(n_pairs);
        let mut reward = Vec::with_capacity(n_pairs);
        for _ in 0..n_pairs {
            let draws: Vec<f64> = (0..n_states).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
            let total: f64 = draws.iter().sum();
            transitions.push(draws.iter().enumerate().map(|(n, d)| (n, d / total)).collect());
            reward.push(rng.random_range(-1.0..=1.0));
        }
        let mut mdp = Self::new(
            n_states,
            n_actions,
            transitions,
            reward,
            discount,
            vec![false; n_states],
        )?;
        mdp.r_max = 1.0;
        Ok(mdp)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    /// P(s'|s,a).
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.successors(s, a)
            .iter()
            .filter(|(n, _)| *n == next)
            .map(|(_, p)| p)
            .sum()
    }

    /// r(s,a) + γ·Σ_{s'} P(s'|s,a)·value(s').
    pub fn backup_with(&self, s: usize, a: usize, value: impl Fn(usize) -> f64) -> f64 {
        let future: f64 = self.successors(s, a).iter().map(|&(n, p)| p * value(n)).sum();
        self.reward(s, a) + self.discount * future
    }
}

/// Dense state-action value table.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(BeeError::arg("Q table has the wrong number of entries"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BeeError::arg("Q table entries must be finite"));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn from_fn(n_states: usize, n_actions: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..n_states * n_actions)
            .map(|i| f(i / n_actions, i % n_actions))
            .collect();
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// ‖self − other‖∞.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Per-state maximum over all actions.
    pub fn max_values(&self) -> ValueTable {
        ValueTable(
            (0..self.n_states)
                .map(|s| self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTable {
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-state values.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable(pub Vec<f64>);

/// π(a|s) as a dense table.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(BeeError::arg("policy table has the wrong number of entries"));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(BeeError::arg(format!("policy row {s} has a negative or non-finite entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(BeeError::arg(format!("policy row {s} sums to {total}")));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Mass one on `actions[s]` at every state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(BeeError::arg(format!("action {a} out of range at state {s}")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self {
            n_states: actions.len(),
            n_actions,
            probs,
        })
    }

    /// π(·|s) ∝ exp(q(s,·)/temperature) over every action.
    pub fn boltzmann(q: &QTable, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(BeeError::arg("Boltzmann temperature must be positive"));
        }
        let n_actions = q.n_actions();
        let mut probs = Vec::with_capacity(q.values().len());
        for s in 0..q.n_states() {
            let row = q.row(s);
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = row.iter().map(|v| ((v - top) / temperature).exp()).collect();
            let total: f64 = weights.iter().sum();
            probs.extend(weights.iter().map(|w| w / total));
        }
        Ok(Self {
            n_states: q.n_states(),
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Index of the highest-probability action at `s` (lowest index on ties).
    pub fn mode(&self, s: usize) -> usize {
        argmax(self.row(s).iter().copied().enumerate()).unwrap_or(0)
    }
}

/// Convex combination of historical policies, the tabular stand-in for the
/// behaviour mixture a replay buffer induces.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePolicy {
    members: Vec<TabularPolicy>,
    weights: Vec<f64>,
    support: Vec<bool>,
}

impl MixturePolicy {
    pub fn new(members: Vec<TabularPolicy>, weights: Vec<f64>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| BeeError::arg("a mixture needs at least one member"))?;
        let (n_states, n_actions) = (first.n_states, first.n_actions);
        if members.iter().any(|m| m.n_states != n_states || m.n_actions != n_actions) {
            return Err(BeeError::arg("mixture members must share their shape"));
        }
        if weights.len() != members.len() || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(BeeError::arg("mixture weights must be non-negative, one per member"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > ROW_SUM_TOL {
            return Err(BeeError::arg(format!("mixture weights sum to {total}")));
        }
        let support = (0..n_states * n_actions)
            .map(|i| {
                members
                    .iter()
                    .zip(&weights)
                    .map(|(m, w)| w * m.probs[i])
                    .sum::<f64>()
                    > 0.0
            })
            .collect();
        Ok(Self {
            members,
            weights,
            support,
        })
    }

    pub fn single(policy: TabularPolicy) -> Self {
        Self::new(vec![policy], vec![1.0]).expect("a single policy is a valid mixture")
    }

    /// Appends `policy` and re-weights all members uniformly (1/k each).
    pub fn push_uniform(&mut self, policy: TabularPolicy) -> Result<()> {
        let mut members = std::mem::take(&mut self.members);
        members.push(policy);
        let k = members.len() as f64;
        let weights = vec![1.0 / k; members.len()];
        *self = Self::new(members, weights)?;
        Ok(())
    }

    pub fn members(&self) -> &[TabularPolicy] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_states(&self) -> usize {
        self.members[0].n_states
    }

    pub fn n_actions(&self) -> usize {
        self.members[0].n_actions
    }

    /// Σᵢ wᵢ·πᵢ(a|s).
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.members.iter().zip(&self.weights).map(|(m, w)| w * m.prob(s, a)).sum()
    }

    pub fn supports(&self, s: usize, a: usize) -> bool {
        self.support[s * self.n_actions() + a]
    }

    /// Flat `[s][a]` support mask.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn has_full_support(&self) -> bool {
        self.support.iter().all(|&b| b)
    }
}

/// Lowest-index argmax over `(index, value)` pairs.
pub(crate) fn argmax(items: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in items {
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Bellman optimality backup T*Q.
pub fn optimality_backup(mdp: &TabularMdp, q: &QTable) -> QTable {
    let v = q.max_values();
    QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| mdp.backup_with(s, a, |n| v.0[n]))
}

/// Policy evaluation backup 𝒯^π Q.
pub fn evaluation_backup(mdp: &TabularMdp, q: &QTable, policy: &TabularPolicy) -> QTable {
    let v: Vec<f64> = (0..mdp.n_states())
        .map(|s| q.row(s).iter().zip(policy.row(s)).map(|(q, p)| p * q).sum())
        .collect();
    QTable::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| mdp.backup_with(s, a, |n| v[n]))
}

/// Iterates a γ-contraction from `q0` until successive sweeps differ by at
/// most `tol·(1−γ)/γ`. The returned table then has residual
/// ‖backup(Q) − Q‖∞ ≤ tol and lies within `tol` of the fixed point.
pub(crate) fn sweep_to_fixed_point(
    q0: QTable,
    discount: f64,
    tol: f64,
    mut backup: impl FnMut(&QTable) -> Result<QTable>,
) -> Result<QTable> {
    let threshold = tol * (1.0 - discount) / discount;
    let mut q = q0;
    loop {
        let next = backup(&q)?;
        let moved = next.sup_distance(&q);
        q = next;
        if moved <= threshold {
            return Ok(q);
        }
    }
}

/// Q* by repeated optimality backups; ‖T*Q − Q‖∞ ≤ tol on return.
pub fn value_iteration_oracle(mdp: &TabularMdp, tol: f64) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(BeeError::arg("tolerance must be positive"));
    }
    let q0 = QTable::zeros(mdp.n_states(), mdp.n_actions());
    sweep_to_fixed_point(q0, mdp.discount(), tol, |q| Ok(optimality_backup(mdp, q)))
}

/// Q^π by repeated evaluation backups; ‖𝒯^π Q − Q‖∞ ≤ tol on return.
pub fn exact_policy_evaluation(mdp: &TabularMdp, policy: &TabularPolicy, tol: f64) -> Result<QTable> {
    if !(tol > 0.0) {
        return Err(BeeError::arg("tolerance must be positive"));
    }
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(BeeError::arg("policy shape does not match the MDP"));
    }
    let q0 = QTable::zeros(mdp.n_states(), mdp.n_actions());
    sweep_to_fixed_point(q0, mdp.discount(), tol, |q| Ok(evaluation_backup(mdp, q, policy)))
}

/// Deterministic greedy policy, restricted to `support` (flat `[s][a]`) when
/// given. Ties go to the lowest action index.
pub fn greedy_policy(q: &QTable, support: Option<&[bool]>) -> Result<TabularPolicy> {
    let n_actions = q.n_actions();
    if let Some(mask) = support {
        if mask.len() != q.values().len() {
            return Err(BeeError::arg("support mask shape does not match the Q table"));
        }
    }
    let mut actions = Vec::with_capacity(q.n_states());
    for s in 0..q.n_states() {
        let allowed = |a: usize| support.is_none_or(|m| m[s * n_actions + a]);
        let best = argmax(q.row(s).iter().copied().enumerate().filter(|(a, _)| allowed(*a)))
            .ok_or_else(|| BeeError::arg(format!("state {s} has no supported action")))?;
        actions.push(best);
    }
    TabularPolicy::deterministic(n_actions, &actions)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// s0 --a1, r=1--> s1 (absorbing); s0 --a0, r=0--> s0.
    pub fn chain(discount: f64) -> TabularMdp {
        let transitions = vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)]];
        TabularMdp::new(2, 2, transitions, vec![0.0, 1.0, 0.0, 0.0], discount, vec![false, true])
            .unwrap()
    }

    /// One state, one action, reward `r`.
    pub fn single(r: f64, discount: f64) -> TabularMdp {
        TabularMdp::new(1, 1, vec![vec![(0, 1.0)]], vec![r], discount, vec![false]).unwrap()
    }
}
