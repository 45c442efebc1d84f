//! Property checks of the tabular operators over seeded random MDPs, as
//! run by the `tabular-suite` command.

use rand::Rng;
use serde::Serialize;

use crate::bee::{bee_backup, bee_policy_iteration, bee_policy_evaluation, exploit_backup, explore_backup, BlendConfig};
use crate::mdp::{value_iteration_oracle, MixturePolicy, QTable, TabularMdp, TabularPolicy, DEFAULT_TOL};
use crate::rng::{derive_seed, seeded};
use crate::Result;

pub const SUITE_LAMBDAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for SuiteCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

pub fn random_q(ns: usize, na: usize, scale: f64, seed: u64) -> QTable {
    let mut rng = seeded(seed);
    let values = (0..ns * na).map(|_| rng.random_range(-scale..scale)).collect();
    QTable::from_vec(ns, na, values).expect("shape matches")
}

/// Full-support random policy.
pub fn random_policy(ns: usize, na: usize, seed: u64) -> TabularPolicy {
    let mut rng = seeded(seed);
    let mut probs = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        let w: Vec<f64> = (0..na).map(|_| rng.random_range(0.05..1.0)).collect();
        let t: f64 = w.iter().sum();
        probs.extend(w.iter().map(|x| x / t));
    }
    TabularPolicy::new(ns, na, probs).expect("rows normalised")
}

/// Random policy whose support at each state is a random non-empty subset.
pub fn random_sparse_policy(ns: usize, na: usize, seed: u64) -> TabularPolicy {
    let mut rng = seeded(seed);
    let mut probs = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        let keep = rng.random_range(0..na);
        let w: Vec<f64> = (0..na)
            .map(|a| {
                if a == keep || rng.random_bool(0.5) {
                    rng.random_range(0.05..1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let t: f64 = w.iter().sum();
        probs.extend(w.iter().map(|x| x / t));
    }
    TabularPolicy::new(ns, na, probs).expect("rows normalised")
}

/// Mixture of one to three sparse random policies with uniform weights.
pub fn random_mixture(ns: usize, na: usize, seed: u64) -> MixturePolicy {
    let k = 1 + (derive_seed(seed, 99) % 3) as usize;
    let members: Vec<TabularPolicy> = (0..k).map(|i| random_sparse_policy(ns, na, derive_seed(seed, i as u64))).collect();
    MixturePolicy::new(members, vec![1.0 / k as f64; k]).expect("valid mixture")
}

/// A random MDP with 1..=10 states, 1..=5 actions and discount in [0.5, 0.99].
pub fn random_small_mdp(seed: u64) -> Result<TabularMdp> {
    let mut rng = seeded(derive_seed(seed, 1000));
    let ns = rng.random_range(1..=10);
    let na = rng.random_range(1..=5);
    let gamma = rng.random_range(0.5..=0.99);
    TabularMdp::random(ns, na, gamma, seed)
}

/// Worst excess of ‖𝓑Q1−𝓑Q2‖∞ over γ‖Q1−Q2‖∞ across `n_mdps` random MDPs,
/// `pairs` Q pairs each and every λ in [`SUITE_LAMBDAS`].
pub fn contraction_excess(n_mdps: usize, pairs: usize, seed: u64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for m in 0..n_mdps as u64 {
        let ms = derive_seed(seed, m);
        let mdp = random_small_mdp(ms)?;
        let (ns, na, gamma) = (mdp.n_states(), mdp.n_actions(), mdp.discount());
        let mu = random_mixture(ns, na, derive_seed(ms, 1));
        let pi = random_policy(ns, na, derive_seed(ms, 2));
        for p in 0..pairs as u64 {
            let q1 = random_q(ns, na, 10.0, derive_seed(ms, 10 + 2 * p));
            let q2 = random_q(ns, na, 10.0, derive_seed(ms, 11 + 2 * p));
            let gap = q1.sup_distance(&q2);
            for lambda in SUITE_LAMBDAS {
                let cfg = BlendConfig::new(lambda, 0.0)?;
                let d = bee_backup(&mdp, &q1, &mu, &pi, &cfg)?.sup_distance(&bee_backup(&mdp, &q2, &mu, &pi, &cfg)?);
                worst = worst.max(d - gamma * gap);
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalityStats {
    /// Largest sup-distance between the iteration's result and Q*.
    pub max_error: f64,
    /// Largest entrywise decrease between consecutive iterates.
    pub max_decrease: f64,
    pub all_converged: bool,
}

/// Blended policy iteration with ω = 0 against value iteration.
pub fn optimality_stats(n_mdps: usize, lambda: f64, seed: u64) -> Result<OptimalityStats> {
    let cfg = BlendConfig::new(lambda, 0.0)?;
    let mut stats = OptimalityStats {
        max_error: 0.0,
        max_decrease: 0.0,
        all_converged: true,
    };
    for m in 0..n_mdps as u64 {
        let mdp = random_small_mdp(derive_seed(seed, m))?;
        let oracle = value_iteration_oracle(&mdp, DEFAULT_TOL)?;
        let pi = bee_policy_iteration(&mdp, &cfg, 200, DEFAULT_TOL)?;
        stats.all_converged &= pi.converged;
        stats.max_error = stats.max_error.max(pi.q.sup_distance(&oracle));
        for w in pi.trace.windows(2) {
            for (a, b) in w[0].values().iter().zip(w[1].values()) {
                stats.max_decrease = stats.max_decrease.max(a - b);
            }
        }
    }
    Ok(stats)
}

/// Every suite check with its outcome.
pub fn run_tabular_suite(seed: u64) -> Result<Vec<SuiteCheck>> {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(SuiteCheck {
            name: name.into(),
            passed,
            detail,
        })
    };

    let excess = contraction_excess(50, 100, seed)?;
    push(
        "contraction",
        excess <= 1e-12,
        format!("worst ‖BQ1−BQ2‖ − γ‖Q1−Q2‖ = {excess:.3e} over 50 MDPs × 100 pairs × 5 lambdas"),
    );

    let mut opt_pass = true;
    let mut detail = Vec::new();
    for lambda in SUITE_LAMBDAS {
        let s = optimality_stats(50, lambda, seed)?;
        opt_pass &= s.all_converged && s.max_error <= 1e-6 && s.max_decrease <= 1e-9;
        detail.push(format!("λ={lambda}: err {:.1e}, drop {:.1e}", s.max_error, s.max_decrease));
    }
    push("policy iteration reaches Q* monotonically", opt_pass, detail.join("; "));

    let mut worst_linear = 0.0f64;
    let mut worst_full = 0.0f64;
    let mut worst_unique = 0.0f64;
    for m in 0..50u64 {
        let ms = derive_seed(seed, 5000 + m);
        let mdp = random_small_mdp(ms)?;
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mu = random_mixture(ns, na, derive_seed(ms, 1));
        let pi = random_policy(ns, na, derive_seed(ms, 2));
        let q = random_q(ns, na, 5.0, derive_seed(ms, 3));
        let cfg = BlendConfig::new(0.3, 0.0)?;
        let blended = bee_backup(&mdp, &q, &mu, &pi, &cfg)?;
        let ex = exploit_backup(&mdp, &q, &mu)?;
        let xp = explore_backup(&mdp, &q, &pi, &cfg)?;
        for s in 0..ns {
            for a in 0..na {
                worst_linear = worst_linear.max((blended.get(s, a) - (0.3 * ex.get(s, a) + 0.7 * xp.get(s, a))).abs());
            }
        }
        let full = MixturePolicy::single(random_policy(ns, na, derive_seed(ms, 4)));
        let greedy_free = bee_policy_evaluation(
            &mdp,
            &QTable::zeros(ns, na),
            &full,
            &pi,
            &BlendConfig::new(1.0, 0.0)?,
            DEFAULT_TOL,
        )?;
        worst_full = worst_full.max(greedy_free.sup_distance(&value_iteration_oracle(&mdp, DEFAULT_TOL)?));
        let a = bee_policy_evaluation(&mdp, &random_q(ns, na, 5.0, derive_seed(ms, 5)), &mu, &pi, &cfg, DEFAULT_TOL)?;
        let b = bee_policy_evaluation(&mdp, &random_q(ns, na, 5.0, derive_seed(ms, 6)), &mu, &pi, &cfg, DEFAULT_TOL)?;
        worst_unique = worst_unique.max(a.sup_distance(&b));
    }
    push(
        "blend is the pointwise convex combination",
        worst_linear <= 1e-12,
        format!("worst deviation {worst_linear:.1e}"),
    );
    push(
        "full-support exploitation fixed point equals Q*",
        worst_full <= 1e-8,
        format!("worst distance {worst_full:.1e}"),
    );
    push(
        "fixed point independent of the starting table",
        worst_unique <= 2.0 * 1e-8,
        format!("worst distance {worst_unique:.1e}"),
    );
    Ok(checks)
}
