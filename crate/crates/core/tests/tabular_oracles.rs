//! Tabular operators against a brute-force oracle: enumerate every
//! deterministic policy, solve its Bellman linear system exactly, and take
//! the pointwise best.

use proptest::prelude::*;

use bee_core::bee::{bee_backup, bee_policy_evaluation, bee_policy_iteration, exploit_backup, explore_backup};
use bee_core::mdp::{value_iteration_oracle, DEFAULT_TOL};
use bee_core::{BlendConfig, MixturePolicy, QTable, TabularMdp, TabularPolicy};

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

fn state_values(mdp: &TabularMdp, actions: &[usize]) -> Vec<f64> {
    let (ns, g) = (mdp.n_states(), mdp.discount());
    let mut a = vec![vec![0.0; ns]; ns];
    let mut b = vec![0.0; ns];
    for s in 0..ns {
        a[s][s] += 1.0;
        if mdp.is_terminal(s) {
            continue;
        }
        b[s] = mdp.reward(s, actions[s]);
        for &(n, p) in mdp.successors(s, actions[s]) {
            a[s][n] -= g * p;
        }
    }
    solve(a, b)
}

fn brute_force_q_star(mdp: &TabularMdp) -> QTable {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut best = vec![f64::NEG_INFINITY; ns];
    let mut actions = vec![0usize; ns];
    loop {
        for (b, v) in best.iter_mut().zip(state_values(mdp, &actions)) {
            *b = b.max(v);
        }
        // Odometer over all na^ns deterministic policies.
        let mut i = 0;
        while i < ns {
            actions[i] += 1;
            if actions[i] < na {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
        if i == ns {
            break;
        }
    }
    QTable::from_fn(ns, na, |s, a| {
        if mdp.is_terminal(s) {
            0.0
        } else {
            mdp.backup_with(s, a, |n| best[n])
        }
    })
}

fn small_mdp(seed: u64) -> TabularMdp {
    let ns = 2 + (seed % 4) as usize;
    let na = 2 + (seed % 2) as usize;
    TabularMdp::random(ns, na, 0.6 + 0.035 * (seed % 10) as f64, seed).unwrap()
}

#[test]
fn value_iteration_matches_policy_enumeration() {
    for seed in 0..20 {
        let mdp = small_mdp(seed);
        let d = value_iteration_oracle(&mdp, DEFAULT_TOL).unwrap().sup_distance(&brute_force_q_star(&mdp));
        assert!(d < 1e-8, "seed {seed}: {d}");
    }
}

#[test]
fn blended_policy_iteration_reaches_the_enumerated_optimum() {
    for seed in 0..20 {
        let mdp = small_mdp(seed);
        let oracle = brute_force_q_star(&mdp);
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let cfg = BlendConfig::new(lambda, 0.0).unwrap();
            let pi = bee_policy_iteration(&mdp, &cfg, 200, DEFAULT_TOL).unwrap();
            assert!(pi.converged);
            let d = pi.q.sup_distance(&oracle);
            assert!(d < 1e-6, "seed {seed}, λ={lambda}: {d}");
        }
    }
}

/// s0 --a1, r=1--> s1 (absorbing, terminal); s0 --a0, r=0--> s0.
fn chain(gamma: f64) -> TabularMdp {
    TabularMdp::new(
        2,
        2,
        vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)]],
        vec![0.0, 1.0, 0.0, 0.0],
        gamma,
        vec![false, true],
    )
    .unwrap()
}

#[test]
fn chain_optimum_by_hand() {
    let q = brute_force_q_star(&chain(0.5));
    assert_eq!(q.row(0), &[0.5, 1.0]);
    assert_eq!(q.row(1), &[0.0, 0.0]);
    let pi = bee_policy_iteration(&chain(0.5), &BlendConfig::new(0.5, 0.0).unwrap(), 50, DEFAULT_TOL).unwrap();
    assert_eq!(pi.policy.mode(0), 1);
}

/// One state leading deterministically to a second with q(s') = [1, 3].
fn one_step() -> (TabularMdp, QTable) {
    let mdp = TabularMdp::new(
        2,
        2,
        vec![vec![(1, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)]],
        vec![0.0; 4],
        0.9,
        vec![false, false],
    )
    .unwrap();
    let q = QTable::from_vec(2, 2, vec![0.0, 0.0, 1.0, 3.0]).unwrap();
    (mdp, q)
}

#[test]
fn one_step_backups_by_hand() {
    let (mdp, q) = one_step();
    let full = MixturePolicy::single(TabularPolicy::uniform(2, 2));
    assert!((exploit_backup(&mdp, &q, &full).unwrap().get(0, 0) - 2.7).abs() < 1e-12);
    let first_only = MixturePolicy::single(TabularPolicy::deterministic(2, &[0, 0]).unwrap());
    assert!((exploit_backup(&mdp, &q, &first_only).unwrap().get(0, 0) - 0.9).abs() < 1e-12);
    let uniform = TabularPolicy::uniform(2, 2);
    let plain = explore_backup(&mdp, &q, &uniform, &BlendConfig::new(0.5, 0.0).unwrap()).unwrap().get(0, 0);
    assert!((plain - 1.8).abs() < 1e-12);
    let bonus = explore_backup(&mdp, &q, &uniform, &BlendConfig::new(0.5, 1.0).unwrap()).unwrap().get(0, 0);
    assert!((bonus - plain - 0.9 * 2f64.ln()).abs() < 1e-12);
}

fn q_from(values: &[f64], ns: usize, na: usize) -> QTable {
    QTable::from_vec(ns, na, values[..ns * na].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blended_backup_is_a_monotone_contraction(
        seed in 0u64..1000,
        lambda in 0.0f64..=1.0,
        ent in 0.0f64..2.0,
        a in proptest::collection::vec(-5.0f64..5.0, 30),
        bump in proptest::collection::vec(0.0f64..3.0, 30),
    ) {
        let mdp = small_mdp(seed);
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let q1 = q_from(&a, ns, na);
        let raised: Vec<f64> = a.iter().zip(&bump).map(|(x, b)| x + b).collect();
        let q2 = q_from(&raised, ns, na);
        let mu = MixturePolicy::new(
            vec![TabularPolicy::uniform(ns, na), TabularPolicy::deterministic(na, &vec![0; ns]).unwrap()],
            vec![0.5, 0.5],
        ).unwrap();
        let pi = TabularPolicy::boltzmann(&q1, 0.7).unwrap();
        let cfg = BlendConfig::new(lambda, ent).unwrap();
        let b1 = bee_backup(&mdp, &q1, &mu, &pi, &cfg).unwrap();
        let b2 = bee_backup(&mdp, &q2, &mu, &pi, &cfg).unwrap();
        prop_assert!(b1.sup_distance(&b2) <= mdp.discount() * q1.sup_distance(&q2) + 1e-12);
        for (x, y) in b1.values().iter().zip(b2.values()) {
            prop_assert!(x <= &(y + 1e-12));
        }
    }

    #[test]
    fn blend_weight_is_affine(seed in 0u64..1000, lambda in 0.0f64..=1.0, a in proptest::collection::vec(-5.0f64..5.0, 30)) {
        let mdp = small_mdp(seed);
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let q = q_from(&a, ns, na);
        let mu = MixturePolicy::single(TabularPolicy::uniform(ns, na));
        let pi = TabularPolicy::boltzmann(&q, 1.0).unwrap();
        let at = |l: f64| bee_backup(&mdp, &q, &mu, &pi, &BlendConfig::new(l, 0.3).unwrap()).unwrap();
        let (lo, hi, mid) = (at(0.0), at(1.0), at(lambda));
        for i in 0..ns * na {
            let expect = lambda * hi.values()[i] + (1.0 - lambda) * lo.values()[i];
            prop_assert!((mid.values()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_rises_with_exploitation_weight(seed in 0u64..1000, l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0) {
        // π inside μ's support, no entropy term: the supported max dominates
        // the policy expectation, so more weight on it can only raise Q.
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let mdp = small_mdp(seed);
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mu = MixturePolicy::single(TabularPolicy::uniform(ns, na));
        let pi = TabularPolicy::uniform(ns, na);
        let q0 = QTable::zeros(ns, na);
        let fix = |l: f64| bee_policy_evaluation(&mdp, &q0, &mu, &pi, &BlendConfig::new(l, 0.0).unwrap(), DEFAULT_TOL).unwrap();
        let (a, b) = (fix(lo), fix(hi));
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!(x <= &(y + 1e-8));
        }
    }
}
