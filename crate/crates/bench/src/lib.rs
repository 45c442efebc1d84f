//! Shared fixtures for the criterion benchmarks.

use ndarray::Array2;
use rand::Rng;

use bee_core::bac::BacRun;
use bee_core::env::{make_env, EnvSpec, RewardMode};
use bee_core::mdp::{MixturePolicy, QTable, TabularMdp, TabularPolicy};
use bee_core::rng::seeded;
use bee_core::BacConfig;

/// Random MDP with a random Q table, uniform π and a two-member mixture μ.
pub struct TabularFixture {
    pub mdp: TabularMdp,
    pub q: QTable,
    pub pi: TabularPolicy,
    pub mu: MixturePolicy,
}

pub fn tabular_fixture(n_states: usize, n_actions: usize, seed: u64) -> TabularFixture {
    let mdp = TabularMdp::random(n_states, n_actions, 0.95, seed).expect("valid sizes");
    let mut rng = seeded(seed);
    let q = QTable::from_vec(n_states, n_actions, (0..n_states * n_actions).map(|_| rng.random_range(-1.0..1.0)).collect())
        .expect("sized");
    let pi = TabularPolicy::uniform(n_states, n_actions);
    let greedy = TabularPolicy::deterministic(n_actions, &vec![0; n_states]).expect("in range");
    let mu = MixturePolicy::new(vec![pi.clone(), greedy], vec![0.5, 0.5]).expect("weights sum to one");
    TabularFixture { mdp, q, pi, mu }
}

pub fn random_inputs(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

/// A point-mass run already past warmup, so each iteration performs an update.
pub fn warmed_run(hidden: usize, batch: usize) -> BacRun {
    let cfg = BacConfig {
        hidden_sizes: vec![hidden, hidden],
        batch_size: batch,
        warmup_transitions: 500,
        ..BacConfig::default()
    };
    let env = make_env(&EnvSpec::point_mass(RewardMode::Dense), 0).expect("built-in env");
    let mut run = BacRun::new(cfg, env, 0).expect("valid config");
    for _ in 0..600 {
        run.train_iteration().expect("finite");
    }
    run
}
