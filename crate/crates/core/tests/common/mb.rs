//! Model-based fixtures: a linear system with known dynamics and a
//! desk-scale end-to-end run.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use bee_core::mb::{DynamicsEnsemble, EnsembleSpec, MbRun};
use bee_core::env::{make_env, EnvSpec, RewardMode};
use bee_core::nn::Activation;
use bee_core::rng::seeded;
use bee_core::{BacConfig, MbConfig, ReplayBuffer, Transition};

/// `s' = 2s + a` in two state dimensions, reward `s₀ − a₀`, with optional
/// Gaussian noise on every regression target.
pub fn linear_buffer(n: usize, noise: f64, seed: u64) -> ReplayBuffer {
    let mut rng = seeded(seed);
    let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
    let eps = move |rng: &mut bee_core::rng::SeedRng| if noise > 0.0 { normal.sample(rng) } else { 0.0 };
    let mut buf = ReplayBuffer::new(n, 2, 2).unwrap();
    for _ in 0..n {
        let s: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let next = (0..2).map(|j| 2.0 * s[j] + a[j] + eps(&mut rng)).collect();
        let reward = s[0] - a[0] + eps(&mut rng);
        buf.push(Transition { state: s, action: a, reward, next_state: next, terminated: false }).unwrap();
    }
    buf
}

pub fn ensemble(seed: u64) -> DynamicsEnsemble {
    DynamicsEnsemble::new(
        EnsembleSpec {
            state_dim: 2,
            action_dim: 2,
            members: 3,
            hidden_sizes: vec![32, 32],
            lr: 3e-3,
            batch_size: 64,
            activation: Activation::Relu,
        },
        seed,
    )
    .unwrap()
}

pub fn linear_dynamics_error() -> f64 {
    let mut model = ensemble(1);
    model.train(&linear_buffer(5000, 0.0, 2), 60).unwrap();
    let mut rng = seeded(3);
    let states = Array2::from_shape_simple_fn((2000, 2), || rng.random_range(-1.0..1.0));
    let actions = Array2::from_shape_simple_fn((2000, 2), || rng.random_range(-1.0..1.0));
    let (next, _) = model.predict(&states, &actions);
    let truth = &states * 2.0 + &actions;
    (&next - &truth).mapv(f64::abs).mean().unwrap()
}

/// Mean returns of the episodes finished in the first and last epochs.
pub fn end_to_end_returns(seed: u64, epochs: usize) -> (f64, f64) {
    let agent = BacConfig {
        hidden_sizes: vec![32, 32],
        batch_size: 32,
        lr: 1e-3,
        warmup_transitions: 500,
        ..BacConfig::default()
    };
    let cfg = MbConfig {
        k_ensemble: 3,
        model_hidden: vec![32, 32],
        steps_per_epoch: 500,
        rollouts_per_update: 64,
        model_batch: 64,
        model_train_epochs: 2,
        ..MbConfig::default()
    };
    let env = make_env(&EnvSpec::point_mass(RewardMode::Dense), seed).unwrap();
    let mut run = MbRun::new(agent, cfg, env, seed).unwrap();
    let first = run.mb_epoch().unwrap().episode_return.unwrap();
    let mut last = first;
    for _ in 1..epochs {
        last = run.mb_epoch().unwrap().episode_return.unwrap_or(last);
    }
    (first, last)
}
