//! Reduction identities: the blended agent at its λ endpoints against
//! direct computations.

use ndarray::Zip;
use rand::Rng;

use bee_core::nn::NetParams;
use bee_core::replay::ReplayBuffer;
use bee_core::rng::{child, seeded};
use bee_core::{BacAgent, BacConfig, Transition};

use super::{random_batch, ReferenceSac};

pub fn small_cfg(lambda: f64) -> BacConfig {
    BacConfig {
        lambda,
        hidden_sizes: vec![16, 16],
        batch_size: 32,
        lr: 1e-3,
        ..BacConfig::default()
    }
}

/// λ = 1: worst gap between agent targets and r + γ(1 − d)V(s′).
pub fn exploit_target_gap() -> f64 {
    let mut agent = BacAgent::new(small_cfg(1.0), 3, 2, 21).unwrap();
    let b = random_batch(&mut seeded(1), 32, 3, 2, 0.25);
    let t = agent.blended_targets(&b);
    let v = agent.value_net().forward(&b.next_states);
    let g = agent.config().gamma;
    (0..b.len())
        .map(|i| (t.target[i] - (b.rewards[i] + g * (1.0 - b.terminated[i]) * v[[i, 0]])).abs())
        .fold(0.0, f64::max)
}

/// λ = 0: worst gap between agent targets and soft Bellman targets over
/// five batches.
pub fn explore_target_gap() -> f64 {
    let cfg = small_cfg(0.0);
    let mut agent = BacAgent::new(cfg.clone(), 3, 2, 22).unwrap();
    let mut sac = ReferenceSac::new(&cfg, 3, 2, 22);
    (0..5)
        .map(|k| {
            let b = random_batch(&mut seeded(100 + k), 32, 3, 2, 0.25);
            let t = agent.blended_targets(&b).target;
            let r = sac.targets(&b);
            Zip::from(&t).and(&r).fold(0.0f64, |m, a, b| m.max((a - b).abs()))
        })
        .fold(0.0, f64::max)
}

fn max_diff(a: &NetParams, b: &NetParams) -> f64 {
    a.to_flat().iter().zip(b.to_flat()).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max)
}

/// λ = 0 training against the reference soft actor-critic under shared
/// seeds: worst parameter or log-temperature gap, checked every 25 updates.
pub fn soft_trajectory_gap(updates: usize) -> f64 {
    let (sd, ad) = (3, 2);
    let cfg = small_cfg(0.0);
    let mut agent = BacAgent::new(cfg.clone(), sd, ad, 7).unwrap();
    let mut sac = ReferenceSac::new(&cfg, sd, ad, 7);
    let mut buffer = ReplayBuffer::new(2000, sd, ad).unwrap();
    let mut rng = seeded(8);
    for _ in 0..2000 {
        buffer
            .push(Transition {
                state: (0..sd).map(|_| rng.random_range(-1.0..1.0)).collect(),
                action: (0..ad).map(|_| rng.random_range(-1.0..1.0)).collect(),
                reward: rng.random_range(-1.0..1.0),
                next_state: (0..sd).map(|_| rng.random_range(-1.0..1.0)).collect(),
                terminated: rng.random_bool(0.05),
            })
            .unwrap();
    }
    let mut batches = child(9, 0);
    let mut worst = 0.0f64;
    for step in 1..=updates {
        let b = buffer.sample_arrays(32, &mut batches).unwrap();
        agent.update(&b).unwrap();
        sac.update(&b);
        if step % 25 == 0 || step == updates {
            let (q1, q2) = agent.critics();
            worst = [max_diff(q1, &sac.q1), max_diff(q2, &sac.q2), max_diff(agent.policy_net(), &sac.policy)]
                .into_iter()
                .fold(worst.max((agent.log_alpha() - sac.log_alpha).abs()), f64::max);
        }
    }
    worst
}
