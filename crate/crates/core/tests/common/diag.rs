//! Constructed snapshots with known value gaps.

use bee_core::diagnostics::delta_mu_pi;
use bee_core::rng::seeded;
use bee_core::{BacAgent, BacConfig, ReplayBuffer, Transition};

/// `V ≡ 3` and `Q(s, a) = 2 + a` for a ∈ [−1, 1], both critics identical.
fn constructed_agent() -> BacAgent {
    let cfg = BacConfig {
        hidden_sizes: vec![1],
        ..BacConfig::default()
    };
    let mut agent = BacAgent::new(cfg, 1, 1, 0).unwrap();
    agent.value_net_mut().set_flat(&[0.0, 0.0, 0.0, 3.0]).unwrap();
    // hidden = relu(a + 1), output = hidden + 1
    agent.set_critics_flat(&[0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
    agent
}

/// Every stored action is a = 1, the best one.
fn best_action_buffer() -> ReplayBuffer {
    let mut b = ReplayBuffer::new(16, 1, 1).unwrap();
    for k in 0..16 {
        b.push(Transition {
            state: vec![k as f64 / 16.0],
            action: vec![1.0],
            reward: 0.0,
            next_state: vec![0.0],
            terminated: false,
        })
        .unwrap();
    }
    b
}

/// Policy symmetric about a = 0, so E[Q] = 2 while V = 3: expect 1.
pub fn under_exploitation_delta(seed: u64) -> f64 {
    let mut agent = constructed_agent();
    agent.policy_net_mut().set_flat(&[0.0; 6]).unwrap();
    delta_mu_pi(&agent, &best_action_buffer(), 20_000, &mut seeded(seed)).unwrap()
}

/// Pre-squash mean 20 and log-std −20: the policy acts at a ≈ 1 where Q = V.
pub fn greedy_delta(seed: u64) -> f64 {
    let mut agent = constructed_agent();
    agent.policy_net_mut().set_flat(&[0.0, 0.0, 0.0, 0.0, 20.0, -20.0]).unwrap();
    delta_mu_pi(&agent, &best_action_buffer(), 256, &mut seeded(seed)).unwrap()
}
