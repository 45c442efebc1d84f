use ndarray::{Array1, Array2};

use bee_core::nn::{forward_backward, losses, Activation, AdamConfig, NetParams, NetSpec, OptimState};
use bee_core::rng::seeded;
use bee_core::{BacAgent, BacConfig};

/// τ-expectile of equally weighted samples by bisection on the first-order
/// condition τ·Σ(q − v)₊ = (1 − τ)·Σ(v − q)₊.
pub fn expectile_by_bisection(samples: &[f64], tau: f64) -> f64 {
    let excess = |v: f64| {
        let up: f64 = samples.iter().map(|q| (q - v).max(0.0)).sum();
        let down: f64 = samples.iter().map(|q| (v - q).max(0.0)).sum();
        tau * up - (1.0 - tau) * down
    };
    let (mut lo, mut hi) = (samples.iter().cloned().fold(f64::INFINITY, f64::min), samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Value network regressed onto `samples` (all at one state) by the
/// expectile loss; any τ in (0, 1).
pub fn fit_expectile(samples: &[f64], tau: f64, steps: usize) -> f64 {
    let spec = NetSpec::new(2, &[16, 16], 1, Activation::Relu);
    let mut net = NetParams::init(spec, &mut seeded(11)).unwrap();
    let mut opt = OptimState::new(&net, AdamConfig::with_lr(1e-2));
    let states = Array2::zeros((samples.len(), 2));
    let q = Array1::from(samples.to_vec());
    for _ in 0..steps {
        let (_, g) = forward_backward(&net, &states, |out| {
            let (l, g) = losses::expectile(out.column(0), q.view(), tau);
            (l, g.insert_axis(ndarray::Axis(1)))
        })
        .unwrap();
        opt.adam_step(&mut net, &g).unwrap();
    }
    net.forward(&Array2::zeros((1, 2)))[[0, 0]]
}

pub fn agent_value(samples: &[f64], tau: f64) -> f64 {
    let cfg = BacConfig {
        expectile_tau: tau,
        lr: 1e-2,
        hidden_sizes: vec![16, 16],
        ..BacConfig::default()
    };
    let mut agent = BacAgent::new(cfg, 2, 1, 3).unwrap();
    let states = Array2::zeros((samples.len(), 2));
    let q = Array1::from(samples.to_vec());
    for _ in 0..4000 {
        agent.update_value_toward(&states, &q).unwrap();
    }
    agent.state_value(&Array2::zeros((1, 2)))[0]
}
