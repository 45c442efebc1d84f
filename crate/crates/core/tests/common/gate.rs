//! Analytic gradients of every training loss against central finite
//! differences at random parameter points.

use ndarray::Array1;
use rand::Rng;

use bee_core::mb::{DynamicsEnsemble, EnsembleSpec};
use bee_core::nn::{concat_cols, Activation, NetParams};
use bee_core::rng::seeded;
use bee_core::{BacAgent, BacConfig, ValueLoss};

use super::{central_diff, max_rel_err, random_batch, random_matrix};

pub const POINTS: u64 = 100;
pub const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-6;
const H: f64 = 1e-5;
const SD: usize = 3;
const AD: usize = 2;
const N: usize = 8;

/// Worst relative error over all points. `point(seed)` returns the analytic
/// gradient, the parameters and the loss as a function of the parameters.
pub fn worst_error<F>(point: F) -> f64
where
    F: Fn(u64) -> (Vec<f64>, Vec<f64>, Box<dyn Fn(&[f64]) -> f64>),
{
    (0..POINTS)
        .map(|seed| {
            let (analytic, x, f) = point(seed);
            max_rel_err(&analytic, &central_diff(f, &x, H), FLOOR)
        })
        .fold(0.0, f64::max)
}

fn agent(seed: u64, value_loss: ValueLoss) -> BacAgent {
    let cfg = BacConfig {
        hidden_sizes: vec![12, 12],
        activation: Activation::Tanh,
        value_loss,
        expectile_tau: 0.7,
        value_alpha: 2.0,
        init_alpha: 0.3,
        ..BacConfig::default()
    };
    BacAgent::new(cfg, SD, AD, 1000 + seed).unwrap()
}

fn with_params(net: &NetParams, flat: &[f64]) -> NetParams {
    let mut n = net.clone();
    n.set_flat(flat).unwrap();
    n
}

pub fn value_loss_error(loss: ValueLoss) -> f64 {
    worst_error(|seed| {
        let a = agent(seed, loss);
        let mut rng = seeded(seed);
        let states = random_matrix(&mut rng, N, SD, 1.0);
        let q = Array1::from_shape_simple_fn(N, || rng.random_range(-2.0..2.0));
        let (_, g) = a.value_loss_grad(&states, &q).unwrap();
        let x = a.value_net().to_flat();
        let f = move |p: &[f64]| {
            let mut b = a.clone();
            *b.value_net_mut() = with_params(a.value_net(), p);
            b.value_loss_grad(&states, &q).unwrap().0
        };
        (g.to_flat(), x, Box::new(f))
    })
}

pub fn td_loss_error() -> f64 {
    worst_error(|seed| {
        let a = agent(seed, ValueLoss::Expectile);
        let mut rng = seeded(seed);
        let b = random_batch(&mut rng, N, SD, AD, 0.2);
        let y = Array1::from_shape_simple_fn(N, || rng.random_range(-2.0..2.0));
        let (_, g) = a.critic_loss_grad(0, &b.states, &b.actions, &y, None).unwrap();
        let x = a.critics().0.to_flat();
        let f = move |p: &[f64]| {
            let mut c = a.clone();
            *c.critics_mut().0 = with_params(a.critics().0, p);
            c.critic_loss_grad(0, &b.states, &b.actions, &y, None).unwrap().0
        };
        (g.to_flat(), x, Box::new(f))
    })
}

pub fn policy_loss_error() -> f64 {
    worst_error(|seed| {
        let a = agent(seed, ValueLoss::Expectile);
        let mut rng = seeded(seed);
        let states = random_matrix(&mut rng, N, SD, 1.0);
        let noise = random_matrix(&mut rng, N, AD, 2.0);
        let (_, g) = a.policy_loss_grad(&states, &noise).unwrap();
        let x = a.policy_net().to_flat();
        let f = move |p: &[f64]| {
            let mut c = a.clone();
            *c.policy_net_mut() = with_params(a.policy_net(), p);
            c.policy_loss_grad(&states, &noise).unwrap().0
        };
        (g.to_flat(), x, Box::new(f))
    })
}

pub fn nll_loss_error() -> f64 {
    worst_error(|seed| {
        let spec = EnsembleSpec {
            state_dim: SD,
            action_dim: AD,
            members: 2,
            hidden_sizes: vec![12, 12],
            lr: 1e-3,
            batch_size: N,
            activation: Activation::Tanh,
        };
        let e = DynamicsEnsemble::new(spec, seed).unwrap();
        let mut rng = seeded(seed);
        let b = random_batch(&mut rng, N, SD, AD, 0.0);
        let inputs = concat_cols(&b.states, &b.actions);
        let targets = DynamicsEnsemble::targets(&b);
        let (_, g) = e.member_nll(0, &inputs, &targets).unwrap();
        let x = e.members()[0].to_flat();
        let f = move |p: &[f64]| {
            let mut c = e.clone();
            c.members_mut()[0] = with_params(&e.members()[0], p);
            c.member_nll(0, &inputs, &targets).unwrap().0
        };
        (g.to_flat(), x, Box::new(f))
    })
}
