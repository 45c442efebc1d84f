#![allow(dead_code)]

pub mod diag;
pub mod expectile;
pub mod gate;
pub mod mb;
pub mod reduction;

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use bee_core::bac::{STREAM_INIT, STREAM_NOISE};
use bee_core::nn::{
    concat_cols, polyak_update, squashed_gaussian_from_noise, AdamConfig, NetParams, NetSpec, OptimState, ScalarAdam,
};
use bee_core::replay::Batch;
use bee_core::rng::{child, SeedRng};
use bee_core::BacConfig;

/// Largest |a − b| / max(|a|, |b|, floor) over paired entries.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central differences of `f` at `x`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let x0 = p[i];
            p[i] = x0 + h;
            let up = f(&p);
            p[i] = x0 - h;
            let down = f(&p);
            p[i] = x0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn random_matrix(rng: &mut SeedRng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..scale))
}

pub fn random_batch(rng: &mut SeedRng, n: usize, sd: usize, ad: usize, p_terminal: f64) -> Batch {
    Batch {
        states: random_matrix(rng, n, sd, 1.0),
        actions: random_matrix(rng, n, ad, 1.0),
        rewards: Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0)),
        next_states: random_matrix(rng, n, sd, 1.0),
        terminated: Array1::from_shape_simple_fn(n, || f64::from(u8::from(rng.random_bool(p_terminal)))),
    }
}

fn col(a: &Array2<f64>) -> Array1<f64> {
    a.column(0).to_owned()
}

/// Textbook soft actor-critic: twin critics with Polyak targets, entropy
/// bonus in the bootstrap, reparameterized policy step on min(Q1, Q2),
/// automatic temperature. Networks and noise come from the same streams a
/// blended agent with the same seed uses, so the two can be compared step
/// by step.
pub struct ReferenceSac {
    pub q1: NetParams,
    pub q2: NetParams,
    pub q1_target: NetParams,
    pub q2_target: NetParams,
    pub policy: NetParams,
    q1_opt: OptimState,
    q2_opt: OptimState,
    policy_opt: OptimState,
    pub log_alpha: f64,
    alpha_opt: ScalarAdam,
    noise: SeedRng,
    gamma: f64,
    rho: f64,
    ent_target: f64,
    sd: usize,
    ad: usize,
}

impl ReferenceSac {
    pub fn new(cfg: &BacConfig, sd: usize, ad: usize, seed: u64) -> Self {
        let mut init = child(seed, STREAM_INIT);
        let critic = NetSpec::new(sd + ad, &cfg.hidden_sizes, 1, cfg.activation);
        let q1 = NetParams::init(critic.clone(), &mut init).unwrap();
        let q2 = NetParams::init(critic, &mut init).unwrap();
        let policy = NetParams::init(NetSpec::new(sd, &cfg.hidden_sizes, 2 * ad, cfg.activation), &mut init).unwrap();
        let adam = AdamConfig::with_lr(cfg.lr);
        Self {
            q1_opt: OptimState::new(&q1, adam),
            q2_opt: OptimState::new(&q2, adam),
            policy_opt: OptimState::new(&policy, adam),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
            policy,
            log_alpha: cfg.init_alpha.ln(),
            alpha_opt: ScalarAdam::new(adam),
            noise: child(seed, STREAM_NOISE),
            gamma: cfg.gamma,
            rho: cfg.polyak_rho,
            ent_target: cfg.ent_target.unwrap_or(-(ad as f64)),
            sd,
            ad,
        }
    }

    fn draw(&mut self, n: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((n, self.ad), || self.noise.sample::<f64, _>(StandardNormal))
    }

    fn min_target(&self, s: &Array2<f64>, a: &Array2<f64>) -> Array1<f64> {
        let sa = concat_cols(s, a);
        let (a1, a2) = (col(&self.q1_target.forward(&sa)), col(&self.q2_target.forward(&sa)));
        Zip::from(&a1).and(&a2).map_collect(|x, y| x.min(*y))
    }

    pub fn targets(&mut self, b: &Batch) -> Array1<f64> {
        let eps = self.draw(b.len());
        let sample = squashed_gaussian_from_noise(&self.policy.forward(&b.next_states), eps);
        let q = self.min_target(&b.next_states, &sample.action);
        let alpha = self.log_alpha.exp();
        let mut y = Array1::zeros(b.len());
        for i in 0..b.len() {
            let soft = q[i] - alpha * sample.log_prob[i];
            y[i] = b.rewards[i] + self.gamma * (1.0 - b.terminated[i]) * soft;
        }
        y
    }

    fn fit(net: &mut NetParams, opt: &mut OptimState, sa: &Array2<f64>, y: &Array1<f64>) {
        let tape = net.forward_tape(sa);
        let n = y.len() as f64;
        let d = Array2::from_shape_fn((y.len(), 1), |(i, _)| 2.0 * (tape.output()[[i, 0]] - y[i]) / n);
        let (g, _) = net.backward(&tape, &d);
        opt.adam_step(net, &g).unwrap();
    }

    pub fn update(&mut self, b: &Batch) {
        let y = self.targets(b);
        let sa = concat_cols(&b.states, &b.actions);
        Self::fit(&mut self.q1, &mut self.q1_opt, &sa, &y);
        Self::fit(&mut self.q2, &mut self.q2_opt, &sa, &y);
        polyak_update(&mut self.q1_target, &self.q1, self.rho).unwrap();
        polyak_update(&mut self.q2_target, &self.q2, self.rho).unwrap();

        // Policy: minimize mean(α log π(a|s) − min Q(s, a)), a reparameterized.
        let n = b.len();
        let eps = self.draw(n);
        let tape = self.policy.forward_tape(&b.states);
        let sample = squashed_gaussian_from_noise(tape.output(), eps);
        let sa = concat_cols(&b.states, &sample.action);
        let (t1, t2) = (self.q1.forward_tape(&sa), self.q2.forward_tape(&sa));
        let (v1, v2) = (col(t1.output()), col(t2.output()));
        let alpha = self.log_alpha.exp();
        let pick2: Vec<bool> = (0..n).map(|i| v2[i] < v1[i]).collect();
        let d1 = Array2::from_shape_fn((n, 1), |(i, _)| if pick2[i] { 0.0 } else { -1.0 / n as f64 });
        let d2 = Array2::from_shape_fn((n, 1), |(i, _)| if pick2[i] { -1.0 / n as f64 } else { 0.0 });
        let (_, x1) = self.q1.backward(&t1, &d1);
        let (_, x2) = self.q2.backward(&t2, &d2);
        let d_action = &x1.slice(s![.., self.sd..]) + &x2.slice(s![.., self.sd..]);
        let d_lp = Array1::from_elem(n, alpha / n as f64);
        let d_out = sample.backward(&d_action, &d_lp);
        let (g, _) = self.policy.backward(&tape, &d_out);
        self.policy_opt.adam_step(&mut self.policy, &g).unwrap();

        let mean = sample.log_prob.iter().map(|lp| lp + self.ent_target).sum::<f64>() / n as f64;
        self.alpha_opt.step(&mut self.log_alpha, -alpha * mean);
    }
}

/// Mean over rows of the batch, used to reduce a column to a scalar.
pub fn mean(a: &Array1<f64>) -> f64 {
    a.mean_axis(Axis(0)).unwrap().into_scalar()
}
