use ndarray::{Array1, Array2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Stabilizer inside the tanh log-determinant correction.
pub const TANH_EPS: f64 = 1e-6;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7;

/// A reparameterized batch of squashed Gaussian draws, with what the
/// backward pass needs.
#[derive(Clone, Debug, PartialEq)]
pub struct SquashedSample {
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
    pub noise: Array2<f64>,
    std: Array2<f64>,
    /// 1 where `log_std` was inside the clamp range (gradient passes).
    ls_pass: Array2<f64>,
}

fn split(policy_out: &Array2<f64>) -> (usize, usize) {
    let cols = policy_out.ncols();
    assert!(cols.is_multiple_of(2) && cols > 0, "policy output must hold mean and log_std columns");
    (policy_out.nrows(), cols / 2)
}

/// Draws `u ~ N(mean, exp(log_std)²)` per row and squashes with tanh. The
/// policy output holds the means in its first half of columns and the log
/// standard deviations in the second half.
pub fn squashed_gaussian_sample<R: Rng + ?Sized>(policy_out: &Array2<f64>, rng: &mut R) -> SquashedSample {
    let (n, d) = split(policy_out);
    let noise = Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
    squashed_gaussian_from_noise(policy_out, noise)
}

/// The same map with the standard-normal noise supplied by the caller.
pub fn squashed_gaussian_from_noise(policy_out: &Array2<f64>, noise: Array2<f64>) -> SquashedSample {
    let (n, d) = split(policy_out);
    assert_eq!(noise.dim(), (n, d), "noise shape must match the action batch");
    let mut action = Array2::zeros((n, d));
    let mut std = Array2::zeros((n, d));
    let mut ls_pass = Array2::zeros((n, d));
    let mut log_prob = Array1::zeros(n);
    for i in 0..n {
        let mut lp = 0.0;
        for j in 0..d {
            let raw = policy_out[[i, d + j]];
            let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let s = ls.exp();
            let eps = noise[[i, j]];
            let a = (policy_out[[i, j]] + s * eps).tanh();
            lp += -0.5 * eps * eps - ls - HALF_LN_TAU - (1.0 - a * a + TANH_EPS).ln();
            action[[i, j]] = a;
            std[[i, j]] = s;
            ls_pass[[i, j]] = f64::from(u8::from(raw > LOG_STD_MIN && raw < LOG_STD_MAX));
        }
        log_prob[i] = lp;
    }
    SquashedSample {
        action,
        log_prob,
        noise,
        std,
        ls_pass,
    }
}

impl SquashedSample {
    /// Gradient with respect to the policy output of a scalar whose
    /// gradients with respect to the actions and log-probabilities are given.
    pub fn backward(&self, d_action: &Array2<f64>, d_log_prob: &Array1<f64>) -> Array2<f64> {
        let (n, d) = self.action.dim();
        let mut out = Array2::zeros((n, 2 * d));
        for i in 0..n {
            for j in 0..d {
                let a = self.action[[i, j]];
                let one_minus = 1.0 - a * a;
                // d log_prob / d u from the tanh correction term.
                let dlp_du = 2.0 * a * one_minus / (one_minus + TANH_EPS);
                let du = d_action[[i, j]] * one_minus + d_log_prob[i] * dlp_du;
                let s_eps = self.std[[i, j]] * self.noise[[i, j]];
                out[[i, j]] = du;
                out[[i, d + j]] = self.ls_pass[[i, j]] * (du * s_eps - d_log_prob[i]);
            }
        }
        out
    }
}

/// `tanh(mean)` per row: the noise-free action.
pub fn deterministic_action(policy_out: &Array2<f64>) -> Array2<f64> {
    let (n, d) = split(policy_out);
    let mut a = Array2::zeros((n, d));
    Zip::from(&mut a)
        .and(&policy_out.slice(ndarray::s![.., ..d]))
        .for_each(|x, &m| *x = m.tanh());
    a
}
