//! Scalar losses as `(value, gradient with respect to the prediction)`,
//! averaged over the batch.

use ndarray::{Array1, Array2, ArrayView1, Zip};

/// Exponent ceiling for the exponential value loss.
pub const EXP_CLIP: f64 = 20.0;
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 4.0;

/// Mean squared error `mean (pred − target)²`.
pub fn squared_error(pred: ArrayView1<f64>, target: ArrayView1<f64>) -> (f64, Array1<f64>) {
    weighted_squared_error(pred, target, None)
}

/// `Σ wᵢ (predᵢ − targetᵢ)² / n`; without weights every row counts 1.
pub fn weighted_squared_error(
    pred: ArrayView1<f64>,
    target: ArrayView1<f64>,
    weights: Option<ArrayView1<f64>>,
) -> (f64, Array1<f64>) {
    let n = pred.len() as f64;
    let diff = &pred - &target;
    let w = weights.map(|w| w.to_owned()).unwrap_or_else(|| Array1::ones(pred.len()));
    let loss = Zip::from(&diff).and(&w).fold(0.0, |acc, d, w| acc + w * d * d) / n;
    (loss, Zip::from(&diff).and(&w).map_collect(|d, w| 2.0 * w * d / n))
}

/// Asymmetric squared loss `mean |τ − 1(q − v < 0)|·(q − v)²`; its
/// minimizer over `v` is the τ-expectile of `q`.
pub fn expectile(v: ArrayView1<f64>, q: ArrayView1<f64>, tau: f64) -> (f64, Array1<f64>) {
    let n = v.len() as f64;
    let mut loss = 0.0;
    let grad = Zip::from(&v).and(&q).map_collect(|&v, &q| {
        let u = q - v;
        let w = if u < 0.0 { 1.0 - tau } else { tau };
        loss += w * u * u;
        -2.0 * w * u / n
    });
    (loss / n, grad)
}

/// Sparse in-sample value loss
/// `mean 1(z > 0)·z² + v/(2α)` with `z = 1 + (q − v)/(2α)`.
pub fn sparse_q(v: ArrayView1<f64>, q: ArrayView1<f64>, alpha: f64) -> (f64, Array1<f64>) {
    let n = v.len() as f64;
    let mut loss = 0.0;
    let grad = Zip::from(&v).and(&q).map_collect(|&v, &q| {
        let z = 1.0 + (q - v) / (2.0 * alpha);
        let pos = z.max(0.0);
        loss += pos * pos + v / (2.0 * alpha);
        (-pos / alpha + 1.0 / (2.0 * alpha)) / n
    });
    (loss / n, grad)
}

/// Exponential in-sample value loss `mean exp((q − v)/α) + v/α`, with the
/// exponent clipped at [`EXP_CLIP`].
pub fn exponential_q(v: ArrayView1<f64>, q: ArrayView1<f64>, alpha: f64) -> (f64, Array1<f64>) {
    let n = v.len() as f64;
    let mut loss = 0.0;
    let grad = Zip::from(&v).and(&q).map_collect(|&v, &q| {
        let x = (q - v) / alpha;
        let e = x.min(EXP_CLIP).exp();
        loss += e + v / alpha;
        let de = if x < EXP_CLIP { -e / alpha } else { 0.0 };
        (de + 1.0 / alpha) / n
    });
    (loss / n, grad)
}

/// Diagonal Gaussian negative log-likelihood without constants,
/// `mean_rows Σ_d (μ − y)²·exp(−lv) + lv`, with `lv` clamped to
/// `[LOG_VAR_MIN, LOG_VAR_MAX]`. Returns gradients for the means and the
/// raw log-variances.
pub fn gaussian_nll(mean: &Array2<f64>, log_var: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>, Array2<f64>) {
    let n = mean.nrows() as f64;
    let mut loss = 0.0;
    let mut d_mean = Array2::zeros(mean.dim());
    let mut d_lv = Array2::zeros(mean.dim());
    Zip::from(&mut d_mean)
        .and(&mut d_lv)
        .and(mean)
        .and(log_var)
        .and(target)
        .for_each(|dm, dl, &m, &raw, &y| {
            let lv = raw.clamp(LOG_VAR_MIN, LOG_VAR_MAX);
            let inv = (-lv).exp();
            let e = m - y;
            loss += e * e * inv + lv;
            *dm = 2.0 * e * inv / n;
            *dl = if raw > LOG_VAR_MIN && raw < LOG_VAR_MAX {
                (1.0 - e * e * inv) / n
            } else {
                0.0
            };
        });
    (loss / n, d_mean, d_lv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;
    use rand::Rng;

    fn check_1d(f: impl Fn(ArrayView1<f64>) -> (f64, Array1<f64>), v: Array1<f64>) {
        let (_, g) = f(v.view());
        for i in 0..v.len() {
            let mut up = v.clone();
            up[i] += 1e-6;
            let mut down = v.clone();
            down[i] -= 1e-6;
            let fd = (f(up.view()).0 - f(down.view()).0) / 2e-6;
            assert!((g[i] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn value_losses_have_exact_gradients() {
        let mut rng = seeded(4);
        let q = Array1::from_shape_simple_fn(8, || rng.random_range(-3.0..3.0));
        let v = Array1::from_shape_simple_fn(8, || rng.random_range(-3.0..3.0));
        check_1d(|v| expectile(v, q.view(), 0.7), v.clone());
        check_1d(|v| sparse_q(v, q.view(), 0.5), v.clone());
        check_1d(|v| exponential_q(v, q.view(), 2.0), v.clone());
        check_1d(|v| squared_error(v, q.view()), v.clone());
    }

    #[test]
    fn symmetric_expectile_is_mse_halved() {
        let v = array![1.0, 2.0];
        let q = array![0.0, 5.0];
        let (e, _) = expectile(v.view(), q.view(), 0.5);
        let (m, _) = squared_error(v.view(), q.view());
        assert!((e - 0.5 * m).abs() < 1e-15);
    }

    #[test]
    fn exponential_clip_caps_the_exponent() {
        let (loss, g) = exponential_q(array![0.0].view(), array![100.0].view(), 1.0);
        assert!((loss - EXP_CLIP.exp()).abs() < 1e-6);
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn nll_gradients_and_clamp() {
        let mut rng = seeded(9);
        let m = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-1.0..1.0));
        let lv = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-2.0..2.0));
        let y = Array2::from_shape_simple_fn((3, 2), || rng.random_range(-1.0..1.0));
        let (_, dm, dl) = gaussian_nll(&m, &lv, &y);
        for idx in ndarray::indices((3, 2)) {
            let bump = |a: &Array2<f64>, h: f64| {
                let mut b = a.clone();
                b[idx] += h;
                b
            };
            let fd_m = (gaussian_nll(&bump(&m, 1e-6), &lv, &y).0 - gaussian_nll(&bump(&m, -1e-6), &lv, &y).0) / 2e-6;
            let fd_l = (gaussian_nll(&m, &bump(&lv, 1e-6), &y).0 - gaussian_nll(&m, &bump(&lv, -1e-6), &y).0) / 2e-6;
            assert!((dm[idx] - fd_m).abs() < 1e-6);
            assert!((dl[idx] - fd_l).abs() < 1e-6);
        }
        let (_, _, dl) = gaussian_nll(&array![[0.0]], &array![[9.0]], &array![[1.0]]);
        assert_eq!(dl[[0, 0]], 0.0);
    }
}
