//! Dense MLPs with an exact reverse-mode tape, Adam, Polyak averaging, the
//! tanh-squashed Gaussian head, the scalar losses used by the agents, and a
//! flat binary checkpoint format.

mod adam;
mod checkpoint;
mod gaussian;
pub mod losses;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{BeeError, Result};

pub use adam::{AdamConfig, OptimState, ScalarAdam};
pub use checkpoint::{load_params, read_params, save_params, write_params};
pub use gaussian::{
    deterministic_action, squashed_gaussian_from_noise, squashed_gaussian_sample, SquashedSample, LOG_STD_MAX,
    LOG_STD_MIN, TANH_EPS,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => f64::from(u8::from(pre > 0.0)),
            Activation::Tanh => 1.0 - pre.tanh().powi(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl NetSpec {
    pub fn new(input_dim: usize, hidden_sizes: &[usize], output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden_sizes: hidden_sizes.to_vec(),
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(BeeError::arg("network dimensions must be positive"));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend(&self.hidden_sizes);
        w.push(self.output_dim);
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`, so a batch maps as `x · W + b`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    spec: NetSpec,
    layers: Vec<Dense>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// Input to every layer (the batch itself first).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation output of every layer; the last one is the net output.
    pre: Vec<Array2<f64>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.pre.last().expect("a net has at least one layer")
    }

    /// Index of the first layer whose output holds a non-finite value.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.pre.iter().position(|p| p.iter().any(|v| !v.is_finite()))
    }
}

impl NetParams {
    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn init<R: Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let widths = spec.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    weight: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound)),
                    bias: Array1::from_shape_simple_fn(w[1], || rng.random_range(-bound..bound)),
                }
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn zeros(spec: NetSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .widths()
            .windows(2)
            .map(|w| Dense {
                weight: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.spec.clone()).expect("spec already validated")
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Every parameter tensor as a contiguous slice, in declaration order
    /// (weight then bias, layer by layer).
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.layers.iter().flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> + '_ {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(BeeError::arg(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                values.len()
            )));
        }
        let mut rest = values;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &NetParams) -> bool {
        self.spec.widths() == other.spec.widths()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha · other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &NetParams) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(alpha, &b.weight);
            a.bias.scaled_add(alpha, &b.bias);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weight) + &layer.bias;
            if i < last {
                let act = self.spec.activation;
                z.mapv_inplace(|v| act.apply(v));
            }
            h = z;
        }
        h
    }

    pub fn forward_tape(&self, x: &Array2<f64>) -> Tape {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.weight) + &layer.bias;
            let next = if i < last {
                let act = self.spec.activation;
                z.mapv(|v| act.apply(v))
            } else {
                z.clone()
            };
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Tape { inputs, pre }
    }

    /// Gradients of a scalar with respect to every parameter and to the
    /// batch input, given its gradient `d_out` with respect to the output.
    pub fn backward(&self, tape: &Tape, d_out: &Array2<f64>) -> (NetParams, Array2<f64>) {
        let mut grads = self.zeros_like();
        let mut dz = d_out.clone();
        for i in (0..self.layers.len()).rev() {
            let g = &mut grads.layers[i];
            g.weight = tape.inputs[i].t().dot(&dz).as_standard_layout().into_owned();
            g.bias = dz.sum_axis(Axis(0));
            let d_in = dz.dot(&self.layers[i].weight.t());
            if i == 0 {
                return (grads, d_in);
            }
            let act = self.spec.activation;
            dz = d_in;
            Zip::from(&mut dz)
                .and(&tape.pre[i - 1])
                .for_each(|d, &p| *d *= act.derivative(p));
        }
        unreachable!("a net has at least one layer")
    }
}

/// Loss value and exact parameter gradients. `loss_fn` maps the network
/// output to the scalar loss and its gradient with respect to that output.
pub fn forward_backward<F>(params: &NetParams, inputs: &Array2<f64>, loss_fn: F) -> Result<(f64, NetParams)>
where
    F: FnOnce(&Array2<f64>) -> (f64, Array2<f64>),
{
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(BeeError::arg("network inputs must be finite"));
    }
    let tape = params.forward_tape(inputs);
    if let Some(layer) = tape.first_non_finite_layer() {
        return Err(BeeError::numeric("forward pass", Some(layer)));
    }
    let (loss, d_out) = loss_fn(tape.output());
    if !loss.is_finite() {
        return Err(BeeError::numeric("loss", Some(params.layers.len() - 1)));
    }
    let (grads, _) = params.backward(&tape, &d_out);
    Ok((loss, grads))
}

/// `target ← (1 − rho)·target + rho·online`, elementwise.
pub fn polyak_update(target: &mut NetParams, online: &NetParams, rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(BeeError::arg(format!("polyak rho must lie in [0, 1], got {rho}")));
    }
    if !target.same_shape(online) {
        return Err(BeeError::arg("polyak update needs matching network shapes"));
    }
    for (t, o) in target.tensors_mut().zip(online.tensors()) {
        for (a, b) in t.iter_mut().zip(o) {
            *a += rho * (b - *a);
        }
    }
    Ok(())
}

/// Rows of a slice-of-rows input, for single-sample calls.
pub fn row_matrix(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, values.len()), values.to_vec()).expect("one row")
}

/// Horizontal concatenation `[a | b]` of two batches with equal row counts.
pub fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn tanh_spec() -> NetSpec {
        NetSpec::new(3, &[5, 4], 2, Activation::Tanh)
    }

    fn half_sq(out: &Array2<f64>) -> (f64, Array2<f64>) {
        let n = out.nrows() as f64;
        (out.iter().map(|v| v * v).sum::<f64>() / n, out.mapv(|v| 2.0 * v / n))
    }

    #[test]
    fn zero_weights_leave_bias_only() {
        let mut p = NetParams::zeros(NetSpec::new(2, &[3], 2, Activation::Relu)).unwrap();
        p.layers_mut()[1].bias = Array1::from(vec![0.5, -1.5]);
        let x = Array2::from_shape_vec((4, 2), vec![1.0, 2.0, -3.0, 0.5, 0.0, 0.0, 7.0, -7.0]).unwrap();
        let (loss, g) = forward_backward(&p, &x, half_sq).unwrap();
        assert!((loss - (0.25 + 2.25)).abs() < 1e-12);
        let b = &g.layers()[1].bias;
        assert!((b[0] - 2.0 * 0.5).abs() < 1e-12 && (b[1] - 2.0 * -1.5).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(1);
        let p = NetParams::init(tanh_spec(), &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((6, 3), || rng.random_range(-1.0..1.0));
        let (_, g) = forward_backward(&p, &x, half_sq).unwrap();
        let flat = p.to_flat();
        let g = g.to_flat();
        let h = 1e-5;
        for i in 0..flat.len() {
            let mut q = p.clone();
            let mut v = flat.clone();
            v[i] += h;
            q.set_flat(&v).unwrap();
            let up = half_sq(&q.forward(&x)).0;
            v[i] -= 2.0 * h;
            q.set_flat(&v).unwrap();
            let down = half_sq(&q.forward(&x)).0;
            let fd = (up - down) / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeded(2);
        let p = NetParams::init(tanh_spec(), &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((2, 3), || rng.random_range(-1.0..1.0));
        let tape = p.forward_tape(&x);
        let (_, d_out) = half_sq(tape.output());
        let (_, dx) = p.backward(&tape, &d_out);
        for r in 0..2 {
            for c in 0..3 {
                let mut a = x.clone();
                a[[r, c]] += 1e-5;
                let mut b = x.clone();
                b[[r, c]] -= 1e-5;
                let fd = (half_sq(&p.forward(&a)).0 - half_sq(&p.forward(&b)).0) / 2e-5;
                assert!((dx[[r, c]] - fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn duplicated_rows_match_reweighting() {
        let mut rng = seeded(3);
        let p = NetParams::init(tanh_spec(), &mut rng).unwrap();
        let x = Array2::from_shape_simple_fn((3, 3), || rng.random_range(-1.0..1.0));
        let doubled = concat_rows(&x, &x);
        let (a, ga) = forward_backward(&p, &x, half_sq).unwrap();
        let (b, gb) = forward_backward(&p, &doubled, half_sq).unwrap();
        assert!((a - b).abs() < 1e-12);
        for (u, v) in ga.to_flat().iter().zip(gb.to_flat()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    fn concat_rows(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
        ndarray::concatenate(Axis(0), &[a.view(), b.view()]).unwrap()
    }

    #[test]
    fn non_finite_values_report_the_layer() {
        let mut p = NetParams::init(tanh_spec(), &mut seeded(0)).unwrap();
        p.layers_mut()[1].bias[0] = f64::NAN;
        let x = Array2::zeros((2, 3));
        match forward_backward(&p, &x, half_sq) {
            Err(BeeError::Numeric { layer, .. }) => assert_eq!(layer, Some(1)),
            other => panic!("expected numeric error, got {other:?}"),
        }
        let p = NetParams::init(tanh_spec(), &mut seeded(0)).unwrap();
        let r = forward_backward(&p, &x, |o| (f64::INFINITY, o.clone()));
        assert!(matches!(r, Err(BeeError::Numeric { layer: Some(2), .. })));
    }

    #[test]
    fn polyak_extremes_and_affine() {
        let spec = NetSpec::new(1, &[2], 1, Activation::Relu);
        let mut target = NetParams::zeros(spec.clone()).unwrap();
        let mut online = NetParams::zeros(spec).unwrap();
        let ones = vec![1.0; online.n_params()];
        online.set_flat(&ones).unwrap();
        let before = target.clone();
        polyak_update(&mut target, &online, 0.0).unwrap();
        assert_eq!(target, before);
        polyak_update(&mut target, &online, 0.005).unwrap();
        assert!(target.to_flat().iter().all(|v| (v - 0.005).abs() < 1e-15));
        polyak_update(&mut target, &online, 1.0).unwrap();
        assert_eq!(target, online);
        assert!(polyak_update(&mut target, &online, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn polyak_contracts_toward_online(seed in 0u64..1000, rho in 0.0f64..=1.0) {
            let mut rng = seeded(seed);
            let mut target = NetParams::init(tanh_spec(), &mut rng).unwrap();
            let online = NetParams::init(tanh_spec(), &mut rng).unwrap();
            let dist = |t: &NetParams| {
                let mut d = t.clone();
                d.add_scaled(-1.0, &online);
                d.l2_norm()
            };
            let before = dist(&target);
            polyak_update(&mut target, &online, rho).unwrap();
            prop_assert!((dist(&target) - (1.0 - rho) * before).abs() < 1e-12);
        }
    }
}
