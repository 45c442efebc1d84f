use ndarray::{Array1, Zip};

use super::LambdaMode;

/// Smoothing factor of the Bellman-error averages driving the adaptive mode.
pub const ADA_DECAY: f64 = 0.99;

/// `clip(now / prev, 0, 1)`.
pub fn ada_lambda(delta_now: f64, delta_prev: f64) -> f64 {
    if delta_prev <= 0.0 {
        return 1.0;
    }
    (delta_now / delta_prev).clamp(0.0, 1.0)
}

/// Per-row weights on the exploitation target for the min and max modes,
/// or the constant for the fixed and adaptive modes.
pub fn row_lambda(mode: LambdaMode, constant: f64, exploit: &Array1<f64>, explore: &Array1<f64>) -> Array1<f64> {
    match mode {
        LambdaMode::Fixed | LambdaMode::Ada => Array1::from_elem(exploit.len(), constant),
        LambdaMode::Min => Zip::from(exploit)
            .and(explore)
            .map_collect(|e, x| f64::from(u8::from(e <= x))),
        LambdaMode::Max => Zip::from(exploit)
            .and(explore)
            .map_collect(|e, x| f64::from(u8::from(e >= x))),
    }
}

/// Running state of the adaptive weight.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaState {
    /// Smoothed mean absolute Bellman error after the latest batch.
    pub delta_prev: Option<f64>,
    /// Weight used on the latest batch.
    pub current: f64,
}

impl LambdaState {
    pub fn new(initial: f64) -> Self {
        Self {
            delta_prev: None,
            current: initial,
        }
    }

    /// Folds in this batch's mean absolute Bellman error and returns the
    /// weight for the batch. The first batch keeps the initial weight.
    pub fn advance(&mut self, bellman_error: f64) -> f64 {
        let lambda = match self.delta_prev {
            None => {
                self.delta_prev = Some(bellman_error);
                self.current
            }
            Some(prev) => {
                let now = ADA_DECAY * prev + (1.0 - ADA_DECAY) * bellman_error;
                self.delta_prev = Some(now);
                ada_lambda(now, prev)
            }
        };
        self.current = lambda;
        lambda
    }
}
