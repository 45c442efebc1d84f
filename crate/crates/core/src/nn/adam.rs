use serde::{Deserialize, Serialize};

use super::NetParams;
use crate::{BeeError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

fn adam_apply(cfg: &AdamConfig, step: u64, p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]) {
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// Adam moments for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub config: AdamConfig,
    pub step: u64,
    m: NetParams,
    v: NetParams,
}

impl OptimState {
    pub fn new(params: &NetParams, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn first_moment(&self) -> &NetParams {
        &self.m
    }

    pub fn second_moment(&self) -> &NetParams {
        &self.v
    }

    /// One bias-corrected Adam step.
    pub fn adam_step(&mut self, params: &mut NetParams, grads: &NetParams) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.m) {
            return Err(BeeError::arg("adam step needs matching parameter, gradient and moment shapes"));
        }
        self.step += 1;
        let cfg = self.config;
        let step = self.step;
        let tensors = params.tensors_mut().zip(grads.tensors()).zip(self.m.tensors_mut().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            adam_apply(&cfg, step, p, g, m, v);
        }
        Ok(())
    }
}

/// Adam on a single scalar, for the entropy temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarAdam {
    pub config: AdamConfig,
    pub step: u64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: 0.0,
            v: 0.0,
        }
    }

    pub fn step(&mut self, value: &mut f64, grad: f64) {
        self.step += 1;
        let mut p = [*value];
        let (mut m, mut v) = ([self.m], [self.v]);
        adam_apply(&self.config, self.step, &mut p, &[grad], &mut m, &mut v);
        *value = p[0];
        self.m = m[0];
        self.v = v[0];
    }
}
