use rand_distr::{Distribution, Normal};

use super::{EnvSpec, Environment, StepResult};
use crate::rng::{seeded, SeedRng};
use crate::{BeeError, Result};

/// Adds `N(0, σ²)` noise to every continuous action before the wrapped
/// environment clips and executes it.
pub struct NoisyAction {
    inner: Box<dyn Environment>,
    sigma: f64,
    rng: SeedRng,
}

impl std::fmt::Debug for NoisyAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NoisyAction")
            .field("kind", &self.inner.spec().kind)
            .field("sigma", &self.sigma)
            .finish()
    }
}

pub fn noisy_wrap(inner: Box<dyn Environment>, sigma: f64, seed: u64) -> Result<NoisyAction> {
    if inner.action_space().is_discrete() {
        return Err(BeeError::arg("action noise needs a continuous action space"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(BeeError::arg(format!("action noise sigma must be finite and >= 0, got {sigma}")));
    }
    Ok(NoisyAction {
        inner,
        sigma,
        rng: seeded(seed),
    })
}

impl NoisyAction {
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The perturbed action, before clipping. With σ = 0 the action is
    /// returned unchanged and no randomness is consumed.
    pub fn perturb(&mut self, action: &[f64]) -> Vec<f64> {
        if self.sigma == 0.0 {
            return action.to_vec();
        }
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated at construction");
        action.iter().map(|a| a + normal.sample(&mut self.rng)).collect()
    }

    pub fn into_inner(self) -> Box<dyn Environment> {
        self.inner
    }
}

impl Environment for NoisyAction {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.inner.reset()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let noisy = self.perturb(action);
        self.inner.step(&noisy)
    }

    fn state(&self) -> Vec<f64> {
        self.inner.state()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        self.inner.set_state(state)
    }

    fn is_terminal_observation(&self, observation: &[f64]) -> bool {
        self.inner.is_terminal_observation(observation)
    }

    fn observation_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.inner.observation_bounds()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_env, RewardMode};

    fn point_mass() -> Box<dyn Environment> {
        make_env(&EnvSpec::point_mass(RewardMode::Dense), 0).unwrap()
    }

    #[test]
    fn zero_sigma_is_the_identity() {
        let mut plain = point_mass();
        let mut noisy = noisy_wrap(point_mass(), 0.0, 9).unwrap();
        plain.reset();
        noisy.reset();
        for i in 0..50 {
            let a = [(i as f64 * 0.3).sin(), (i as f64 * 0.7).cos()];
            assert_eq!(plain.step(&a).unwrap(), noisy.step(&a).unwrap());
        }
    }

    #[test]
    fn noise_statistics_match_sigma() {
        let mut noisy = noisy_wrap(point_mass(), 0.3, 2).unwrap();
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| noisy.perturb(&[0.0, 0.0])[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var.sqrt() - 0.3).abs() < 0.01);
    }

    #[test]
    fn perturbed_actions_are_clipped_by_the_inner_env() {
        let mut noisy = noisy_wrap(point_mass(), 5.0, 1).unwrap();
        noisy.reset();
        let clipped = (0..100).filter(|_| noisy.step(&[0.9, 0.9]).map(|r| r.action_clipped).unwrap_or(false)).count();
        assert!(clipped > 50);
    }

    #[test]
    fn discrete_envs_and_bad_sigma_are_rejected() {
        let grid = make_env(&EnvSpec::grid_maze(), 0).unwrap();
        assert!(matches!(noisy_wrap(grid, 0.1, 0), Err(BeeError::Argument(_))));
        assert!(noisy_wrap(point_mass(), -1.0, 0).is_err());
        assert!(noisy_wrap(point_mass(), f64::NAN, 0).is_err());
    }
}
