//! Operator comparison on the random-walk particle task.
//!
//! A fixed buffer of uniform-random moves is collected once per seed and
//! binned into grid cells and angle bins. Both operators then sweep the
//! resulting empirical model from Q = 0; the learned cell values
//! `max_a Q(cell, a)` are compared against the exact oracle.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::heatmap::emit_heatmap;
use crate::env::{make_env, EnvSpec, ANGLE_BINS, ParticleGrid, ParticleOracle, ParticleParams};
use crate::mdp::DEFAULT_TOL;
use crate::rng::{child, derive_seed};
use crate::{BeeError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleOperator {
    /// λ = 0.5 blend of the support max and the policy expectation.
    Bee,
    /// Policy expectation only.
    Standard,
}

impl ParticleOperator {
    pub fn lambda(self) -> f64 {
        match self {
            Self::Bee => 0.5,
            Self::Standard => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bee => "bee",
            Self::Standard => "standard",
        }
    }
}

impl std::fmt::Display for ParticleOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ParticleOperator {
    type Err = BeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bee" => Ok(Self::Bee),
            "standard" => Ok(Self::Standard),
            other => Err(BeeError::arg(format!("unknown operator `{other}` (expected bee or standard)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCompareConfig {
    pub operators: Vec<ParticleOperator>,
    pub checkpoints: Vec<usize>,
    pub seeds: Vec<u64>,
    pub resolution: usize,
    pub gamma: f64,
    pub transitions: usize,
    /// Spawn rectangle used while filling the buffer.
    pub spawn: [f64; 4],
    /// Softmax temperature of the evaluated policy.
    pub temperature: f64,
}

impl Default for ParticleCompareConfig {
    fn default() -> Self {
        Self {
            operators: vec![ParticleOperator::Bee, ParticleOperator::Standard],
            checkpoints: vec![100, 200, 500],
            seeds: (0..10).collect(),
            resolution: 20,
            gamma: 0.99,
            transitions: 100_000,
            spawn: [6.0, 1.0, 10.0, 9.0],
            temperature: 0.05,
        }
    }
}

impl ParticleCompareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.operators.is_empty() || self.seeds.is_empty() {
            return Err(BeeError::arg("need at least one operator and one seed"));
        }
        if self.checkpoints.is_empty() || self.checkpoints.contains(&0) {
            return Err(BeeError::arg("checkpoints must be positive iteration counts"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) || !(self.temperature > 0.0) || self.transitions == 0 {
            return Err(BeeError::arg("gamma must lie in (0, 1); temperature and transitions must be positive"));
        }
        ParticleParams {
            spawn: self.spawn,
            ..ParticleParams::default()
        }
        .validate()?;
        ParticleGrid::new(self.resolution, ParticleParams::default()).map(|_| ())
    }
}

/// Binned random-walk data: per (cell, bin) the successor counts, with
/// `None` marking a terminal landing in the hole.
#[derive(Clone, Debug)]
pub struct EmpiricalModel {
    pub n_cells: usize,
    /// Indexed `cell * ANGLE_BINS + bin`.
    successors: Vec<Vec<(Option<usize>, u32)>>,
    reward_sum: Vec<f64>,
    counts: Vec<u32>,
    pub successes: usize,
}

impl EmpiricalModel {
    pub fn is_supported(&self, cell: usize, bin: usize) -> bool {
        self.counts[cell * ANGLE_BINS + bin] > 0
    }

    pub fn n_transitions(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }
}

/// Fills a buffer of `cfg.transitions` uniform-random moves and bins it.
pub fn collect_random_walk(cfg: &ParticleCompareConfig, seed: u64) -> Result<EmpiricalModel> {
    let grid = ParticleGrid::new(cfg.resolution, ParticleParams::default())?;
    let mut spec = EnvSpec::particle_hole();
    spec.particle.spawn = cfg.spawn;
    let mut env = make_env(&spec, derive_seed(seed, 0))?;
    let mut rng = child(seed, 1);
    let n = grid.n_cells();
    let mut successors: Vec<Vec<(Option<usize>, u32)>> = vec![Vec::new(); n * ANGLE_BINS];
    let mut reward_sum = vec![0.0; n * ANGLE_BINS];
    let mut counts = vec![0u32; n * ANGLE_BINS];
    let mut successes = 0;
    let mut obs = env.reset();
    for _ in 0..cfg.transitions {
        let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let step = env.step(&[theta])?;
        let idx = grid.cell_of(obs[0], obs[1]) * ANGLE_BINS + grid.angle_bin(theta);
        let next = if step.terminated {
            None
        } else {
            Some(grid.cell_of(step.observation[0], step.observation[1]))
        };
        match successors[idx].iter_mut().find(|(c, _)| *c == next) {
            Some((_, k)) => *k += 1,
            None => successors[idx].push((next, 1)),
        }
        reward_sum[idx] += step.reward;
        counts[idx] += 1;
        if step.success {
            successes += 1;
        }
        obs = if step.terminated || step.truncated { env.reset() } else { step.observation };
    }
    Ok(EmpiricalModel {
        n_cells: n,
        successors,
        reward_sum,
        counts,
        successes,
    })
}

/// Sweeps `q` (cells × bins) with the blended operator over the empirical
/// model. Unsupported pairs stay at zero.
pub fn empirical_sweep(model: &EmpiricalModel, q: &[f64], lambda: f64, gamma: f64, temperature: f64) -> Vec<f64> {
    let n = model.n_cells;
    let mut exploit = vec![0.0; n];
    let mut explore = vec![0.0; n];
    for s in 0..n {
        let row = &q[s * ANGLE_BINS..(s + 1) * ANGLE_BINS];
        let supported: Vec<usize> = (0..ANGLE_BINS).filter(|&a| model.is_supported(s, a)).collect();
        if supported.is_empty() {
            continue;
        }
        let m = supported.iter().map(|&a| row[a]).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = supported.iter().map(|&a| ((row[a] - m) / temperature).exp()).collect();
        let z: f64 = weights.iter().sum();
        exploit[s] = m;
        explore[s] = supported.iter().zip(&weights).map(|(&a, w)| w / z * row[a]).sum();
    }
    let mut out = q.to_vec();
    for (idx, next) in model.successors.iter().enumerate() {
        let count = model.counts[idx];
        if count == 0 {
            continue;
        }
        let boot: f64 = next
            .iter()
            .map(|&(ns, k)| match ns {
                None => 0.0,
                Some(ns) => k as f64 * (lambda * exploit[ns] + (1.0 - lambda) * explore[ns]),
            })
            .sum();
        out[idx] = (model.reward_sum[idx] + gamma * boot) / count as f64;
    }
    out
}

/// Cell values `max` over supported bins, zero where nothing is supported.
pub fn cell_values(model: &EmpiricalModel, q: &[f64]) -> Vec<f64> {
    (0..model.n_cells)
        .map(|s| {
            (0..ANGLE_BINS)
                .filter(|&a| model.is_supported(s, a))
                .map(|a| q[s * ANGLE_BINS + a])
                .reduce(f64::max)
                .unwrap_or(0.0)
        })
        .collect()
}

pub fn mean_abs_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Reshapes row-major cell values (row = y) into a grid with y increasing
/// upwards, as a picture is read.
pub fn to_image_rows(values: &[f64], resolution: usize) -> Vec<Vec<f64>> {
    (0..resolution)
        .rev()
        .map(|row| values[row * resolution..(row + 1) * resolution].to_vec())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParticleCheckpoint {
    pub operator: ParticleOperator,
    pub seed: u64,
    pub iteration: usize,
    pub mae: f64,
}

#[derive(Clone, Debug)]
pub struct ParticleCompareResult {
    pub checkpoints: Vec<ParticleCheckpoint>,
    /// Successful transitions in each seed's buffer, in seed order.
    pub successes: Vec<usize>,
}

impl ParticleCompareResult {
    pub fn mae(&self, operator: ParticleOperator, seed: u64, iteration: usize) -> Option<f64> {
        self.checkpoints
            .iter()
            .find(|c| c.operator == operator && c.seed == seed && c.iteration == iteration)
            .map(|c| c.mae)
    }
}

pub fn particle_oracle(cfg: &ParticleCompareConfig) -> Result<ParticleOracle> {
    crate::env::particle_oracle_q(cfg.resolution, cfg.gamma, DEFAULT_TOL)
}

/// Runs every operator on every seed's buffer. With `out_dir` set, writes a
/// heatmap pair per (operator, seed, checkpoint) plus one for the oracle.
pub fn particle_compare(cfg: &ParticleCompareConfig, out_dir: Option<&Path>) -> Result<ParticleCompareResult> {
    cfg.validate()?;
    let oracle = particle_oracle(cfg)?;
    let truth = oracle.cell_values();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        emit_heatmap(&to_image_rows(&truth, cfg.resolution), &dir.join("oracle"))?;
    }
    let last = *cfg.checkpoints.iter().max().expect("validated non-empty");
    let mut checkpoints = Vec::new();
    let mut successes = Vec::new();
    for &seed in &cfg.seeds {
        let model = collect_random_walk(cfg, seed)?;
        successes.push(model.successes);
        for &op in &cfg.operators {
            let mut q = vec![0.0; model.n_cells * ANGLE_BINS];
            for it in 1..=last {
                q = empirical_sweep(&model, &q, op.lambda(), cfg.gamma, cfg.temperature);
                if cfg.checkpoints.contains(&it) {
                    let values = cell_values(&model, &q);
                    checkpoints.push(ParticleCheckpoint {
                        operator: op,
                        seed,
                        iteration: it,
                        mae: mean_abs_error(&values, &truth),
                    });
                    if let Some(dir) = out_dir {
                        let stem = dir.join(format!("{}_seed{seed}_iter{it}", op.name()));
                        emit_heatmap(&to_image_rows(&values, cfg.resolution), &stem)?;
                    }
                }
            }
        }
    }
    Ok(ParticleCompareResult { checkpoints, successes })
}

/// One row per (operator, seed, checkpoint).
pub fn write_particle_results(result: &ParticleCompareResult, path: &Path) -> Result<()> {
    let mut csv = String::from("operator,seed,iteration,mae\n");
    for c in &result.checkpoints {
        csv += &format!("{},{},{},{}\n", c.operator.name(), c.seed, c.iteration, c.mae);
    }
    std::fs::write(path, csv)?;
    Ok(())
}
