//! Operator comparison on the grid maze.
//!
//! Each iteration collects one episode from the start cell with a softmax
//! policy over the current Q, records the visited (s, a) pairs, then applies
//! one blended backup sweep over every visited pair. Untried pairs keep their
//! optimistic initial value. The exploitation half bootstraps only from tried
//! actions; the exploration half takes the softmax policy's expectation over
//! all actions, so optimism about untried pairs flows back through it.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::heatmap::emit_heatmap;

use crate::env::MazeLayout;
use crate::mdp::{value_iteration_oracle, QTable, DEFAULT_TOL};
use crate::rng::child;
use crate::{BeeError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GridCompareConfig {
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub discount: f64,
    /// Softmax temperature of the behaviour policy.
    pub temperature: f64,
    /// Entropy weight ω in the exploration half.
    pub entropy_weight: f64,
    /// Starting value of every pair, kept by pairs never tried.
    pub initial_value: f64,
    pub horizon: usize,
    /// Iteration budget; a run that never reaches the optimal greedy policy
    /// reports `None`.
    pub max_sweeps: usize,
}

impl Default for GridCompareConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0, 0.5, 1.0],
            seeds: (0..10).collect(),
            discount: 0.95,
            temperature: 0.06,
            entropy_weight: 0.0,
            initial_value: 2.0,
            horizon: 100,
            max_sweeps: 250,
        }
    }
}

impl GridCompareConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(BeeError::arg("lambda grid must be non-empty with values in [0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(BeeError::arg("at least one seed is required"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) || !(self.temperature > 0.0) {
            return Err(BeeError::arg("discount must lie in (0, 1) and temperature be positive"));
        }
        if self.horizon == 0 || self.max_sweeps == 0 {
            return Err(BeeError::arg("horizon and sweep budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRunResult {
    pub lambda: f64,
    pub seed: u64,
    /// First sweep after which the greedy action is optimal on every free
    /// non-goal cell.
    pub sweeps_to_optimal: Option<usize>,
    /// Free cells never entered during the whole budget.
    pub unvisited_cells: usize,
    /// Per free cell, in layout order.
    pub visits: Vec<u64>,
    pub final_values: Vec<f64>,
    /// Greedy action per free cell at the end of the budget.
    pub final_greedy: Vec<usize>,
}

/// Optimal action sets from the exact solution, one mask per free cell.
pub fn optimal_actions(layout: &MazeLayout, discount: f64) -> Result<Vec<[bool; 4]>> {
    let mdp = layout.to_mdp(discount)?;
    let q = value_iteration_oracle(&mdp, DEFAULT_TOL)?;
    Ok((0..mdp.n_states())
        .map(|s| {
            let best = q.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut mask = [false; 4];
            for (a, m) in mask.iter_mut().enumerate() {
                *m = q.get(s, a) >= best - 1e-9;
            }
            mask
        })
        .collect())
}

fn softmax(row: &[f64], temperature: f64) -> [f64; 4] {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; 4];
    for (pi, &q) in p.iter_mut().zip(row) {
        *pi = ((q - m) / temperature).exp();
    }
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= z);
    p
}

fn greedy(row: &[f64]) -> usize {
    let mut best = 0;
    for a in 1..row.len() {
        if row[a] > row[best] {
            best = a;
        }
    }
    best
}

/// One blended sweep over the visited pairs. `next[s*4+a]` holds the
/// observed successor of a visited pair.
fn sweep(q: &QTable, next: &[Option<usize>], goal: usize, lambda: f64, cfg: &GridCompareConfig) -> QTable {
    let (discount, temperature, entropy_weight) = (cfg.discount, cfg.temperature, cfg.entropy_weight);
    let n = q.n_states();
    let visited_at = |s: usize| (0..4).filter(move |&a| next[s * 4 + a].is_some());
    let exploit: Vec<f64> = (0..n)
        .map(|s| {
            visited_at(s)
                .map(|a| q.get(s, a))
                .reduce(f64::max)
                .unwrap_or(cfg.initial_value)
        })
        .collect();
    let explore: Vec<f64> = (0..n)
        .map(|s| {
            let p = softmax(q.row(s), temperature);
            p.iter()
                .zip(q.row(s))
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, v)| p * (v - entropy_weight * p.ln()))
                .sum()
        })
        .collect();
    let mut out = q.clone();
    for s in 0..n {
        if s == goal {
            continue;
        }
        for a in 0..4 {
            if let Some(ns) = next[s * 4 + a] {
                let value = if ns == goal {
                    1.0
                } else {
                    let mut boot = (1.0 - lambda) * explore[ns];
                    if lambda > 0.0 {
                        boot += lambda * exploit[ns];
                    }
                    discount * boot
                };
                out.set(s, a, value);
            }
        }
    }
    out
}

/// Runs one (λ, seed) cell of the comparison.
pub fn run_grid_single(layout: &MazeLayout, cfg: &GridCompareConfig, lambda: f64, seed: u64) -> Result<GridRunResult> {
    let n = layout.n_free();
    let goal = layout.state_index(layout.goal().0, layout.goal().1).expect("goal is free");
    let start = layout.state_index(layout.start().0, layout.start().1).expect("start is free");
    let optimal = optimal_actions(layout, cfg.discount)?;
    let mut rng = child(seed, 0);
    let mut q = QTable::filled(n, 4, cfg.initial_value);
    let mut next: Vec<Option<usize>> = vec![None; n * 4];
    let mut visits = vec![0u64; n];
    let mut reached = None;
    for sweep_idx in 1..=cfg.max_sweeps {
        let mut s = start;
        visits[s] += 1;
        for _ in 0..cfg.horizon {
            let p = softmax(q.row(s), cfg.temperature);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut a = 3;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    a = i;
                    break;
                }
            }
            let cell = layout.free_cells()[s];
            let nc = layout.next_cell(cell, a);
            let ns = layout.state_index(nc.0, nc.1).expect("moves land on free cells");
            next[s * 4 + a] = Some(ns);
            visits[ns] += 1;
            s = ns;
            if s == goal {
                break;
            }
        }
        q = sweep(&q, &next, goal, lambda, cfg);
        if reached.is_none() && (0..n).filter(|&s| s != goal).all(|s| optimal[s][greedy(q.row(s))]) {
            reached = Some(sweep_idx);
        }
    }
    Ok(GridRunResult {
        lambda,
        seed,
        sweeps_to_optimal: reached,
        unvisited_cells: visits.iter().filter(|&&v| v == 0).count(),
        visits,
        final_values: q.max_values().0,
        final_greedy: (0..n).map(|s| greedy(q.row(s))).collect(),
    })
}

/// Every (λ, seed) combination, λ-major.
pub fn grid_compare(layout: &MazeLayout, cfg: &GridCompareConfig) -> Result<Vec<GridRunResult>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.lambdas.len() * cfg.seeds.len());
    for &lambda in &cfg.lambdas {
        for &seed in &cfg.seeds {
            out.push(run_grid_single(layout, cfg, lambda, seed)?);
        }
    }
    Ok(out)
}

/// Writes `grid_compare.csv` (one row per run) and, per run, a heatmap of
/// the final greedy values with walls at zero.
pub fn write_grid_results(layout: &MazeLayout, results: &[GridRunResult], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = String::from("lambda,seed,sweeps_to_optimal,unvisited_cells\n");
    for r in results {
        let sweeps = r.sweeps_to_optimal.map(|s| s.to_string()).unwrap_or_default();
        csv += &format!("{},{},{},{}\n", r.lambda, r.seed, sweeps, r.unvisited_cells);
        let grid: Vec<Vec<f64>> = (0..layout.rows())
            .map(|row| {
                (0..layout.cols())
                    .map(|col| layout.state_index(row, col).map_or(0.0, |s| r.final_values[s]))
                    .collect()
            })
            .collect();
        emit_heatmap(&grid, &dir.join(format!("grid_lambda{}_seed{}", r.lambda, r.seed)))?;
    }
    std::fs::write(dir.join("grid_compare.csv"), csv)?;
    Ok(())
}
