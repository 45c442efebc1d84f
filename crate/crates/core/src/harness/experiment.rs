//! Seeded experiment runs: training loop, scenarios, CSV and manifest output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AgentConfig, ExperimentConfig, Scenario};
use super::grid::{grid_compare, write_grid_results, GridCompareConfig};
use super::particle::{particle_compare, write_particle_results, ParticleCompareConfig};
use crate::bac::{evaluate_policy_in, BacAgent, BacRun};
use crate::diagnostics::{delta_mu_pi, monte_carlo_q, RunRecord};
use crate::env::{make_env, noisy_wrap, Environment};
use crate::mb::MbRun;
use crate::replay::{read_records, ReplayBuffer, Transition};
use crate::rng::{child, derive_seed};
use crate::{BeeError, Result};

/// Bumped whenever the CSV columns change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

const STREAM_EVAL: u64 = 7;
const STREAM_WRAP: u64 = 8;
const STREAM_MC: u64 = 9;
const STREAM_REINIT: u64 = 10;
const STREAM_DELTA: u64 = 11;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Added to every configured seed, for sharding across machines.
    pub seed_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub csv: Option<PathBuf>,
    pub rows: usize,
    pub injected: usize,
    /// `ok` or the error that stopped the run.
    pub status: String,
}

impl SeedOutcome {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub bee_version: String,
    pub csv_schema_version: u32,
    pub scenario: String,
    pub wall_time_secs: f64,
    pub seeds: Vec<SeedOutcome>,
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.seeds.iter().all(SeedOutcome::is_ok)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn csv_name(seed: u64) -> String {
    format!("seed_{seed}.csv")
}

fn scenario_name(s: &Scenario) -> &'static str {
    match s {
        Scenario::None => "none",
        Scenario::SerendipityInjection { .. } => "serendipity_injection",
        Scenario::CounteractFailure { .. } => "counteract_failure",
        Scenario::OperatorComparisonGrid { .. } => "operator_comparison_grid",
        Scenario::OperatorComparisonParticle { .. } => "operator_comparison_particle",
    }
}

/// Runs every seed (in parallel), writes one CSV per seed, the resolved
/// config and a manifest. Seeds that fail keep their partial CSV and are
/// marked in the manifest; check [`Manifest::all_ok`].
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Manifest> {
    cfg.validate()?;
    let dir = cfg.resolved_output_dir();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let started = Instant::now();
    let seeds: Vec<u64> = cfg.run.seeds.iter().map(|s| s + opts.seed_offset).collect();
    let outcomes = match &cfg.scenario {
        Scenario::OperatorComparisonGrid { lambdas } => run_grid_scenario(cfg, lambdas, &seeds, &dir)?,
        Scenario::OperatorComparisonParticle { operators, checkpoints } => {
            let pc = ParticleCompareConfig {
                operators: operators.clone(),
                checkpoints: checkpoints.clone(),
                seeds: seeds.clone(),
                ..ParticleCompareConfig::default()
            };
            let result = particle_compare(&pc, Some(&dir.join("heatmaps")))?;
            write_particle_results(&result, &dir.join("particle_compare.csv"))?;
            comparison_outcomes(&seeds)
        }
        _ => seeds.par_iter().map(|&seed| run_seed(cfg, seed, &dir)).collect(),
    };
    let manifest = Manifest {
        config_hash: cfg.hash(),
        bee_version: env!("CARGO_PKG_VERSION").to_string(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        scenario: scenario_name(&cfg.scenario).to_string(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        seeds: outcomes,
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn comparison_outcomes(seeds: &[u64]) -> Vec<SeedOutcome> {
    seeds
        .iter()
        .map(|&seed| SeedOutcome {
            seed,
            csv: None,
            rows: 0,
            injected: 0,
            status: "ok".into(),
        })
        .collect()
}

fn run_grid_scenario(cfg: &ExperimentConfig, lambdas: &[f64], seeds: &[u64], dir: &Path) -> Result<Vec<SeedOutcome>> {
    let layout = cfg.env.spec.layout()?;
    let gc = GridCompareConfig {
        lambdas: lambdas.to_vec(),
        seeds: seeds.to_vec(),
        horizon: cfg.env.spec.horizon,
        ..GridCompareConfig::default()
    };
    let results = grid_compare(&layout, &gc)?;
    write_grid_results(&layout, &results, dir)?;
    Ok(comparison_outcomes(seeds))
}

enum Learner {
    Bac(Box<BacRun>),
    Mb(Box<MbRun>),
}

impl Learner {
    fn agent(&self) -> &BacAgent {
        match self {
            Self::Bac(r) => &r.agent,
            Self::Mb(r) => &r.agent,
        }
    }

    fn buffer(&self) -> &ReplayBuffer {
        match self {
            Self::Bac(r) => &r.buffer,
            Self::Mb(r) => &r.real,
        }
    }
}

/// Builds the configured environment, wrapped with action noise when set.
pub fn build_env(cfg: &ExperimentConfig, seed: u64, stream: u64) -> Result<Box<dyn Environment>> {
    let env = make_env(&cfg.env.spec, derive_seed(seed, stream))?;
    match cfg.env.noise_sigma {
        Some(sigma) if sigma > 0.0 => Ok(Box::new(noisy_wrap(env, sigma, derive_seed(derive_seed(seed, stream), STREAM_WRAP))?)),
        _ => Ok(env),
    }
}

/// Splits a flat transition list into trajectories at terminal flags.
fn split_trajectories(items: Vec<Transition>) -> Vec<Vec<Transition>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for t in items {
        let end = t.terminated;
        current.push(t);
        if end {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Reads a replay dump for injection; an empty file yields no trajectories.
pub fn load_trajectories(path: &Path, state_dim: usize, action_dim: usize) -> Result<Vec<Vec<Transition>>> {
    let bytes = std::fs::read(path)?;
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let (sd, ad, items) = read_records(&mut bytes.as_slice())?;
    if (sd, ad) != (state_dim, action_dim) {
        return Err(BeeError::Format(format!(
            "trajectory file has dims ({sd}, {ad}), the environment needs ({state_dim}, {action_dim})"
        )));
    }
    Ok(split_trajectories(items))
}

/// Applies a triggered scenario to a model-free run and returns the number
/// of injected transitions.
pub fn scenario_apply(scenario: &Scenario, run: &mut BacRun, seed: u64) -> Result<usize> {
    match scenario {
        Scenario::CounteractFailure { step } => {
            run.agent
                .reinitialize_networks(derive_seed(derive_seed(seed, STREAM_REINIT), *step as u64))?;
            Ok(0)
        }
        Scenario::SerendipityInjection { trajectory_file, .. } => {
            let path = super::config::resolve_output(trajectory_file);
            let trajectories = load_trajectories(&path, run.buffer.state_dim(), run.buffer.action_dim())?;
            if trajectories.is_empty() {
                log::warn!("trajectory file {} is empty; nothing injected", path.display());
                return Ok(0);
            }
            run.inject(&trajectories)
        }
        _ => Ok(0),
    }
}

#[derive(Default)]
struct IntervalMeans {
    n: usize,
    lambda: f64,
    alpha: f64,
    loss_q: f64,
    loss_v: f64,
    loss_pi: f64,
}

impl IntervalMeans {
    fn add(&mut self, r: &RunRecord) {
        self.n += 1;
        self.lambda += r.lambda_used.unwrap_or(0.0);
        self.alpha += r.alpha.unwrap_or(0.0);
        self.loss_q += r.loss_q.unwrap_or(0.0);
        self.loss_v += r.loss_v.unwrap_or(0.0);
        self.loss_pi += r.loss_pi.unwrap_or(0.0);
    }

    fn fill(&mut self, rec: &mut RunRecord) {
        if self.n > 0 {
            let n = self.n as f64;
            rec.lambda_used = Some(self.lambda / n);
            rec.alpha = Some(self.alpha / n);
            rec.loss_q = Some(self.loss_q / n);
            rec.loss_v = Some(self.loss_v / n);
            rec.loss_pi = Some(self.loss_pi / n);
        }
        *self = Self::default();
    }
}

struct Evaluator {
    eval_env: Box<dyn Environment>,
    mc_env: Box<dyn Environment>,
    seed: u64,
    mc_supported: bool,
}

impl Evaluator {
    fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            eval_env: build_env(cfg, seed, STREAM_EVAL)?,
            mc_env: build_env(cfg, seed, STREAM_MC)?,
            seed,
            mc_supported: true,
        })
    }

    fn record(&mut self, cfg: &ExperimentConfig, learner: &Learner, step: u64) -> Result<RunRecord> {
        let agent = learner.agent();
        let eval = evaluate_policy_in(agent, self.eval_env.as_mut(), cfg.run.eval_episodes)?;
        let mut rec = RunRecord {
            step,
            episode_return: Some(eval.mean_return),
            success: Some(eval.success_rate),
            seed: self.seed,
            ..RunRecord::default()
        };
        let buffer = learner.buffer();
        let tag = derive_seed(self.seed, step);
        rec.delta_mu_pi = Some(delta_mu_pi(agent, buffer, 256, &mut child(tag, STREAM_DELTA))?);
        if cfg.run.mc_pairs > 0 && self.mc_supported {
            let picks = buffer.sample_batch(cfg.run.mc_pairs, &mut child(tag, STREAM_MC))?;
            let space = self.mc_env.action_space();
            let pairs: Vec<(Vec<f64>, Vec<f64>)> =
                picks.iter().map(|t| (t.state.clone(), space.from_unit(&t.action))).collect();
            let policy = |obs: &[f64], rng: &mut crate::rng::SeedRng| space.from_unit(&agent.act(obs, false, rng));
            match monte_carlo_q(
                self.mc_env.as_mut(),
                policy,
                &pairs,
                cfg.run.mc_rollouts,
                agent.config().gamma,
                cfg.env.spec.horizon,
                tag,
            ) {
                Ok(mc) => {
                    let rows = |f: &dyn Fn(&Transition) -> &[f64]| {
                        let width = f(&picks[0]).len();
                        Array2::from_shape_vec((picks.len(), width), picks.iter().flat_map(|t| f(t).to_vec()).collect())
                            .expect("uniform widths")
                    };
                    let q = agent.online_q(&rows(&|t| &t.state), &rows(&|t| &t.action));
                    let q_mean = q.mean().unwrap_or(0.0);
                    let mc_mean = mc.iter().sum::<f64>() / mc.len() as f64;
                    rec = rec.with_estimates(Some(q_mean), Some(mc_mean));
                }
                Err(BeeError::Capability(what)) => {
                    log::warn!("environment lacks {what}; estimation-gap columns left empty");
                    self.mc_supported = false;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(rec)
    }
}

struct CsvSink {
    out: BufWriter<File>,
    rows: usize,
}

impl CsvSink {
    fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", RunRecord::CSV_HEADER)?;
        out.flush()?;
        Ok(Self { out, rows: 0 })
    }

    fn write(&mut self, rec: &RunRecord) -> Result<()> {
        writeln!(self.out, "{}", rec.to_csv_row())?;
        self.out.flush()?;
        self.rows += 1;
        Ok(())
    }
}

fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> SeedOutcome {
    let path = dir.join(csv_name(seed));
    let mut outcome = SeedOutcome {
        seed,
        csv: Some(path.clone()),
        rows: 0,
        injected: 0,
        status: "ok".into(),
    };
    let mut sink = match CsvSink::create(&path) {
        Ok(s) => s,
        Err(e) => {
            outcome.status = e.to_string();
            outcome.csv = None;
            return outcome;
        }
    };
    if let Err(e) = train_seed(cfg, seed, &mut sink, &mut outcome.injected) {
        log::error!("seed {seed} stopped: {e}");
        outcome.status = e.to_string();
    }
    outcome.rows = sink.rows;
    outcome
}

/// The per-seed training loop. Rows are written as they are produced so a
/// failure keeps everything up to the last evaluation.
fn train_seed(cfg: &ExperimentConfig, seed: u64, sink: &mut CsvSink, injected: &mut usize) -> Result<()> {
    let env = build_env(cfg, seed, crate::bac::STREAM_ENV)?;
    let mut evaluator = Evaluator::new(cfg, seed)?;
    let every = cfg.run.eval_every as u64;
    let total = cfg.run.total_steps as u64;
    let mut means = IntervalMeans::default();
    match &cfg.agent {
        AgentConfig::Bac(bac) => {
            let mut run = BacRun::new(bac.clone(), env, seed)?;
            let trigger = cfg.scenario.trigger_step().map(|s| s as u64);
            if trigger == Some(0) {
                *injected += scenario_apply(&cfg.scenario, &mut run, seed)?;
            }
            let mut learner = Learner::Bac(Box::new(run));
            for step in 1..=total {
                let Learner::Bac(run) = &mut learner else { unreachable!() };
                let rec = run.train_iteration()?;
                means.add(&rec);
                if trigger == Some(step) {
                    *injected += scenario_apply(&cfg.scenario, run, seed)?;
                }
                if step % every == 0 {
                    let mut row = evaluator.record(cfg, &learner, step)?;
                    means.fill(&mut row);
                    sink.write(&row)?;
                }
            }
        }
        AgentConfig::Mb { bac, mb } => {
            let run = MbRun::new(bac.clone(), mb.clone(), env, seed)?;
            let mut learner = Learner::Mb(Box::new(run));
            let mut next_eval = every;
            loop {
                let Learner::Mb(run) = &mut learner else { unreachable!() };
                let rec = run.mb_epoch()?;
                means.add(&rec);
                let steps = rec.step;
                if steps >= next_eval {
                    let mut row = evaluator.record(cfg, &learner, steps)?;
                    means.fill(&mut row);
                    sink.write(&row)?;
                    while next_eval <= steps {
                        next_eval += every;
                    }
                }
                if steps >= total {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Loads every per-seed CSV in `dir`, keyed by file name.
pub fn read_run_csvs(dir: &Path) -> Result<Vec<(String, Vec<RunRecord>)>> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    let mut out = Vec::new();
    for path in names {
        let text = std::fs::read_to_string(&path)?;
        let mut lines = text.lines();
        if lines.next() != Some(RunRecord::CSV_HEADER) {
            continue;
        }
        let rows = lines.filter(|l| !l.is_empty()).map(RunRecord::from_csv_row).collect::<Result<Vec<_>>>()?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        out.push((name, rows));
    }
    Ok(out)
}
