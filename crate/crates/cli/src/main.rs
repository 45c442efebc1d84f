use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use bee_core::env::{MazeLayout, DEFAULT_MAZE};
use bee_core::harness::config::resolve_output;
use bee_core::harness::grid::{grid_compare, write_grid_results, GridCompareConfig};
use bee_core::harness::particle::{particle_compare, write_particle_results, ParticleCompareConfig, ParticleOperator};
use bee_core::harness::report::{format_report, summarize_dir};
use bee_core::harness::tabular_suite::run_tabular_suite;
use bee_core::harness::{run_experiment, ExperimentConfig, RunOptions, OUTPUT_ROOT_VAR};
use bee_core::Result;

#[derive(Parser)]
#[command(name = "bee", version, about = "Blended exploitation/exploration experiments")]
struct Cli {
    /// Added to every seed, for sharding one seed list across machines.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config and write CSVs plus a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Property checks of the tabular operators on random MDPs.
    TabularSuite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweeps-to-optimal and coverage of the grid maze per lambda.
    GridCompare {
        #[arg(long = "lambda", value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0])]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Maze layout file; the built-in maze otherwise.
        #[arg(long)]
        maze: Option<PathBuf>,
        #[arg(long, default_value = "grid_compare")]
        out: PathBuf,
    },
    /// Q-value error against the particle oracle at iteration checkpoints.
    ParticleCompare {
        #[arg(long, value_delimiter = ',', default_values_t = [ParticleOperator::Bee, ParticleOperator::Standard])]
        operators: Vec<ParticleOperator>,
        #[arg(long, value_delimiter = ',', default_values_t = [100, 200, 500])]
        checkpoints: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value = "particle_compare")]
        out: PathBuf,
    },
    /// Summary statistics of the run CSVs in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn seed_list(n: u64, offset: u64) -> Vec<u64> {
    (offset..offset + n).collect()
}

fn out_dir(path: &Path) -> PathBuf {
    let dir = resolve_output(path);
    info!("writing to {} (root from ${OUTPUT_ROOT_VAR} when set)", dir.display());
    dir
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = run_experiment(&cfg, RunOptions { seed_offset: cli.seed_offset })?;
            for s in &manifest.seeds {
                println!("seed {}: {} rows, {} injected, {}", s.seed, s.rows, s.injected, s.status);
            }
            println!("output: {}", cfg.resolved_output_dir().display());
            Ok(manifest.all_ok())
        }
        Command::TabularSuite { seed } => {
            let checks = run_tabular_suite(seed + cli.seed_offset)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::GridCompare { lambdas, seeds, maze, out } => {
            let text = match maze {
                Some(p) => std::fs::read_to_string(p)?,
                None => DEFAULT_MAZE.to_string(),
            };
            let layout = MazeLayout::parse(&text)?;
            let cfg = GridCompareConfig { lambdas, seeds: seed_list(seeds, cli.seed_offset), ..Default::default() };
            let results = grid_compare(&layout, &cfg)?;
            for &lambda in &cfg.lambdas {
                let runs: Vec<_> = results.iter().filter(|r| r.lambda == lambda).collect();
                let solved: Vec<usize> = runs.iter().filter_map(|r| r.sweeps_to_optimal).collect();
                let mean = if solved.is_empty() {
                    "n/a".to_string()
                } else {
                    format!("{:.1}", solved.iter().sum::<usize>() as f64 / solved.len() as f64)
                };
                let uncovered = runs.iter().filter(|r| r.unvisited_cells > 0).count();
                println!(
                    "lambda {lambda}: optimal in {}/{} runs, mean sweeps {mean}, {uncovered} runs left cells unvisited",
                    solved.len(),
                    runs.len()
                );
            }
            write_grid_results(&layout, &results, &out_dir(&out))?;
            Ok(true)
        }
        Command::ParticleCompare { operators, checkpoints, seeds, out } => {
            let cfg = ParticleCompareConfig {
                operators,
                checkpoints,
                seeds: seed_list(seeds, cli.seed_offset),
                ..Default::default()
            };
            let dir = out_dir(&out);
            let result = particle_compare(&cfg, Some(&dir))?;
            println!("buffer successes per seed: {:?}", result.successes);
            for &op in &cfg.operators {
                for &it in &cfg.checkpoints {
                    let maes: Vec<f64> = cfg.seeds.iter().filter_map(|&s| result.mae(op, s, it)).collect();
                    let mean = maes.iter().sum::<f64>() / maes.len() as f64;
                    println!("{} iter {it}: mean abs error {mean:.4}", op.name());
                }
            }
            write_particle_results(&result, &dir.join("particle_compare.csv"))?;
            Ok(true)
        }
        Command::Report { dir } => {
            print!("{}", format_report(&summarize_dir(&dir)?));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
