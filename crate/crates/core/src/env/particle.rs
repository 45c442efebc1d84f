use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvSpec, Environment, EpisodeClock, StepResult};
use crate::mdp::{value_iteration_oracle, QTable, TabularMdp};
use crate::rng::{seeded, SeedRng};
use crate::{BeeError, Result};

/// Number of angle bins in the tabular discretization.
pub const ANGLE_BINS: usize = 16;

/// Sub-samples per cell axis used to estimate the discretized kernel.
const KERNEL_SAMPLES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleParams {
    /// Side of the square arena `[0, size]²`.
    pub size: f64,
    pub hole: [f64; 2],
    pub hole_radius: f64,
    pub move_length: f64,
    /// Spawn rectangle `[x_lo, y_lo, x_hi, y_hi]`.
    pub spawn: [f64; 4],
}

impl Default for ParticleParams {
    fn default() -> Self {
        Self {
            size: 10.0,
            hole: [10.0, 5.0],
            hole_radius: 0.1,
            move_length: 0.1,
            spawn: [0.0, 0.0, 10.0, 10.0],
        }
    }
}

impl ParticleParams {
    pub fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.spawn;
        if !(self.size > 0.0 && self.hole_radius > 0.0 && self.move_length > 0.0) {
            return Err(BeeError::arg("particle size, hole radius and move length must be positive"));
        }
        if !(0.0 <= x0 && x0 < x1 && x1 <= self.size && 0.0 <= y0 && y0 < y1 && y1 <= self.size) {
            return Err(BeeError::arg("particle spawn rectangle must lie inside the arena"));
        }
        Ok(())
    }

    fn in_hole(&self, pos: [f64; 2]) -> bool {
        (pos[0] - self.hole[0]).hypot(pos[1] - self.hole[1]) <= self.hole_radius
    }

    fn advance(&self, pos: [f64; 2], theta: f64, length: f64) -> [f64; 2] {
        [
            (pos[0] + length * theta.cos()).clamp(0.0, self.size),
            (pos[1] + length * theta.sin()).clamp(0.0, self.size),
        ]
    }
}

/// Random-walk particle: each step moves a fixed length in the direction of
/// the action angle; reaching the hole pays 1 and ends the episode.
#[derive(Clone, Debug)]
pub struct ParticleHole {
    spec: EnvSpec,
    pos: [f64; 2],
    rng: SeedRng,
    clock: EpisodeClock,
}

impl ParticleHole {
    pub fn new(spec: EnvSpec, seed: u64) -> Result<Self> {
        spec.particle.validate()?;
        let mut env = Self {
            spec,
            pos: [0.0, 0.0],
            rng: seeded(seed),
            clock: EpisodeClock::default(),
        };
        env.reset();
        Ok(env)
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }
}

impl Environment for ParticleHole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        let p = &self.spec.particle;
        let [x0, y0, x1, y1] = p.spawn;
        loop {
            let pos = [self.rng.random_range(x0..x1), self.rng.random_range(y0..y1)];
            if !p.in_hole(pos) {
                self.pos = pos;
                break;
            }
        }
        self.clock.restart();
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        self.clock.begin_step()?;
        let (applied, clipped) = self.action_space().clip(action);
        let p = &self.spec.particle;
        self.pos = p.advance(self.pos, applied[0], p.move_length);
        let success = p.in_hole(self.pos);
        let truncated = self.clock.end_step(success, self.spec.horizon);
        Ok(StepResult {
            observation: self.state(),
            reward: if success { 1.0 } else { 0.0 },
            terminated: success,
            truncated,
            success,
            applied_action: applied,
            action_clipped: clipped,
        })
    }

    fn state(&self) -> Vec<f64> {
        self.pos.to_vec()
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        let size = self.spec.particle.size;
        match state {
            [x, y] if (0.0..=size).contains(x) && (0.0..=size).contains(y) => {
                self.pos = [*x, *y];
                self.clock.restart();
                Ok(())
            }
            _ => Err(BeeError::arg("particle state must be [x, y] inside the arena")),
        }
    }

    fn is_terminal_observation(&self, observation: &[f64]) -> bool {
        observation.len() == 2 && self.spec.particle.in_hole([observation[0], observation[1]])
    }

    fn observation_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let size = self.spec.particle.size;
        (vec![0.0, 0.0], vec![size, size])
    }
}

/// Uniform `resolution × resolution` cell grid over the arena with
/// [`ANGLE_BINS`] action bins. Cell index is `row * resolution + col`, with
/// rows along y and columns along x.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleGrid {
    pub resolution: usize,
    pub params: ParticleParams,
}

impl ParticleGrid {
    pub fn new(resolution: usize, params: ParticleParams) -> Result<Self> {
        if resolution < 10 {
            return Err(BeeError::arg("particle grid resolution must be at least 10"));
        }
        params.validate()?;
        Ok(Self { resolution, params })
    }

    pub fn n_cells(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn cell_size(&self) -> f64 {
        self.params.size / self.resolution as f64
    }

    fn axis_index(&self, v: f64) -> usize {
        ((v / self.cell_size()).floor().max(0.0) as usize).min(self.resolution - 1)
    }

    pub fn cell_of(&self, x: f64, y: f64) -> usize {
        self.axis_index(y) * self.resolution + self.axis_index(x)
    }

    pub fn center(&self, cell: usize) -> [f64; 2] {
        let h = self.cell_size();
        let (row, col) = (cell / self.resolution, cell % self.resolution);
        [(col as f64 + 0.5) * h, (row as f64 + 0.5) * h]
    }

    /// Nearest bin to an angle; bin `b` is centred on `b·2π/16`.
    pub fn angle_bin(&self, theta: f64) -> usize {
        let width = std::f64::consts::TAU / ANGLE_BINS as f64;
        ((theta / width).round().rem_euclid(ANGLE_BINS as f64) as usize) % ANGLE_BINS
    }

    pub fn bin_angle(&self, bin: usize) -> f64 {
        let a = bin as f64 * std::f64::consts::TAU / ANGLE_BINS as f64;
        if a > std::f64::consts::PI {
            a - std::f64::consts::TAU
        } else {
            a
        }
    }

    /// Cells whose rectangle comes strictly closer than the hole radius to
    /// the hole centre (touching at exactly the radius does not count).
    pub fn is_hole_cell(&self, cell: usize) -> bool {
        let (row, col) = (cell / self.resolution, cell % self.resolution);
        let edge = |i: usize| i as f64 * self.params.size / self.resolution as f64;
        let [hx, hy] = self.params.hole;
        let dx = (edge(col) - hx).max(0.0).max(hx - edge(col + 1));
        let dy = (edge(row) - hy).max(0.0).max(hy - edge(row + 1));
        dx.hypot(dy) < self.params.hole_radius - 1e-9
    }

    /// Per-step length of the discretized dynamics: the true move length, or
    /// one cell when cells are coarser than a move.
    pub fn step_length(&self) -> f64 {
        self.params.move_length.max(self.cell_size())
    }

    /// Tabular particle model. States are the grid cells plus one absorbing
    /// sink (index `n_cells`). Hole cells pay 1 under every action and move
    /// to the sink. Other cells move by `step_length` along the bin angle;
    /// the kernel is the landing distribution of a 4×4 lattice of start
    /// points inside the cell. The discount is rescaled to
    /// `γ^(step_length / move_length)` so values stay comparable across
    /// resolutions.
    pub fn to_mdp(&self, gamma: f64) -> Result<TabularMdp> {
        let n = self.n_cells();
        let sink = n;
        let h = self.cell_size();
        let length = self.step_length();
        let mut transitions = Vec::with_capacity((n + 1) * ANGLE_BINS);
        let mut reward = Vec::with_capacity((n + 1) * ANGLE_BINS);
        let weight = 1.0 / (KERNEL_SAMPLES * KERNEL_SAMPLES) as f64;
        for cell in 0..n {
            let hole = self.is_hole_cell(cell);
            let [cx, cy] = self.center(cell);
            for bin in 0..ANGLE_BINS {
                if hole {
                    transitions.push(vec![(sink, 1.0)]);
                    reward.push(1.0);
                    continue;
                }
                let theta = self.bin_angle(bin);
                let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
                for i in 0..KERNEL_SAMPLES {
                    for j in 0..KERNEL_SAMPLES {
                        let x = cx + ((i as f64 + 0.5) / KERNEL_SAMPLES as f64 - 0.5) * h;
                        let y = cy + ((j as f64 + 0.5) / KERNEL_SAMPLES as f64 - 0.5) * h;
                        let [nx, ny] = self.params.advance([x, y], theta, length);
                        let next = self.cell_of(nx, ny);
                        match row.iter_mut().find(|(c, _)| *c == next) {
                            Some((_, p)) => *p += weight,
                            None => row.push((next, weight)),
                        }
                    }
                }
                let total: f64 = row.iter().map(|(_, p)| p).sum();
                row.iter_mut().for_each(|(_, p)| *p /= total);
                transitions.push(row);
                reward.push(0.0);
            }
        }
        for _ in 0..ANGLE_BINS {
            transitions.push(vec![(sink, 1.0)]);
            reward.push(0.0);
        }
        let mut terminal = vec![false; n + 1];
        terminal[sink] = true;
        let discount = gamma.powf(length / self.params.move_length);
        TabularMdp::new(n + 1, ANGLE_BINS, transitions, reward, discount, terminal)
    }
}

/// Optimal values of the discretized particle task.
#[derive(Clone, Debug)]
pub struct ParticleOracle {
    pub grid: ParticleGrid,
    pub mdp: TabularMdp,
    pub q: QTable,
}

impl ParticleOracle {
    /// V*(cell) for every grid cell (the sink excluded), row-major.
    pub fn cell_values(&self) -> Vec<f64> {
        let v = self.q.max_values().0;
        v[..self.grid.n_cells()].to_vec()
    }

    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let cell = self.grid.cell_of(x, y);
        self.q.row(cell).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Ground-truth Q for the particle task on a `resolution²` grid with the
/// default arena.
pub fn particle_oracle_q(resolution: usize, gamma: f64, tol: f64) -> Result<ParticleOracle> {
    particle_oracle_with(ParticleParams::default(), resolution, gamma, tol)
}

pub fn particle_oracle_with(params: ParticleParams, resolution: usize, gamma: f64, tol: f64) -> Result<ParticleOracle> {
    let grid = ParticleGrid::new(resolution, params)?;
    let mdp = grid.to_mdp(gamma)?;
    let q = value_iteration_oracle(&mdp, tol)?;
    Ok(ParticleOracle { grid, mdp, q })
}
