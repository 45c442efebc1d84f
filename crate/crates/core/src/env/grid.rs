use super::{EnvSpec, Environment, EpisodeClock, StepResult};
use crate::mdp::TabularMdp;
use crate::{BeeError, Result};

/// Built-in 8×8 layout: start bottom-centre, goal top-left, several routes
/// and dead-end pockets.
pub const DEFAULT_MAZE: &str = include_str!("maze.txt");

/// Row/column offsets for up, right, down, left.
const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// Parsed maze text: `#` wall, `.` free, `S` start, `G` goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MazeLayout {
    rows: usize,
    cols: usize,
    walls: Vec<bool>,
    start: (usize, usize),
    goal: (usize, usize),
    /// Free-cell index per cell, `None` for walls.
    index: Vec<Option<usize>>,
    free: Vec<(usize, usize)>,
}

impl MazeLayout {
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        let rows = lines.len();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        if rows == 0 || cols == 0 {
            return Err(BeeError::arg("maze layout is empty"));
        }
        let mut walls = Vec::with_capacity(rows * cols);
        let (mut start, mut goal) = (None, None);
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(BeeError::arg(format!("maze row {r} has a different width")));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' if start.is_none() => {
                        start = Some((r, c));
                        walls.push(false);
                    }
                    'G' if goal.is_none() => {
                        goal = Some((r, c));
                        walls.push(false);
                    }
                    other => return Err(BeeError::arg(format!("unexpected maze character `{other}`"))),
                }
            }
        }
        let start = start.ok_or_else(|| BeeError::arg("maze has no start cell"))?;
        let goal = goal.ok_or_else(|| BeeError::arg("maze has no goal cell"))?;
        let mut index = vec![None; rows * cols];
        let mut free = Vec::new();
        for (i, wall) in walls.iter().enumerate() {
            if !wall {
                index[i] = Some(free.len());
                free.push((i / cols, i % cols));
            }
        }
        Ok(Self {
            rows,
            cols,
            walls,
            start,
            goal,
            index,
            free,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn is_wall(&self, r: usize, c: usize) -> bool {
        self.walls[r * self.cols + c]
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Free cells in row-major order; position in this list is the state index.
    pub fn free_cells(&self) -> &[(usize, usize)] {
        &self.free
    }

    pub fn state_index(&self, r: usize, c: usize) -> Option<usize> {
        self.index.get(r * self.cols + c).copied().flatten()
    }

    /// Deterministic 4-neighbour move; walls and edges block.
    pub fn next_cell(&self, (r, c): (usize, usize), action: usize) -> (usize, usize) {
        let (dr, dc) = MOVES[action];
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
            return (r, c);
        }
        let (nr, nc) = (nr as usize, nc as usize);
        if self.is_wall(nr, nc) {
            (r, c)
        } else {
            (nr, nc)
        }
    }

    /// Tabular model over free cells: reward 1 on entering the goal, the goal
    /// itself absorbing.
    pub fn to_mdp(&self, discount: f64) -> Result<TabularMdp> {
        let n = self.n_free();
        let goal = self.state_index(self.goal.0, self.goal.1).expect("goal is free");
        let mut transitions = Vec::with_capacity(n * 4);
        let mut reward = Vec::with_capacity(n * 4);
        for (s, &cell) in self.free.iter().enumerate() {
            for a in 0..4 {
                if s == goal {
                    transitions.push(vec![(s, 1.0)]);
                    reward.push(0.0);
                    continue;
                }
                let next = self.next_cell(cell, a);
                let ns = self.state_index(next.0, next.1).expect("moves land on free cells");
                transitions.push(vec![(ns, 1.0)]);
                reward.push(if ns == goal { 1.0 } else { 0.0 });
            }
        }
        let terminal = (0..n).map(|s| s == goal).collect();
        TabularMdp::new(n, 4, transitions, reward, discount, terminal)
    }
}

/// Deterministic grid maze. Observation is `[row, col]`; actions are
/// 0 up, 1 right, 2 down, 3 left.
#[derive(Clone, Debug)]
pub struct GridMaze {
    spec: EnvSpec,
    layout: MazeLayout,
    pos: (usize, usize),
    clock: EpisodeClock,
}

impl GridMaze {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        let layout = spec.layout()?;
        let pos = layout.start;
        Ok(Self {
            spec,
            layout,
            pos,
            clock: EpisodeClock::default(),
        })
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }
}

impl Environment for GridMaze {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = self.layout.start;
        self.clock.restart();
        self.state()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        self.clock.begin_step()?;
        let (applied, clipped) = self.action_space().clip(action);
        self.pos = self.layout.next_cell(self.pos, applied[0] as usize);
        let success = self.pos == self.layout.goal;
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
        vec![self.pos.0 as f64, self.pos.1 as f64]
    }

    fn set_state(&mut self, state: &[f64]) -> Result<()> {
        let (r, c) = match state {
            [r, c] if *r >= 0.0 && *c >= 0.0 => (*r as usize, *c as usize),
            _ => return Err(BeeError::arg("grid state is [row, col]")),
        };
        if r >= self.layout.rows || c >= self.layout.cols || self.layout.is_wall(r, c) {
            return Err(BeeError::arg(format!("({r}, {c}) is not a free cell")));
        }
        self.pos = (r, c);
        self.clock.restart();
        Ok(())
    }

    fn is_terminal_observation(&self, observation: &[f64]) -> bool {
        observation.len() == 2
            && observation[0] as usize == self.layout.goal.0
            && observation[1] as usize == self.layout.goal.1
    }

    fn observation_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            vec![0.0, 0.0],
            vec![(self.layout.rows - 1) as f64, (self.layout.cols - 1) as f64],
        )
    }
}
