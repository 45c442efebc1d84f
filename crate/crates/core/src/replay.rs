//! Ring-buffer transition store with uniform sampling and a flat binary
//! dump format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{BeeError, Result};

pub const DEFAULT_CAPACITY: usize = 1_000_000;

const MAGIC: &[u8; 4] = b"BEEB";
const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminated: bool,
}

/// A sampled mini-batch laid out row-wise for the networks.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 where the transition ended the episode by termination.
    pub terminated: Array1<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition], state_dim: usize, action_dim: usize) -> Self {
        let n = items.len();
        let mut b = Batch {
            states: Array2::zeros((n, state_dim)),
            actions: Array2::zeros((n, action_dim)),
            rewards: Array1::zeros(n),
            next_states: Array2::zeros((n, state_dim)),
            terminated: Array1::zeros(n),
        };
        for (i, t) in items.iter().enumerate() {
            b.states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.state[..]));
            b.actions.row_mut(i).assign(&ndarray::ArrayView1::from(&t.action[..]));
            b.next_states.row_mut(i).assign(&ndarray::ArrayView1::from(&t.next_state[..]));
            b.rewards[i] = t.reward;
            b.terminated[i] = f64::from(u8::from(t.terminated));
        }
        b
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    storage: Vec<Transition>,
    /// Slot the next push writes to once the ring is full.
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 || state_dim == 0 || action_dim == 0 {
            return Err(BeeError::arg("replay capacity and dimensions must be positive"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn clear(&mut self) {
        self.storage.clear();
        self.cursor = 0;
    }

    fn check(&self, t: &Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim {
            return Err(BeeError::arg(format!(
                "transition state dims {}/{} do not match buffer state dim {}",
                t.state.len(),
                t.next_state.len(),
                self.state_dim
            )));
        }
        if t.action.len() != self.action_dim {
            return Err(BeeError::arg(format!(
                "transition action dim {} does not match buffer action dim {}",
                t.action.len(),
                self.action_dim
            )));
        }
        if !t.reward.is_finite() {
            return Err(BeeError::arg("transition reward must be finite"));
        }
        Ok(())
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        self.check(&t)?;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
        Ok(())
    }

    /// Transition `i` in insertion order, `0` being the oldest retained.
    pub fn get(&self, i: usize) -> Option<&Transition> {
        if i >= self.storage.len() {
            return None;
        }
        Some(&self.storage[(self.cursor + i) % self.storage.len()])
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> + '_ {
        (0..self.storage.len()).map(move |i| self.get(i).expect("index in range"))
    }

    fn sample_refs<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.storage.is_empty() {
            return Err(BeeError::state("cannot sample from an empty replay buffer"));
        }
        Ok((0..n).map(|_| &self.storage[rng.random_range(0..self.storage.len())]).collect())
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self.sample_refs(n, rng)?.into_iter().cloned().collect())
    }

    /// Same draw as [`sample_batch`](Self::sample_batch), packed into arrays.
    pub fn sample_arrays<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch> {
        let refs = self.sample_refs(n, rng)?;
        Ok(Batch::from_transitions(&refs, self.state_dim, self.action_dim))
    }

    /// Appends every transition of every trajectory in order and returns the
    /// number added. Nothing is added if any transition is malformed.
    pub fn inject_trajectories(&mut self, trajectories: &[Vec<Transition>]) -> Result<usize> {
        for t in trajectories.iter().flatten() {
            self.check(t)?;
        }
        let mut count = 0;
        for t in trajectories.iter().flatten() {
            self.push(t.clone())?;
            count += 1;
        }
        Ok(count)
    }

    /// Writes the contents oldest to newest: a 16-byte header (magic, format
    /// version, reserved, state dim, action dim) followed by one record per
    /// transition of little-endian f64 values
    /// `state, action, reward, next_state, terminated`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&0u16.to_le_bytes())?;
        w.write_all(&(self.state_dim as u32).to_le_bytes())?;
        w.write_all(&(self.action_dim as u32).to_le_bytes())?;
        for t in self.iter() {
            let done = f64::from(u8::from(t.terminated));
            let values = t
                .state
                .iter()
                .chain(&t.action)
                .chain(std::iter::once(&t.reward))
                .chain(&t.next_state)
                .chain(std::iter::once(&done));
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    /// Reads a dump into a buffer of the given capacity. Records beyond the
    /// capacity evict the oldest ones, as pushes would.
    pub fn read_from<R: Read>(mut r: R, capacity: usize) -> Result<Self> {
        let (state_dim, action_dim, records) = read_records(&mut r)?;
        let mut buf = Self::new(capacity, state_dim, action_dim)?;
        for t in records {
            buf.push(t)?;
        }
        Ok(buf)
    }

    pub fn load(path: impl AsRef<Path>, capacity: usize) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?), capacity)
    }
}

/// Parses a dump into its dims and transitions, oldest first.
pub fn read_records<R: Read>(r: &mut R) -> Result<(usize, usize, Vec<Transition>)> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| BeeError::Format("replay dump shorter than its header".into()))?;
    if &header[..4] != MAGIC {
        return Err(BeeError::Format("not a replay dump (bad magic)".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(BeeError::Format(format!("unsupported replay dump version {version}")));
    }
    let state_dim = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let action_dim = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes")) as usize;
    if state_dim == 0 || action_dim == 0 {
        return Err(BeeError::Format("replay dump has zero dimensions".into()));
    }
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let width = 2 * state_dim + action_dim + 2;
    let record_bytes = width * 8;
    if body.len() % record_bytes != 0 {
        return Err(BeeError::Format("replay dump ends in a partial record".into()));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let records = values
        .chunks_exact(width)
        .map(|v| {
            let (state, rest) = v.split_at(state_dim);
            let (action, rest) = rest.split_at(action_dim);
            let (reward, rest) = rest.split_first().expect("record has a reward");
            let (next_state, rest) = rest.split_at(state_dim);
            Transition {
                state: state.to_vec(),
                action: action.to_vec(),
                reward: *reward,
                next_state: next_state.to_vec(),
                terminated: rest[0] != 0.0,
            }
        })
        .collect();
    Ok((state_dim, action_dim, records))
}
