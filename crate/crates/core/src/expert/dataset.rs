//! Expert trajectory files.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic        6 bytes  "LFOEQ1"
//! env_id_len   u32, then env_id as UTF-8
//! dt           f64
//! state_dim    u32
//! action_dim   u32      (0 for an action-stripped file)
//! horizon      u32
//! n_traj       u32
//! per trajectory:
//!   n_steps    u32
//!   return     f64
//!   n_steps rows of f64: state, action, next_state
//! checksum     u64      CRC-64/XZ of every preceding byte
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ExpertError;

pub const MAGIC: &[u8; 6] = b"LFOEQ1";
const CHECKSUM: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    /// Empty in the observation-only view.
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    /// True return, kept as metadata only.
    pub episode_return: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetView {
    /// States and actions.
    Lfd,
    /// States only.
    Lfo,
}

impl std::str::FromStr for DatasetView {
    type Err = ExpertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lfd" => Ok(DatasetView::Lfd),
            "lfo" => Ok(DatasetView::Lfo),
            other => Err(ExpertError::Config(format!("unknown dataset view `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub env_id: String,
    pub dt: f64,
    pub state_dim: usize,
    /// Zero when actions were stripped.
    pub action_dim: usize,
    pub horizon: usize,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryDataset {
    pub fn n_trajectories(&self) -> usize {
        self.trajectories.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.trajectories.iter().map(|t| t.steps.len()).sum()
    }

    pub fn has_actions(&self) -> bool {
        self.action_dim > 0
    }

    pub fn steps(&self) -> impl Iterator<Item = &TrajectoryStep> {
        self.trajectories.iter().flat_map(|t| t.steps.iter())
    }

    pub fn mean_return(&self) -> f64 {
        if self.trajectories.is_empty() {
            return 0.0;
        }
        self.trajectories.iter().map(|t| t.episode_return).sum::<f64>() / self.trajectories.len() as f64
    }

    /// Checks dimensions, chaining of consecutive steps and the length bound.
    pub fn validate(&self) -> Result<(), ExpertError> {
        let corrupt = |m: String| Err(ExpertError::CorruptFile(m));
        for (k, traj) in self.trajectories.iter().enumerate() {
            if traj.steps.is_empty() || traj.steps.len() > self.horizon {
                return corrupt(format!("trajectory {k} has {} steps (horizon {})", traj.steps.len(), self.horizon));
            }
            for (t, step) in traj.steps.iter().enumerate() {
                if step.state.len() != self.state_dim
                    || step.next_state.len() != self.state_dim
                    || step.action.len() != self.action_dim
                {
                    return corrupt(format!("trajectory {k} step {t} has wrong dimensions"));
                }
                if let Some(next) = traj.steps.get(t + 1) {
                    if next.state != step.next_state {
                        return corrupt(format!("trajectory {k} breaks between steps {t} and {}", t + 1));
                    }
                }
            }
        }
        Ok(())
    }

    /// Copy without actions.
    pub fn strip_actions(&self) -> Self {
        let mut out = self.clone();
        out.action_dim = 0;
        for step in out.trajectories.iter_mut().flat_map(|t| t.steps.iter_mut()) {
            step.action.clear();
        }
        out
    }

    /// `n` trajectories drawn uniformly without replacement.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Self, ExpertError> {
        if n > self.trajectories.len() {
            return Err(ExpertError::BadSubsample {
                requested: n,
                available: self.trajectories.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, self.trajectories.len(), n).into_vec();
        idx.sort_unstable();
        let mut out = self.clone();
        out.trajectories = idx.into_iter().map(|i| self.trajectories[i].clone()).collect();
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.env_id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.env_id.as_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        for v in [self.state_dim, self.action_dim, self.horizon, self.trajectories.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for traj in &self.trajectories {
            out.extend_from_slice(&(traj.steps.len() as u32).to_le_bytes());
            out.extend_from_slice(&traj.episode_return.to_le_bytes());
            for step in &traj.steps {
                for x in step.state.iter().chain(&step.action).chain(&step.next_state) {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        let sum = CHECKSUM.checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ExpertError> {
        if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(ExpertError::CorruptFile("bad magic".into()));
        }
        let (payload, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if CHECKSUM.checksum(payload) != stored {
            return Err(ExpertError::CorruptFile("checksum mismatch".into()));
        }
        let mut r = Reader {
            bytes: payload,
            pos: MAGIC.len(),
        };
        let id_len = r.u32()? as usize;
        let env_id = String::from_utf8(r.take(id_len)?.to_vec())
            .map_err(|_| ExpertError::CorruptFile("env id is not UTF-8".into()))?;
        let dt = r.f64()?;
        let state_dim = r.u32()? as usize;
        let action_dim = r.u32()? as usize;
        let horizon = r.u32()? as usize;
        let n_traj = r.u32()? as usize;
        let mut trajectories = Vec::with_capacity(n_traj.min(1 << 16));
        for _ in 0..n_traj {
            let n_steps = r.u32()? as usize;
            let episode_return = r.f64()?;
            let mut steps = Vec::with_capacity(n_steps.min(1 << 16));
            for _ in 0..n_steps {
                steps.push(TrajectoryStep {
                    state: r.f64s(state_dim)?,
                    action: r.f64s(action_dim)?,
                    next_state: r.f64s(state_dim)?,
                });
            }
            trajectories.push(Trajectory { steps, episode_return });
        }
        if r.pos != payload.len() {
            return Err(ExpertError::CorruptFile("trailing bytes before checksum".into()));
        }
        let ds = Self {
            env_id,
            dt,
            state_dim,
            action_dim,
            horizon,
            trajectories,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExpertError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads a file in the requested view, optionally keeping a random
    /// subset of `subsample_n` trajectories.
    pub fn load(path: &Path, view: DatasetView, subsample_n: Option<usize>, seed: u64) -> Result<Self, ExpertError> {
        let mut ds = Self::from_bytes(&std::fs::read(path)?)?;
        if let Some(n) = subsample_n {
            ds = ds.subsample(n, seed)?;
        }
        if view == DatasetView::Lfo {
            ds = ds.strip_actions();
        }
        Ok(ds)
    }

    /// One CSV row per step: `trajectory,step,s0..,a0..,next_s0..`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["trajectory".to_string(), "step".to_string()];
        header.extend((0..self.state_dim).map(|i| format!("s{i}")));
        header.extend((0..self.action_dim).map(|i| format!("a{i}")));
        header.extend((0..self.state_dim).map(|i| format!("next_s{i}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for (k, traj) in self.trajectories.iter().enumerate() {
            for (t, step) in traj.steps.iter().enumerate() {
                let _ = write!(out, "{k},{t}");
                for x in step.state.iter().chain(&step.action).chain(&step.next_state) {
                    let _ = write!(out, ",{x}");
                }
                out.push('\n');
            }
        }
        out
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ExpertError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| ExpertError::CorruptFile(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ExpertError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ExpertError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ExpertError> {
        (0..n).map(|_| self.f64()).collect()
    }
}
