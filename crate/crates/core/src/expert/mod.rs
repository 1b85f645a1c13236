//! Expert policies trained on the true task reward, and their
//! demonstration datasets.

pub mod dataset;
pub mod reference;


use std::path::Path;

use nalgebra::DMatrix;

use crate::dynamics::DynamicsError;
use crate::env::Env;
use crate::imitation::train::{run_loop, RewardSource};
use crate::imitation::{ImitationConfig, ImitationError, LearningCurve};
use crate::neural::GaussianPolicy;

pub use dataset::{DatasetView, Trajectory, TrajectoryDataset, TrajectoryStep};
pub use reference::{dlqr, linearize, LinearController};

#[derive(Debug, thiserror::Error)]
pub enum ExpertError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("corrupt dataset file: {0}")]
    CorruptFile(String),
    #[error("requested {requested} trajectories but only {available} are stored")]
    BadSubsample { requested: usize, available: usize },
    #[error("step budget exhausted before the evaluation return plateaued (best {:.4})", .0.eval_return)]
    BudgetExhausted(Box<ExpertRun>),
    #[error(transparent)]
    Imitation(#[from] ImitationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ExpertConfig {
    /// Trust-region, critic and evaluation settings; `total_env_steps` is
    /// the step budget.
    pub rl: ImitationConfig,
    /// Plateau window in generator cycles.
    pub plateau_window: usize,
    /// Relative improvement of the best evaluation return below which the
    /// run counts as converged.
    pub plateau_tol: f64,
    /// No plateau is declared before this many cycles.
    pub min_cycles: usize,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            rl: ImitationConfig {
                eval_every: 5,
                total_env_steps: 600_000,
                ..ImitationConfig::default()
            },
            plateau_window: 20,
            plateau_tol: 0.01,
            min_cycles: 300,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpertRun {
    /// Policy with the best deterministic evaluation return seen.
    pub policy: GaussianPolicy,
    pub eval_return: f64,
    pub eval_std: f64,
    pub curve: LearningCurve,
    pub cycles: usize,
}

impl ExpertRun {
    /// Running maximum of the evaluation curve.
    pub fn running_best(&self) -> Vec<f64> {
        self.curve
            .points
            .iter()
            .scan(f64::NEG_INFINITY, |best, p| {
                *best = best.max(p.eval_return_mean);
                Some(*best)
            })
            .collect()
    }
}

/// Whether the best return improved by less than `tol` (relative) between
/// `then` and `now`.
pub fn plateaued(then: f64, now: f64, tol: f64) -> bool {
    now - then <= tol * then.abs().max(1e-12)
}

/// Trust-region training on the environment's own reward until the best
/// evaluation return stops improving.
pub fn train_expert(env: &Env, cfg: &ExpertConfig) -> Result<ExpertRun, ExpertError> {
    if cfg.plateau_window == 0 || !(cfg.plateau_tol >= 0.0) {
        return Err(ExpertError::Config("plateau window and tolerance must be positive".into()));
    }
    let batch = cfg.rl.batch_size;
    let mut best: Option<(f64, f64, GaussianPolicy)> = None;
    // (cycle, best return so far) at every evaluation
    let mut history: Vec<(usize, f64)> = Vec::new();
    let mut converged = false;
    let (outcome, _) = run_loop(env, RewardSource::Environment, &cfg.rl, |p, policy| {
        let cycle = p.env_steps / batch;
        if best.as_ref().is_none_or(|(r, _, _)| p.eval_return_mean > *r) {
            best = Some((p.eval_return_mean, p.eval_return_std, policy.clone()));
        }
        let now = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0);
        history.push((cycle, now));
        if cycle < cfg.min_cycles.max(cfg.plateau_window) {
            return false;
        }
        let then = history
            .iter()
            .rev()
            .find(|(c, _)| *c + cfg.plateau_window <= cycle)
            .map(|h| h.1);
        converged = then.is_some_and(|then| plateaued(then, now, cfg.plateau_tol));
        converged
    })?;
    let (eval_return, eval_std, policy) = best.expect("initial evaluation always runs");
    let run = ExpertRun {
        policy,
        eval_return,
        eval_std,
        curve: outcome.curve,
        cycles: outcome.generator_cycles,
    };
    if converged {
        Ok(run)
    } else {
        Err(ExpertError::BudgetExhausted(Box::new(run)))
    }
}

/// Deterministic rollouts of `controller` under noiseless dynamics.
/// Episodes end at the horizon or on early termination.
pub fn rollout_dataset_with(
    env: &Env,
    n_trajectories: usize,
    seed: u64,
    mut controller: impl FnMut(&[f64]) -> Result<Vec<f64>, ExpertError>,
) -> Result<TrajectoryDataset, ExpertError> {
    let mut env = env.reseeded(seed);
    env.set_noise_bound(0.0);
    let mut trajectories = Vec::with_capacity(n_trajectories);
    for _ in 0..n_trajectories {
        let mut s = env.reset();
        let mut steps = Vec::with_capacity(env.horizon());
        let mut episode_return = 0.0;
        loop {
            let step = env.step(&controller(&s)?)?;
            episode_return += step.reward;
            let done = step.done();
            steps.push(TrajectoryStep {
                state: s,
                action: step.action,
                next_state: step.next_state.clone(),
            });
            if done {
                break;
            }
            s = step.next_state;
        }
        trajectories.push(Trajectory { steps, episode_return });
    }
    Ok(TrajectoryDataset {
        env_id: env.id().to_string(),
        dt: env.model().dt(),
        state_dim: env.state_dim(),
        action_dim: env.action_dim(),
        horizon: env.horizon(),
        trajectories,
    })
}

/// Deterministic expert demonstrations; written to `path` when given.
pub fn export_dataset(
    env: &Env,
    expert: &GaussianPolicy,
    n_trajectories: usize,
    seed: u64,
    path: Option<&Path>,
) -> Result<TrajectoryDataset, ExpertError> {
    let sd = env.state_dim();
    if expert.state_dim() != sd || expert.action_dim() != env.action_dim() {
        return Err(ExpertError::Config(format!(
            "expert dims ({}, {}) do not match `{}`",
            expert.state_dim(),
            expert.action_dim(),
            env.id()
        )));
    }
    let ds = rollout_dataset_with(env, n_trajectories, seed, |s| {
        let a = expert
            .mean(&DMatrix::from_column_slice(sd, 1, s))
            .map_err(ImitationError::from)?;
        Ok(env.scale_action(a.as_slice()))
    })?;
    if let Some(path) = path {
        ds.save(path)?;
    }
    Ok(ds)
}

pub fn load_dataset(
    path: &Path,
    view: DatasetView,
    subsample_n: Option<usize>,
    seed: u64,
) -> Result<TrajectoryDataset, ExpertError> {
    TrajectoryDataset::load(path, view, subsample_n, seed)
}
