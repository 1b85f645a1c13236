use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::env::Env;
use crate::neural::{Adam, GaussianPolicy, Mlp, RunningNormalizer, VAR_FLOOR};

use super::ImitationError;

/// Policy plus a state-value network sharing the policy's input normalizer.
/// The value net predicts targets standardized by `target_stats`.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub policy: GaussianPolicy,
    pub value: Mlp,
    pub value_opt: Adam,
    pub target_stats: RunningNormalizer,
}

impl ActorCritic {
    pub fn new(policy: GaussianPolicy, value: Mlp, value_lr: f64) -> Self {
        Self {
            value_opt: Adam::new(value.n_params(), value_lr),
            policy,
            value,
            target_stats: RunningNormalizer::new(1, f64::INFINITY),
        }
    }

    fn target_scale(&self) -> (f64, f64) {
        (self.target_stats.mean[0], (self.target_stats.variance()[0] + VAR_FLOOR).sqrt())
    }

    /// `V(s)` for raw states (columns).
    pub fn values(&self, states: &DMatrix<f64>) -> Result<Vec<f64>, ImitationError> {
        let out = self.value.forward(&self.policy.prepare(states))?;
        let (mean, sd) = self.target_scale();
        Ok(out.row(0).iter().map(|v| mean + sd * v).collect())
    }

    /// Folds `targets` into the running statistics and returns them
    /// standardized.
    pub fn standardize_targets(&mut self, targets: &[f64]) -> Vec<f64> {
        self.target_stats.update(&DMatrix::from_row_slice(1, targets.len(), targets));
        let (mean, sd) = self.target_scale();
        targets.iter().map(|t| (t - mean) / sd).collect()
    }
}

/// One collection of `batch_size` consecutive environment steps.
/// Columns are time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub states: DMatrix<f64>,
    /// Sampled policy outputs, in control-bound units.
    pub actions: DMatrix<f64>,
    /// Controls the environment actually applied.
    pub applied_actions: DMatrix<f64>,
    pub next_states: DMatrix<f64>,
    /// Behavior log-probabilities of `actions`.
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    /// Imitation reward; the only reward used for learning.
    pub rewards: Vec<f64>,
    /// Environment reward, kept for reporting only.
    pub true_rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    /// Episode ended at this step (termination or horizon).
    pub boundary: Vec<bool>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Steps one environment across batch boundaries.
#[derive(Debug, Clone)]
pub struct Sampler {
    env: Env,
    state: Vec<f64>,
    episode_return: f64,
    /// True returns of episodes finished so far.
    pub completed_returns: Vec<f64>,
}

impl Sampler {
    pub fn new(mut env: Env) -> Self {
        let state = env.reset();
        Self {
            env,
            state,
            episode_return: 0.0,
            completed_returns: Vec::new(),
        }
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    /// Collects `n` steps with stochastic actions. Log-probabilities and
    /// values are left empty; see [`collect_rollouts`].
    pub fn collect<R: Rng + ?Sized>(
        &mut self,
        policy: &GaussianPolicy,
        n: usize,
        rng: &mut R,
    ) -> Result<RolloutBatch, ImitationError> {
        let sd = self.env.state_dim();
        let ad = self.env.action_dim();
        let mut states = DMatrix::zeros(sd, n);
        let mut actions = DMatrix::zeros(ad, n);
        let mut applied = DMatrix::zeros(ad, n);
        let mut next_states = DMatrix::zeros(sd, n);
        let mut true_rewards = Vec::with_capacity(n);
        let mut terminated = Vec::with_capacity(n);
        let mut boundary = Vec::with_capacity(n);
        for t in 0..n {
            let a = policy.sample_with(&self.state, false, rng)?;
            let step = self.env.step(&self.env.scale_action(a.as_slice()))?;
            states.set_column(t, &DVector::from_column_slice(&self.state));
            actions.set_column(t, &a);
            applied.set_column(t, &DVector::from_column_slice(&step.action));
            next_states.set_column(t, &DVector::from_column_slice(&step.next_state));
            true_rewards.push(step.reward);
            terminated.push(step.terminated);
            boundary.push(step.done());
            self.episode_return += step.reward;
            if step.done() {
                self.completed_returns.push(self.episode_return);
                self.episode_return = 0.0;
                self.state = self.env.reset();
            } else {
                self.state = step.next_state;
            }
        }
        Ok(RolloutBatch {
            states,
            actions,
            applied_actions: applied,
            next_states,
            log_probs: Vec::new(),
            values: Vec::new(),
            next_values: Vec::new(),
            rewards: vec![0.0; n],
            true_rewards,
            terminated,
            boundary,
        })
    }
}

/// Collects a batch, folds its states into the shared input normalizer
/// when enabled, then records log-probabilities and values under the
/// updated statistics.
pub fn collect_rollouts<R: Rng + ?Sized>(
    sampler: &mut Sampler,
    agent: &mut ActorCritic,
    batch_size: usize,
    rng: &mut R,
) -> Result<RolloutBatch, ImitationError> {
    let mut batch = sampler.collect(&agent.policy, batch_size, rng)?;
    agent.policy.update_normalizer(&batch.states);
    batch.log_probs = agent.policy.log_prob_batch(&batch.states, &batch.actions)?;
    batch.values = agent.values(&batch.states)?;
    batch.next_values = agent.values(&batch.next_states)?;
    Ok(batch)
}

/// Mean and population standard deviation of deterministic-policy returns
/// over `episodes` episodes. `env` should be freshly seeded so every call
/// sees the same initial states.
pub fn evaluate(policy: &GaussianPolicy, env: Env, episodes: usize) -> Result<(f64, f64), ImitationError> {
    let bound = env.model().control_bound();
    evaluate_with(env, episodes, |s| {
        let a = policy.mean(&DMatrix::from_column_slice(s.len(), 1, s))?;
        Ok(a.iter().map(|x| x * bound).collect())
    })
}

/// Same protocol as [`evaluate`] for an arbitrary state-feedback controller.
pub fn evaluate_with(
    mut env: Env,
    episodes: usize,
    mut controller: impl FnMut(&[f64]) -> Result<Vec<f64>, ImitationError>,
) -> Result<(f64, f64), ImitationError> {
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut s = env.reset();
        let mut total = 0.0;
        loop {
            let step = env.step(&controller(&s)?)?;
            total += step.reward;
            if step.done() {
                break;
            }
            s = step.next_state;
        }
        returns.push(total);
    }
    Ok(mean_std(&returns))
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
