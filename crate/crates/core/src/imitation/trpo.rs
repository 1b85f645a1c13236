use nalgebra::DMatrix;

use crate::neural::{mean_gaussian_kl, GaussianPolicy};

use super::{ImitationConfig, ImitationError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrpoSettings {
    pub max_kl: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_coef: f64,
    pub backtrack_steps: usize,
    pub fisher_subsample: usize,
    pub entropy_coef: f64,
}

impl Default for TrpoSettings {
    fn default() -> Self {
        Self::from(&ImitationConfig::default())
    }
}

impl From<&ImitationConfig> for TrpoSettings {
    fn from(c: &ImitationConfig) -> Self {
        Self {
            max_kl: c.max_kl,
            cg_iters: c.cg_iters,
            cg_damping: c.cg_damping,
            backtrack_coef: c.backtrack_coef,
            backtrack_steps: c.backtrack_steps,
            fisher_subsample: c.fisher_subsample,
            entropy_coef: c.policy_entropy_coef,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrpoStats {
    pub accepted: bool,
    /// Mean KL(old ‖ new) after the step (0 when rejected).
    pub kl: f64,
    pub surrogate_improvement: f64,
    pub expected_improvement: f64,
    pub backtracks: usize,
}

impl TrpoStats {
    fn rejected() -> Self {
        Self {
            accepted: false,
            kl: 0.0,
            surrogate_improvement: 0.0,
            expected_improvement: 0.0,
            backtracks: 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Approximately solves `A x = b` for symmetric positive definite `A`.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>, ImitationError>,
    b: &[f64],
    iters: usize,
) -> Result<Vec<f64>, ImitationError> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr < 1e-10 {
            break;
        }
        let ap = apply(&p)?;
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(x)
}

/// Every `k`-th column.
fn stride_columns(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..m.ncols()).step_by(k.max(1)).collect();
    m.select_columns(idx.iter())
}

/// One trust-region step on `mean(exp(logπ − logπ_old) A) + c·H`.
///
/// Parameters are left untouched when no backtracking candidate both
/// improves the surrogate and keeps the mean KL within `1.5 max_kl`.
pub fn trpo_step(
    policy: &mut GaussianPolicy,
    states: &DMatrix<f64>,
    actions: &DMatrix<f64>,
    old_log_probs: &[f64],
    advantages: &[f64],
    settings: &TrpoSettings,
) -> Result<TrpoStats, ImitationError> {
    let n = states.ncols();
    if n == 0 {
        return Ok(TrpoStats::rejected());
    }
    let old_params = policy.params();
    let old_means = policy.mean(states)?;
    let old_log_std = policy.log_std.clone();
    let weights: Vec<f64> = advantages.iter().map(|a| a / n as f64).collect();

    let surrogate = |p: &GaussianPolicy| -> Result<f64, ImitationError> {
        let logp = p.log_prob_batch(states, actions)?;
        let s: f64 = logp
            .iter()
            .zip(old_log_probs)
            .zip(advantages)
            .map(|((l, o), a)| (l - o).exp() * a)
            .sum::<f64>()
            / n as f64;
        Ok(s + settings.entropy_coef * p.entropy())
    };

    // ratio is one at the old parameters, so ∇ mean(ratio A) = mean(A ∇ log π)
    let (_, mut grad) = policy.weighted_log_prob_grad(states, actions, &weights)?;
    let split = policy.mean_net.n_params();
    for g in &mut grad[split..] {
        *g += settings.entropy_coef;
    }
    if grad.iter().all(|&g| g == 0.0) {
        return Ok(TrpoStats::rejected());
    }

    let fisher_states = stride_columns(states, settings.fisher_subsample);
    let damping = settings.cg_damping;
    let fvp = |v: &[f64]| -> Result<Vec<f64>, ImitationError> {
        let mut out = policy.fisher_vector_product(&fisher_states, v)?;
        for (o, x) in out.iter_mut().zip(v) {
            *o += damping * x;
        }
        Ok(out)
    };
    let dir = conjugate_gradient(fvp, &grad, settings.cg_iters)?;
    let shs = 0.5 * dot(&dir, &fvp(&dir)?);
    if !(shs > 0.0 && shs.is_finite()) {
        return Ok(TrpoStats::rejected());
    }
    let scale = (settings.max_kl / shs).sqrt();
    let full_step: Vec<f64> = dir.iter().map(|d| d * scale).collect();
    let expected = dot(&grad, &full_step);

    let base = surrogate(policy)?;
    let mut frac = 1.0;
    for k in 0..settings.backtrack_steps {
        let candidate: Vec<f64> = old_params.iter().zip(&full_step).map(|(p, s)| p + frac * s).collect();
        policy.set_params(&candidate)?;
        let improvement = surrogate(policy)? - base;
        let kl = mean_gaussian_kl(&old_means, &old_log_std, &policy.mean(states)?, &policy.log_std);
        if improvement > 0.0 && kl <= 1.5 * settings.max_kl && kl.is_finite() {
            return Ok(TrpoStats {
                accepted: true,
                kl,
                surrogate_improvement: improvement,
                expected_improvement: expected * frac,
                backtracks: k,
            });
        }
        frac *= settings.backtrack_coef;
    }
    policy.set_params(&old_params)?;
    Ok(TrpoStats::rejected())
}
