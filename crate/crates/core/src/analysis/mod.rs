//! Empirical checks of action uniqueness, the Ξ ratio bracket and
//! robustness to bounded transition noise.

mod sweep;
mod xi;

#[cfg(test)]
mod tests;

pub use sweep::{
    equivalent, noise_sweep, normalized_score, pooled_std, run_cell, sweep_cells, zero_action_return, NoiseSweep, SeedSummary,
    SweepCell, SweepRow,
};
pub use xi::{gaussian_lipschitz, xi_bound_check, XiBoundReport, DEFAULT_GRID_POINTS};

use crate::dynamics::{DynamicsError, ElModel, FeasibilityTol, StateTransition};
pub use crate::dynamics::UniquenessReport;
use crate::expert::TrajectoryDataset;
use crate::imitation::ImitationError;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("policy standard deviation must be positive, got {0}")]
    NonpositiveStd(f64),
    #[error("dataset does not match the model: {0}")]
    DatasetMismatch(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Imitation(#[from] ImitationError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

fn check_dataset(model: &ElModel, dataset: &TrajectoryDataset) -> Result<(), AnalysisError> {
    if dataset.env_id != model.name() || dataset.state_dim != model.state_dim() || dataset.dt != model.dt() {
        return Err(AnalysisError::DatasetMismatch(format!(
            "dataset `{}` (dt {}, dim {}) vs model `{}` (dt {}, dim {})",
            dataset.env_id,
            dataset.dt,
            dataset.state_dim,
            model.name(),
            model.dt(),
            model.state_dim()
        )));
    }
    Ok(())
}

/// Inverse dynamics plus the uniqueness probe over every stored transition,
/// at the exact feasibility tolerance.
pub fn uniqueness_report(
    model: &ElModel,
    dataset: &TrajectoryDataset,
    probe_candidates: usize,
    seed: u64,
) -> Result<UniquenessReport, AnalysisError> {
    uniqueness_report_tol(model, dataset, probe_candidates, seed, &FeasibilityTol::default())
}

/// Same with explicit tolerances, e.g. `model.feasibility_tol(ε)` for noisy
/// data. Infeasible transitions are counted rather than reported as errors.
pub fn uniqueness_report_tol(
    model: &ElModel,
    dataset: &TrajectoryDataset,
    probe_candidates: usize,
    seed: u64,
    tol: &FeasibilityTol,
) -> Result<UniquenessReport, AnalysisError> {
    check_dataset(model, dataset)?;
    let mut report = UniquenessReport::empty();
    let radius = model.control_bound();
    let mut infeasible = 0;
    for (i, step) in dataset.steps().enumerate() {
        let t = StateTransition::from_states(&step.state, &step.next_state);
        let probe_seed = seed.wrapping_add(i as u64);
        match model.uniqueness_probe_tol(&t, probe_candidates, radius, probe_seed, tol) {
            Ok(r) => report.merge(&r),
            Err(DynamicsError::InfeasibleTransition { .. }) => infeasible += 1,
            Err(e) => return Err(e.into()),
        }
    }
    // recovery errors average over feasible transitions only
    report.n_transitions += infeasible;
    report.infeasible_count += infeasible;
    Ok(report)
}

/// Largest `‖recovered − stored‖∞` over the stored actions, skipping
/// transitions that fail the feasibility test (their count is returned too).
pub fn action_recovery_error(
    model: &ElModel,
    dataset: &TrajectoryDataset,
    tol: &FeasibilityTol,
) -> Result<(f64, usize), AnalysisError> {
    check_dataset(model, dataset)?;
    if !dataset.has_actions() {
        return Err(AnalysisError::DatasetMismatch("dataset has no actions".into()));
    }
    let mut worst: f64 = 0.0;
    let mut infeasible = 0;
    for step in dataset.steps() {
        let t = StateTransition::from_states(&step.state, &step.next_state);
        match model.inverse_dynamics_tol(&t, tol) {
            Ok(u) => {
                let err = u.u.iter().zip(&step.action).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                worst = worst.max(err);
            }
            Err(DynamicsError::InfeasibleTransition { .. }) => infeasible += 1,
            Err(e) => return Err(e.into()),
        }
    }
    Ok((worst, infeasible))
}

impl UniquenessReport {
    pub fn to_csv(&self) -> String {
        format!(
            "n_transitions,max_recovery_error,mean_recovery_error,alternatives_found,infeasible_count,candidates_probed,min_candidate_error\n{},{:e},{:e},{},{},{},{:e}\n",
            self.n_transitions,
            self.max_recovery_error,
            self.mean_recovery_error,
            self.alternatives_found,
            self.infeasible_count,
            self.candidates_probed,
            self.min_candidate_error
        )
    }

    pub fn summary(&self) -> String {
        format!(
            "{} transitions ({} infeasible), {} candidates probed, {} alternatives; recovery error max {:.3e} mean {:.3e}; nearest candidate {:.3e}",
            self.n_transitions,
            self.infeasible_count,
            self.candidates_probed,
            self.alternatives_found,
            self.max_recovery_error,
            self.mean_recovery_error,
            self.min_candidate_error
        )
    }
}
