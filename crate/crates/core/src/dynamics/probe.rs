use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ControlInput, DynamicsError, ElModel, FeasibilityTol, StateTransition};

/// Controls closer than this to the recovered one count as the same control.
pub const SAME_CONTROL_SEPARATION: f64 = 1e-6;

/// Evidence for the existence of a unique action per feasible transition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UniquenessReport {
    pub n_transitions: usize,
    pub max_recovery_error: f64,
    pub mean_recovery_error: f64,
    /// Distinct candidate controls that reproduced a transition.
    pub alternatives_found: usize,
    pub infeasible_count: usize,
    /// Smallest `‖s'_candidate − s'‖∞` among probed candidates that differ
    /// from the recovered control (`+∞` when none were probed).
    pub min_candidate_error: f64,
    /// Largest such error (`0` when none were probed).
    pub max_candidate_error: f64,
    pub candidates_probed: usize,
}

impl UniquenessReport {
    pub fn empty() -> Self {
        Self {
            min_candidate_error: f64::INFINITY,
            ..Self::default()
        }
    }

    /// Folds another report into this one.
    pub fn merge(&mut self, other: &UniquenessReport) {
        let total = self.n_transitions + other.n_transitions;
        if total > 0 {
            self.mean_recovery_error = (self.mean_recovery_error * self.n_transitions as f64
                + other.mean_recovery_error * other.n_transitions as f64)
                / total as f64;
        }
        self.n_transitions = total;
        self.max_recovery_error = self.max_recovery_error.max(other.max_recovery_error);
        self.alternatives_found += other.alternatives_found;
        self.infeasible_count += other.infeasible_count;
        self.min_candidate_error = self.min_candidate_error.min(other.min_candidate_error);
        self.max_candidate_error = self.max_candidate_error.max(other.max_candidate_error);
        self.candidates_probed += other.candidates_probed;
    }
}

/// Uniform sample from the closed ball of `radius` around the origin.
fn ball_sample(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> DVector<f64> {
    if radius == 0.0 {
        return DVector::zeros(dim);
    }
    let dir = loop {
        let g = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = g.norm();
        if n > 0.0 {
            break g / n;
        }
    };
    let r: f64 = rand::Rng::random::<f64>(rng);
    dir * (radius * r.powf(1.0 / dim as f64))
}

pub(super) fn uniqueness_probe(
    model: &ElModel,
    t: &StateTransition,
    n_candidates: usize,
    search_radius: f64,
    rng_seed: u64,
    tol: &FeasibilityTol,
) -> Result<UniquenessReport, DynamicsError> {
    let recovered = model.inverse_dynamics_tol(t, tol)?;
    let reproduced = model.forward_step(&t.s, &recovered, 0.0, 0)?;
    let recovery_error = reproduced.max_abs_diff(&t.s_next);

    let mut report = UniquenessReport::empty();
    report.n_transitions = 1;
    report.max_recovery_error = recovery_error;
    report.mean_recovery_error = recovery_error;

    let reach = tol.position.max(tol.actuation);
    let center = DVector::from_column_slice(&recovered.u);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..n_candidates {
        let offset = ball_sample(&mut rng, center.len(), search_radius);
        if offset.norm() <= SAME_CONTROL_SEPARATION {
            continue;
        }
        let candidate = ControlInput::new((&center + &offset).iter().copied().collect());
        let next = model.forward_step(&t.s, &candidate, 0.0, 0)?;
        let err = next.max_abs_diff(&t.s_next);
        report.candidates_probed += 1;
        report.min_candidate_error = report.min_candidate_error.min(err);
        report.max_candidate_error = report.max_candidate_error.max(err);
        if err <= reach {
            report.alternatives_found += 1;
        }
    }
    Ok(report)
}
