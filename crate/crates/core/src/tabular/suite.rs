use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{kl_report, make_mdp, MdpKind, TabularError, TabularPolicy, SUPPORT_FLOOR};

/// Outcome of the randomized identity checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    /// Random stochastic MDPs checked for the decomposition identity.
    pub decomposition_mdps: usize,
    /// Largest `|idd − (kl_sa − kl_ss)|` over them.
    pub max_decomposition_residual: f64,
    /// Policy pairs checked on unique-action dynamics.
    pub unique_action_pairs: usize,
    /// Largest `|idd|` on unique-action dynamics.
    pub max_unique_idd: f64,
    /// Largest `|kl_sa − kl_ss|` on unique-action dynamics.
    pub max_unique_kl_gap: f64,
    /// Largest disagreement found on multi-action dynamics.
    pub counterexample_idd: f64,
}

impl SuiteReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_decomposition_residual <= tol
            && self.max_unique_idd <= tol
            && self.max_unique_kl_gap <= tol
            && self.counterexample_idd > 1e-6
    }

    pub fn summary(&self) -> String {
        format!(
            "decomposition: {} MDPs, max residual {:.3e}\nunique-action: {} policy pairs, max |idd| {:.3e}, max |kl_sa - kl_ss| {:.3e}\nmulti-action counterexample: idd {:.3e}",
            self.decomposition_mdps,
            self.max_decomposition_residual,
            self.unique_action_pairs,
            self.max_unique_idd,
            self.max_unique_kl_gap,
            self.counterexample_idd
        )
    }
}

/// Decomposition residual on `n_random` stochastic MDPs (up to 8 states and
/// 4 actions), unique-action collapse on `n_unique` MDPs × `pairs` policy
/// pairs, and the largest disagreement over a few multi-action MDPs.
pub fn verify_suite(n_random: usize, n_unique: usize, pairs: usize, seed: u64) -> Result<SuiteReport, TabularError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        decomposition_mdps: 0,
        max_decomposition_residual: 0.0,
        unique_action_pairs: 0,
        max_unique_idd: 0.0,
        max_unique_kl_gap: 0.0,
        counterexample_idd: 0.0,
    };
    for _ in 0..n_random {
        let (n, na) = (rng.random_range(2..=8), rng.random_range(1..=4));
        let mdp = make_mdp(MdpKind::RandomStochastic, n, na, rng.random())?;
        let pi = TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng);
        let expert = TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng);
        let kl = kl_report(&mdp, &pi, &expert)?;
        report.decomposition_mdps += 1;
        report.max_decomposition_residual = report.max_decomposition_residual.max(kl.residual.abs());
    }
    for _ in 0..n_unique {
        let n = rng.random_range(2..=8);
        let na = rng.random_range(1..=n.min(4));
        let mdp = make_mdp(MdpKind::UniqueAction, n, na, rng.random())?;
        for _ in 0..pairs {
            let pi = TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng);
            let expert = TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng);
            let kl = kl_report(&mdp, &pi, &expert)?;
            report.unique_action_pairs += 1;
            report.max_unique_idd = report.max_unique_idd.max(kl.idd.abs());
            report.max_unique_kl_gap = report.max_unique_kl_gap.max((kl.kl_sa - kl.kl_ss).abs());
        }
    }
    for _ in 0..5 {
        let (n, na) = (rng.random_range(3..=8), rng.random_range(2..=4));
        let mdp = make_mdp(MdpKind::MultiAction, n, na, rng.random())?;
        let pi = TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng);
        let expert = TabularPolicy::random(n, na, SUPPORT_FLOOR, &mut rng);
        let kl = kl_report(&mdp, &pi, &expert)?;
        report.counterexample_idd = report.counterexample_idd.max(kl.idd);
    }
    Ok(report)
}
