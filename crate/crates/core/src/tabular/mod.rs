//! Exact occupancy measures and KL divergences on finite MDPs.
//!
//! Everything here is computed in closed form so the identity
//! `KL(ρπ(a|s,s') ‖ ρE(a|s,s')) = KL(ρπ(s,a) ‖ ρE(s,a)) − KL(ρπ(s,s') ‖ ρE(s,s'))`
//! and its collapse on unique-action dynamics can be checked at machine
//! precision.

mod io;
mod kl;
mod monte_carlo;
mod occupancy;
mod suite;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use thiserror::Error;

pub use io::{parse_mdp, write_mdp};
pub use kl::{inverse_dynamics_density, kl_report, InverseDynamicsTable, KlReport};
pub use monte_carlo::{monte_carlo_occupancy, MonteCarloEstimate};
pub use occupancy::{exact_occupancies, OccupancyTriple};
pub use suite::{verify_suite, SuiteReport};

/// Uniform mixing weight applied to full-support policies.
pub const SUPPORT_FLOOR: f64 = 1e-6;
pub const DEFAULT_GAMMA: f64 = 0.9;
const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("occupancy system is singular")]
    SingularSystem,
    #[error("support violation in {measure}: expert mass is zero where learner mass is {learner_mass:e}")]
    SupportViolation { measure: &'static str, learner_mass: f64 },
    #[error("infeasible shape: {0}")]
    InfeasibleShape(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    /// `T(s'|s,a)` stored at `[(s * n_actions + a) * n_states + s']`.
    transition: Vec<f64>,
    gamma: f64,
    rho0: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        gamma: f64,
        rho0: Vec<f64>,
    ) -> Result<Self, TabularError> {
        if n_states == 0 || n_actions == 0 {
            return Err(TabularError::InvalidMdp("empty state or action set".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(TabularError::InvalidMdp(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(TabularError::InvalidMdp(format!("gamma {gamma} outside [0, 1)")));
        }
        for (row, probs) in transition.chunks(n_states).enumerate() {
            check_distribution(probs).map_err(|m| {
                TabularError::InvalidMdp(format!(
                    "T(.|s={}, a={}) {m}",
                    row / n_actions,
                    row % n_actions
                ))
            })?;
        }
        if rho0.len() != n_states {
            return Err(TabularError::InvalidMdp("rho0 length differs from n_states".into()));
        }
        check_distribution(&rho0).map_err(|m| TabularError::InvalidMdp(format!("rho0 {m}")))?;
        Ok(Self {
            n_states,
            n_actions,
            transition,
            gamma,
            rho0,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self, TabularError> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(TabularError::InvalidMdp(format!("gamma {gamma} outside [0, 1)")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s_next]
    }

    /// `T(·|s,a)` as a slice.
    pub fn next_distribution(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn is_deterministic(&self) -> bool {
        self.transition.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Number of actions inducing each `(s, s')` pair with positive probability,
    /// stored at `[s * n_states + s']`.
    pub fn inducing_action_counts(&self) -> Vec<usize> {
        let n = self.n_states;
        let mut counts = vec![0; n * n];
        for s in 0..n {
            for a in 0..self.n_actions {
                for (s_next, &p) in self.next_distribution(s, a).iter().enumerate() {
                    if p > 0.0 {
                        counts[s * n + s_next] += 1;
                    }
                }
            }
        }
        counts
    }
}

fn check_distribution(p: &[f64]) -> Result<(), String> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err("has a negative or non-finite entry".into());
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    /// `π(a|s)` at `[s * n_actions + a]`.
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, TabularError> {
        if probs.len() != n_states * n_actions {
            return Err(TabularError::InvalidPolicy(format!(
                "{} entries, expected {}",
                probs.len(),
                n_states * n_actions
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_distribution(row).map_err(|m| TabularError::InvalidPolicy(format!("π(.|s={s}) {m}")))?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Random rows from the flat Dirichlet, mixed so every entry is at
    /// least `support_floor`.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_actions: usize, support_floor: f64, rng: &mut R) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            probs.extend(simplex_sample(n_actions, rng));
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
        .with_support_floor(support_floor)
    }

    /// Uniform mixing `(1 − α) π + α / |A|` with `α = floor · |A|`.
    pub fn with_support_floor(mut self, floor: f64) -> Self {
        let n = self.n_actions as f64;
        let alpha = (floor * n).clamp(0.0, 1.0);
        for p in &mut self.probs {
            *p = (1.0 - alpha) * *p + alpha / n;
        }
        self
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_against(&self, mdp: &FiniteMdp) -> Result<(), TabularError> {
        if self.n_states != mdp.n_states || self.n_actions != mdp.n_actions {
            return Err(TabularError::InvalidPolicy(format!(
                "policy shape {}x{} does not match MDP {}x{}",
                self.n_states, self.n_actions, mdp.n_states, mdp.n_actions
            )));
        }
        Ok(())
    }
}

fn simplex_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    let mut p: Vec<f64> = draws.iter().map(|x| x / total).collect();
    // keep the row sum within rounding of one
    let drift: f64 = 1.0 - p.iter().sum::<f64>();
    p[0] += drift;
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdpKind {
    /// Deterministic; each reachable `(s, s')` has exactly one inducing action.
    UniqueAction,
    /// Deterministic; at least one `(s, s')` is induced by two actions.
    MultiAction,
    /// Rows drawn from the flat Dirichlet.
    RandomStochastic,
}

impl std::str::FromStr for MdpKind {
    type Err = TabularError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unique_action" => Ok(MdpKind::UniqueAction),
            "multi_action" => Ok(MdpKind::MultiAction),
            "random_stochastic" => Ok(MdpKind::RandomStochastic),
            other => Err(TabularError::InfeasibleShape(format!("unknown MDP kind `{other}`"))),
        }
    }
}

pub fn make_mdp(kind: MdpKind, n_states: usize, n_actions: usize, rng_seed: u64) -> Result<FiniteMdp, TabularError> {
    if n_states == 0 || n_actions == 0 {
        return Err(TabularError::InfeasibleShape("empty state or action set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = n_states;
    let mut transition = vec![0.0; n * n_actions * n];
    let idx = |s: usize, a: usize, sn: usize| (s * n_actions + a) * n + sn;
    match kind {
        MdpKind::UniqueAction => {
            if n_actions > n_states {
                return Err(TabularError::InfeasibleShape(format!(
                    "unique-action dynamics need n_actions ({n_actions}) <= n_states ({n_states})"
                )));
            }
            for s in 0..n {
                let mut targets: Vec<usize> = (0..n).collect();
                for i in 0..n_actions {
                    let j = rng.random_range(i..n);
                    targets.swap(i, j);
                    transition[idx(s, i, targets[i])] = 1.0;
                }
            }
        }
        MdpKind::MultiAction => {
            if n_actions < 2 {
                return Err(TabularError::InfeasibleShape("multi-action dynamics need at least 2 actions".into()));
            }
            let shared = rng.random_range(0..n);
            for s in 0..n {
                let first = rng.random_range(0..n);
                for a in 0..n_actions {
                    let target = if a < 2 && s == shared { first } else { rng.random_range(0..n) };
                    transition[idx(s, a, target)] = 1.0;
                }
            }
        }
        MdpKind::RandomStochastic => {
            for row in transition.chunks_mut(n) {
                row.copy_from_slice(&simplex_sample(n, &mut rng));
            }
        }
    }
    let rho0 = simplex_sample(n, &mut rng);
    FiniteMdp::new(n, n_actions, transition, DEFAULT_GAMMA, rho0)
}

#[cfg(test)]
mod tests;
