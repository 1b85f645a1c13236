use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::neural::GaussianPolicy;

use super::AnalysisError;

pub const DEFAULT_GRID_POINTS: usize = 201;

/// Relative slack for rounding when testing bracket membership.
const ROUNDING_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct XiBoundReport {
    pub delta: f64,
    /// Largest per-dimension Lipschitz constant of the policy density.
    pub lipschitz_l: f64,
    /// Checked (state, action dimension) samples.
    pub n_samples: usize,
    /// Ratio evaluations over all grids.
    pub n_evaluations: usize,
    pub max_xi_deviation: f64,
    pub bound_violations: usize,
    /// Samples where `π(a|s) ≤ ½ L δ`, so the upper bracket is undefined.
    pub skipped: usize,
}

impl XiBoundReport {
    pub fn csv_header() -> &'static str {
        "delta,lipschitz_l,n_samples,n_evaluations,max_xi_deviation,bound_violations,skipped"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{},{},{:e},{},{}",
            self.delta,
            self.lipschitz_l,
            self.n_samples,
            self.n_evaluations,
            self.max_xi_deviation,
            self.bound_violations,
            self.skipped
        )
    }
}

/// `max |d/da N(a; μ, σ²)| = 1 / (σ² √(2π e))`, attained at `a = μ ± σ`.
pub fn gaussian_lipschitz(std: f64) -> Result<f64, AnalysisError> {
    if !(std > 0.0) || !std.is_finite() {
        return Err(AnalysisError::NonpositiveStd(std));
    }
    Ok(1.0 / (std * std * (2.0 * PI * E).sqrt()))
}

fn density(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
}

/// Samples `a ~ π(·|s)` at every column of `states` and checks, dimension by
/// dimension, that `Ξ = π(a|s) / π(ã|s)` over a grid of `ã ∈ [a − δ/2, a + δ/2]`
/// stays inside `[π / (π + ½Lδ), π / (π − ½Lδ)]`.
pub fn xi_bound_check(
    policy: &GaussianPolicy,
    states: &DMatrix<f64>,
    delta: f64,
    grid_points: usize,
    seed: u64,
) -> Result<XiBoundReport, AnalysisError> {
    let std = policy.std();
    let lipschitz: Vec<f64> = std.iter().map(|&s| gaussian_lipschitz(s)).collect::<Result<_, _>>()?;
    let means = policy.mean(states).map_err(crate::imitation::ImitationError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = if delta == 0.0 { 1 } else { grid_points.max(2) };

    let mut report = XiBoundReport {
        delta,
        lipschitz_l: lipschitz.iter().copied().fold(0.0, f64::max),
        n_samples: 0,
        n_evaluations: 0,
        max_xi_deviation: 0.0,
        bound_violations: 0,
        skipped: 0,
    };
    for col in 0..states.ncols() {
        for d in 0..policy.action_dim() {
            let (mu, sigma) = (means[(d, col)], std[d]);
            let a = Normal::new(mu, sigma).expect("positive std").sample(&mut rng);
            let p = density(a, mu, sigma);
            let half = 0.5 * lipschitz[d] * delta;
            if p - half <= 0.0 {
                report.skipped += 1;
                continue;
            }
            let (lo, hi) = (p / (p + half), p / (p - half));
            report.n_samples += 1;
            for k in 0..grid {
                let a_tilde = if grid == 1 { a } else { a - 0.5 * delta + delta * k as f64 / (grid - 1) as f64 };
                let xi = p / density(a_tilde, mu, sigma);
                report.n_evaluations += 1;
                report.max_xi_deviation = report.max_xi_deviation.max((xi - 1.0).abs());
                if xi < lo * (1.0 - ROUNDING_SLACK) || xi > hi * (1.0 + ROUNDING_SLACK) {
                    report.bound_violations += 1;
                }
            }
        }
    }
    Ok(report)
}
