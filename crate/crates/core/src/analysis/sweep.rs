use std::fmt::Write as _;

use crate::env::Env;
use crate::expert::TrajectoryDataset;
use crate::imitation::{evaluate_with, stream_seed, train, ImitationConfig, LearningCurve, Mode, Stream};

use super::AnalysisError;

/// Mean and sample standard deviation (n − 1) of per-seed results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedSummary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl SeedSummary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { n, mean, std }
    }
}

impl std::fmt::Display for SeedSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(2);
        write!(f, "{:.p$}±{:.p$}", self.mean, self.std)
    }
}

/// `√((s₁² + s₂²) / 2)`.
pub fn pooled_std(a: &SeedSummary, b: &SeedSummary) -> f64 {
    ((a.std * a.std + b.std * b.std) / 2.0).sqrt()
}

/// Means closer than the pooled standard deviation.
pub fn equivalent(a: &SeedSummary, b: &SeedSummary) -> bool {
    (a.mean - b.mean).abs() <= pooled_std(a, b)
}

/// `(r − r₀) / (r_expert − r₀)`: 0 at the baseline, 1 at the expert.
pub fn normalized_score(r: f64, baseline: f64, expert: f64) -> f64 {
    (r - baseline) / (expert - baseline)
}

/// Evaluation return of the all-zero controller on the evaluation stream of
/// `seed`.
pub fn zero_action_return(env: &Env, episodes: usize, seed: u64) -> Result<f64, AnalysisError> {
    let zeros = vec![0.0; env.action_dim()];
    let (mean, _) = evaluate_with(env.reseeded(stream_seed(seed, Stream::Eval)), episodes, |_| Ok(zeros.clone()))?;
    Ok(mean)
}

/// One independent (ε, mode, seed) training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub epsilon: f64,
    pub mode: Mode,
    pub seed: u64,
}

pub fn sweep_cells(epsilons: &[f64], seeds: &[u64]) -> Result<Vec<SweepCell>, AnalysisError> {
    if let Some(e) = epsilons.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
        return Err(AnalysisError::InvalidSweep(format!("noise bound {e} must be finite and nonnegative")));
    }
    if seeds.is_empty() {
        return Err(AnalysisError::InvalidSweep("no seeds".into()));
    }
    let mut cells = Vec::new();
    for &epsilon in epsilons {
        for mode in [Mode::Gail, Mode::Gaifo] {
            for &seed in seeds {
                cells.push(SweepCell { epsilon, mode, seed });
            }
        }
    }
    Ok(cells)
}

/// Trains one cell in the ε-noisy environment; GAIfO only ever sees the
/// state-only view of the demonstrations.
pub fn run_cell(
    env: &Env,
    dataset: &TrajectoryDataset,
    base: &ImitationConfig,
    cell: &SweepCell,
) -> Result<LearningCurve, AnalysisError> {
    let cfg = ImitationConfig {
        mode: cell.mode,
        seed: cell.seed,
        noise_bound: cell.epsilon,
        ..base.clone()
    };
    let data = match cell.mode {
        Mode::Gail => dataset.clone(),
        Mode::Gaifo => dataset.strip_actions(),
    };
    Ok(train(env, &data, &cfg)?.curve)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    /// Final evaluation returns in seed order.
    pub gail: Vec<f64>,
    pub gaifo: Vec<f64>,
}

impl SweepRow {
    pub fn gail_summary(&self) -> SeedSummary {
        SeedSummary::of(&self.gail)
    }

    pub fn gaifo_summary(&self) -> SeedSummary {
        SeedSummary::of(&self.gaifo)
    }

    pub fn equivalent(&self) -> bool {
        equivalent(&self.gail_summary(), &self.gaifo_summary())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweep {
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

impl NoiseSweep {
    /// Groups per-cell final returns; `results` pairs with the output of
    /// [`sweep_cells`] in any order.
    pub fn aggregate(seeds: &[u64], results: &[(SweepCell, f64)]) -> Self {
        let mut epsilons: Vec<f64> = Vec::new();
        for (c, _) in results {
            if !epsilons.contains(&c.epsilon) {
                epsilons.push(c.epsilon);
            }
        }
        epsilons.sort_by(f64::total_cmp);
        let pick = |eps: f64, mode: Mode| -> Vec<f64> {
            seeds
                .iter()
                .filter_map(|&s| {
                    results
                        .iter()
                        .find(|(c, _)| c.epsilon == eps && c.mode == mode && c.seed == s)
                        .map(|(_, r)| *r)
                })
                .collect()
        };
        let rows = epsilons
            .into_iter()
            .map(|epsilon| SweepRow {
                epsilon,
                gail: pick(epsilon, Mode::Gail),
                gaifo: pick(epsilon, Mode::Gaifo),
            })
            .collect();
        Self { seeds: seeds.to_vec(), rows }
    }

    pub fn all_equivalent(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(SweepRow::equivalent)
    }

    /// One line per (ε, mode, seed), then nothing else.
    pub fn detail_csv(&self) -> String {
        let mut out = String::from("epsilon,mode,seed,final_return\n");
        for row in &self.rows {
            for (mode, xs) in [(Mode::Gail, &row.gail), (Mode::Gaifo, &row.gaifo)] {
                for (seed, r) in self.seeds.iter().zip(xs) {
                    let _ = writeln!(out, "{},{},{},{}", row.epsilon, mode, seed, r);
                }
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("epsilon,gail_mean,gail_std,gaifo_mean,gaifo_std,abs_diff,pooled_std,equivalent\n");
        for row in &self.rows {
            let (g, o) = (row.gail_summary(), row.gaifo_summary());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                row.epsilon,
                g.mean,
                g.std,
                o.mean,
                o.std,
                (g.mean - o.mean).abs(),
                pooled_std(&g, &o),
                row.equivalent()
            );
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>8}  {:>18}  {:>18}  {:>10}  {:>10}  equivalent", "epsilon", "gail", "gaifo", "|diff|", "pooled");
        for row in &self.rows {
            let (g, o) = (row.gail_summary(), row.gaifo_summary());
            let _ = writeln!(
                out,
                "{:>8}  {:>18}  {:>18}  {:>10.3}  {:>10.3}  {}",
                row.epsilon,
                format!("{g:.3}"),
                format!("{o:.3}"),
                (g.mean - o.mean).abs(),
                pooled_std(&g, &o),
                if row.equivalent() { "yes" } else { "no" }
            );
        }
        out
    }
}

/// Trains every cell in sequence; callers wanting parallelism run
/// [`run_cell`] themselves and use [`NoiseSweep::aggregate`].
pub fn noise_sweep(
    env: &Env,
    dataset: &TrajectoryDataset,
    base: &ImitationConfig,
    epsilons: &[f64],
    seeds: &[u64],
) -> Result<NoiseSweep, AnalysisError> {
    let cells = sweep_cells(epsilons, seeds)?;
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        let curve = run_cell(env, dataset, base, &cell)?;
        results.push((cell, curve.final_return()));
    }
    Ok(NoiseSweep::aggregate(seeds, &results))
}
