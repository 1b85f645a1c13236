use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FiniteMdp, OccupancyTriple, TabularPolicy};

/// Empirical occupancies with per-entry standard errors.
#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub occupancy: OccupancyTriple,
    /// Standard error of each `rho_sa` entry.
    pub se_sa: Vec<f64>,
    /// Standard error of each state occupancy `ρ(s)`.
    pub se_state: Vec<f64>,
    pub n_rollouts: usize,
    pub horizon: usize,
    /// Upper bound `γ^H / (1 − γ)` on the mass lost to truncation.
    pub truncation_bound: f64,
}

fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left `u` beyond the final partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Discounted visitation counts averaged over truncated rollouts.
pub fn monte_carlo_occupancy(
    mdp: &FiniteMdp,
    pi: &TabularPolicy,
    n_rollouts: usize,
    horizon: usize,
    rng_seed: u64,
) -> MonteCarloEstimate {
    assert!(n_rollouts > 0, "need at least one rollout");
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let gamma = mdp.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut sum = OccupancyTriple::zeros(n, na);
    let mut sq_sa = vec![0.0; n * na];
    let mut sq_state = vec![0.0; n];
    let mut episode_sa = vec![0.0; n * na];

    for _ in 0..n_rollouts {
        episode_sa.iter_mut().for_each(|x| *x = 0.0);
        let mut s = categorical(mdp.rho0(), &mut rng);
        let mut discount = 1.0;
        for _ in 0..horizon {
            let a = categorical(pi.row(s), &mut rng);
            let s_next = categorical(mdp.next_distribution(s, a), &mut rng);
            episode_sa[s * na + a] += discount;
            sum.rho_ss[s * n + s_next] += discount;
            sum.rho_sas[(s * na + a) * n + s_next] += discount;
            discount *= gamma;
            s = s_next;
        }
        for (i, &x) in episode_sa.iter().enumerate() {
            sum.rho_sa[i] += x;
            sq_sa[i] += x * x;
        }
        for s in 0..n {
            let x: f64 = episode_sa[s * na..(s + 1) * na].iter().sum();
            sq_state[s] += x * x;
        }
    }

    let count = n_rollouts as f64;
    let finish = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x /= count);
    finish(&mut sum.rho_sa);
    finish(&mut sum.rho_ss);
    finish(&mut sum.rho_sas);

    let se = |sq: f64, mean: f64| ((sq / count - mean * mean).max(0.0) / (count - 1.0).max(1.0)).sqrt();
    let se_sa = sq_sa.iter().zip(&sum.rho_sa).map(|(&q, &m)| se(q, m)).collect();
    let state = sum.state();
    let se_state = sq_state.iter().zip(&state).map(|(&q, &m)| se(q, m)).collect();

    MonteCarloEstimate {
        occupancy: sum,
        se_sa,
        se_state,
        n_rollouts,
        horizon,
        truncation_bound: gamma.powi(horizon as i32) / (1.0 - gamma),
    }
}
