use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dynamics::{ElModel, GeneralizedCoords, CATALOG};
use crate::env::Env;
use crate::expert::{rollout_dataset_with, LinearController, Trajectory, TrajectoryStep};
use crate::imitation::{ImitationConfig, Mode};
use crate::neural::{Activation, GaussianPolicy};

fn lqr_or_zero(env: &Env) -> impl FnMut(&[f64]) -> Result<Vec<f64>, crate::expert::ExpertError> {
    let lqr = LinearController::lqr(env).ok();
    let m = env.action_dim();
    move |s: &[f64]| Ok(lqr.as_ref().map_or_else(|| vec![1.0; m], |c| c.action(s)))
}

/// Twin datasets: the same controls replayed with and without noise.
fn noisy_twin(id: &str, eps: f64, n_steps: usize, seed: u64) -> (TrajectoryDataset, TrajectoryDataset) {
    let model = ElModel::from_id(id).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for _ in 0..n_steps {
        let s = model.sample_state(&mut r);
        let u = model.sample_control(&mut r);
        let next = model.forward_step(&s, &u, 0.0, 0).unwrap();
        let next_noisy = model.forward_step_with(&s, &u, eps, &mut r).unwrap();
        let mk = |n: &GeneralizedCoords| TrajectoryStep { state: s.to_state(), action: u.u.clone(), next_state: n.to_state() };
        clean.push(Trajectory { steps: vec![mk(&next)], episode_return: 0.0 });
        noisy.push(Trajectory { steps: vec![mk(&next_noisy)], episode_return: 0.0 });
    }
    let wrap = |trajectories| TrajectoryDataset {
        env_id: id.to_string(),
        dt: model.dt(),
        state_dim: model.state_dim(),
        action_dim: model.act_dim(),
        horizon: 1,
        trajectories,
    };
    (wrap(clean), wrap(noisy))
}

#[test]
fn clean_expert_data_has_unique_actions() {
    for id in CATALOG {
        let env = Env::new(id, 0.0, 0).unwrap();
        let ds = rollout_dataset_with(&env, 2, 3, lqr_or_zero(&env)).unwrap();
        let report = uniqueness_report(env.model(), &ds, 50, 1).unwrap();
        assert_eq!(report.n_transitions, ds.n_transitions(), "{id}");
        assert_eq!(report.infeasible_count, 0, "{id}");
        assert_eq!(report.alternatives_found, 0, "{id}");
        assert!(report.max_recovery_error <= 1e-9, "{id}: {}", report.max_recovery_error);
        assert_eq!(report.candidates_probed, 50 * ds.n_transitions());
        // the observation-only view carries the same evidence
        assert_eq!(uniqueness_report(env.model(), &ds.strip_actions(), 50, 1).unwrap(), report);
    }
}

#[test]
fn empty_dataset_gives_zero_counters() {
    let (mut ds, _) = noisy_twin("pendulum", 0.0, 1, 0);
    ds.trajectories.clear();
    let report = uniqueness_report(&ElModel::pendulum(), &ds, 10, 0).unwrap();
    assert_eq!(report.n_transitions, 0);
    assert_eq!(report.infeasible_count, 0);
    assert_eq!(report.alternatives_found, 0);
    assert_eq!(report.max_recovery_error, 0.0);
}

#[test]
fn mismatched_dataset_is_rejected() {
    let (ds, _) = noisy_twin("pendulum", 0.0, 2, 0);
    assert!(matches!(uniqueness_report(&ElModel::cartpole(), &ds, 1, 0), Err(AnalysisError::DatasetMismatch(_))));
    let mut faster = ElModel::pendulum();
    faster.set_dt(0.01);
    assert!(matches!(uniqueness_report(&faster, &ds, 1, 0), Err(AnalysisError::DatasetMismatch(_))));
}

#[test]
fn noisy_transitions_fail_exact_test_but_pass_relaxed_one() {
    let eps = 0.05;
    let model = ElModel::reacher2();
    let (_, noisy) = noisy_twin("reacher2", eps, 200, 4);
    let exact = uniqueness_report(&model, &noisy, 0, 0).unwrap();
    assert_eq!(exact.infeasible_count, 200);
    let relaxed = uniqueness_report_tol(&model, &noisy, 20, 0, &model.feasibility_tol(eps)).unwrap();
    assert_eq!(relaxed.infeasible_count, 0);
    assert_eq!(relaxed.n_transitions, 200);
}

#[test]
fn recovery_error_scales_with_noise_over_dt() {
    // pendulum: u = m l² q̈ + ..., and noise of at most ε/2 on q̇' moves q̈
    // by at most ε / (2 dt)
    let model = ElModel::pendulum();
    let inertia = model.system().mass_matrix(&[0.0])[(0, 0)];
    let mut errors = Vec::new();
    for eps in [0.05, 0.025, 0.0125] {
        let (clean, noisy) = noisy_twin("pendulum", eps, 500, 5);
        let (zero, bad) = action_recovery_error(&model, &clean, &model.feasibility_tol(0.0)).unwrap();
        assert!(zero <= 1e-9 && bad == 0);
        let (err, bad) = action_recovery_error(&model, &noisy, &model.feasibility_tol(eps)).unwrap();
        assert_eq!(bad, 0);
        let bound = inertia * eps / (2.0 * model.dt());
        assert!(err <= bound * (1.0 + 1e-9), "ε = {eps}: {err} > {bound}");
        // 500 uniform draws come close to the edge of the interval
        assert!(err >= 0.9 * bound, "ε = {eps}: {err} ≪ {bound}");
        errors.push(err);
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
    }
}

fn numeric_lipschitz(std: f64) -> f64 {
    // max |N'(a)| over a fine grid, derivative by central differences
    let n = |a: f64| (-0.5 * (a / std).powi(2)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
    let h = 1e-6 * std;
    (0..=200_000)
        .map(|k| -5.0 * std + 10.0 * std * k as f64 / 200_000.0)
        .map(|a| ((n(a + h) - n(a - h)) / (2.0 * h)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn lipschitz_constant_matches_grid_maximization() {
    for std in [0.3, 1.0, 2.0] {
        let exact = gaussian_lipschitz(std).unwrap();
        let numeric = numeric_lipschitz(std);
        assert!((exact - numeric).abs() <= 1e-6 * exact, "σ = {std}: {exact} vs {numeric}");
    }
    assert!((gaussian_lipschitz(1.0).unwrap() - 0.2420).abs() < 5e-5);
    assert!((gaussian_lipschitz(2.0).unwrap() - 0.0605).abs() < 5e-5);
    for bad in [0.0, -1.0, f64::NAN] {
        assert!(matches!(gaussian_lipschitz(bad), Err(AnalysisError::NonpositiveStd(_))));
    }
}

proptest! {
    #[test]
    fn lipschitz_scales_as_inverse_variance(std in 1e-3f64..1e3) {
        let l = gaussian_lipschitz(std).unwrap();
        prop_assert!((l * std * std - gaussian_lipschitz(1.0).unwrap()).abs() < 1e-12);
    }
}

fn wide_policy(log_std: f64, seed: u64) -> GaussianPolicy {
    let mut p = GaussianPolicy::new(3, 2, &[8], Activation::Tanh, false, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    p.log_std.fill(log_std);
    p
}

fn random_states(n: usize, seed: u64) -> DMatrix<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(3, n, |_, _| r.random_range(-2.0..2.0))
}

#[test]
fn zero_width_interval_gives_unit_ratio() {
    let report = xi_bound_check(&wide_policy(0.0, 1), &random_states(100, 2), 0.0, DEFAULT_GRID_POINTS, 3).unwrap();
    assert_eq!(report.max_xi_deviation, 0.0);
    assert_eq!(report.bound_violations, 0);
    assert_eq!(report.n_evaluations, 200);
}

#[test]
fn bracket_holds_and_deviation_is_first_order_in_delta() {
    let states = random_states(5000, 7);
    for log_std in [0.0, 0.5] {
        let policy = wide_policy(log_std, 8);
        let mut devs = Vec::new();
        for delta in [0.2, 0.1, 0.05, 0.025] {
            let r = xi_bound_check(&policy, &states, delta, DEFAULT_GRID_POINTS, 9).unwrap();
            assert_eq!(r.n_samples + r.skipped, 10_000);
            assert_eq!(r.bound_violations, 0, "δ = {delta}");
            devs.push(r.max_xi_deviation);
        }
        for w in devs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..=2.4).contains(&ratio), "ratio {ratio} in {devs:?}");
        }
    }
}

#[test]
fn summaries_and_equivalence() {
    let s = SeedSummary::of(&[1.0, 2.0, 3.0]);
    assert_eq!((s.n, s.mean, s.std), (3, 2.0, 1.0));
    assert_eq!(format!("{s:.1}"), "2.0±1.0");
    let single = SeedSummary::of(&[4.0]);
    assert_eq!(single.std, 0.0);
    assert!(SeedSummary::of(&[]).mean.is_nan());
    let t = SeedSummary::of(&[1.0, 3.0, 5.0]);
    assert!((pooled_std(&s, &t) - (2.5f64).sqrt()).abs() < 1e-12);
    assert!(equivalent(&s, &t));
    let far = SeedSummary::of(&[10.0, 11.0, 12.0]);
    assert!(!equivalent(&s, &far));
    assert_eq!(normalized_score(-10.0, -100.0, 0.0), 0.9);
    assert_eq!(normalized_score(200.0, 10.0, 200.0), 1.0);
}

#[test]
fn sweep_cells_and_aggregation() {
    let cells = sweep_cells(&[0.0, 0.01], &[3, 4]).unwrap();
    assert_eq!(cells.len(), 8);
    assert!(matches!(sweep_cells(&[-0.1], &[0]), Err(AnalysisError::InvalidSweep(_))));
    assert!(matches!(sweep_cells(&[0.0], &[]), Err(AnalysisError::InvalidSweep(_))));
    let results: Vec<(SweepCell, f64)> = cells
        .iter()
        .rev()
        .map(|c| {
            let base = if c.mode == Mode::Gail { 10.0 } else { 20.0 };
            (*c, base + c.seed as f64 + 100.0 * c.epsilon)
        })
        .collect();
    let sweep = NoiseSweep::aggregate(&[3, 4], &results);
    assert_eq!(sweep.rows.len(), 2);
    assert_eq!(sweep.rows[0].epsilon, 0.0);
    assert_eq!(sweep.rows[0].gail, vec![13.0, 14.0]);
    assert_eq!(sweep.rows[1].gaifo, vec![24.0, 25.0]);
    assert!(!sweep.all_equivalent());
    assert_eq!(sweep.detail_csv().lines().count(), 9);
    assert_eq!(sweep.summary_csv().lines().count(), 3);
    assert!(sweep.summary_csv().lines().nth(1).unwrap().ends_with(",false"));
    assert!(sweep.summary_text().contains("13.500±0.707"));
}

#[test]
fn sweep_runs_train_in_the_noisy_env() {
    let mut env = Env::new("pendulum", 0.0, 0).unwrap();
    env.set_horizon(20);
    let lqr = LinearController::lqr(&env).unwrap();
    let ds = rollout_dataset_with(&env, 2, 0, |s| Ok(lqr.action(s))).unwrap();
    let cfg = ImitationConfig {
        batch_size: 100,
        hidden: vec![8],
        total_env_steps: 300,
        eval_every: 10,
        eval_episodes: 1,
        ..ImitationConfig::default()
    };
    let sweep = noise_sweep(&env, &ds, &cfg, &[0.0, 0.02], &[0, 1]).unwrap();
    assert_eq!(sweep.rows.len(), 2);
    assert!(sweep.rows.iter().all(|r| r.gail.len() == 2 && r.gaifo.len() == 2));
    let cell = SweepCell { epsilon: 0.02, mode: Mode::Gaifo, seed: 1 };
    let curve = run_cell(&env, &ds, &cfg, &cell).unwrap();
    assert_eq!(curve.final_return(), sweep.rows[1].gaifo[1]);
    assert_eq!(curve.metadata_value("noise_bound"), Some("0.02"));
    assert_eq!(curve.metadata_value("mode"), Some("gaifo"));
    // noise changes the outcome
    assert_ne!(sweep.rows[0].gaifo[1], sweep.rows[1].gaifo[1]);
}

#[test]
fn zero_action_baseline_is_seeded() {
    let env = Env::new("pendulum", 0.0, 0).unwrap();
    let a = zero_action_return(&env, 3, 0).unwrap();
    assert_eq!(a, zero_action_return(&env, 3, 0).unwrap());
    assert!(a < -100.0);
    let cart = Env::new("cartpole", 0.0, 0).unwrap();
    let r = zero_action_return(&cart, 3, 0).unwrap();
    assert!(r > 0.0 && r < 200.0);
}
