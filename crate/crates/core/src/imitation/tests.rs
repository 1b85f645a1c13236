use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::env::Env;
use crate::expert::rollout_dataset_with;
use crate::expert::LinearController;
use crate::neural::{Activation, GaussianPolicy, Mlp};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_cfg(mode: Mode) -> ImitationConfig {
    ImitationConfig {
        mode,
        batch_size: 200,
        hidden: vec![16, 16],
        total_env_steps: 200 * 12,
        eval_every: 4,
        eval_episodes: 2,
        ..ImitationConfig::default()
    }
}

fn short_pendulum() -> Env {
    let mut env = Env::new("pendulum", 0.0, 0).unwrap();
    env.set_horizon(50);
    env
}

fn lqr_dataset(env: &Env, n: usize) -> crate::expert::TrajectoryDataset {
    let lqr = LinearController::lqr(env).unwrap();
    rollout_dataset_with(env, n, 7, |s| Ok(lqr.action(s))).unwrap()
}

#[test]
fn horizon_two_batch_four_has_two_boundaries() {
    let mut env = Env::new("pendulum", 0.0, 3).unwrap();
    env.set_horizon(2);
    let cfg = small_cfg(Mode::Gail);
    let mut agent = new_actor_critic(&env, &cfg).unwrap();
    let mut sampler = Sampler::new(env);
    let batch = collect_rollouts(&mut sampler, &mut agent, 4, &mut rng(0)).unwrap();
    assert_eq!(batch.len(), 4);
    assert_eq!(batch.boundary, vec![false, true, false, true]);
    assert_eq!(batch.terminated, vec![false; 4]);
}

#[test]
fn consecutive_states_chain_between_boundaries() {
    let mut env = Env::new("cartpole", 0.0, 4).unwrap();
    env.set_horizon(30);
    let cfg = small_cfg(Mode::Gail);
    let mut agent = new_actor_critic(&env, &cfg).unwrap();
    let mut sampler = Sampler::new(env);
    for _ in 0..3 {
        let b = collect_rollouts(&mut sampler, &mut agent, 97, &mut rng(1)).unwrap();
        assert!(b.boundary.iter().any(|&x| x));
        for t in 0..b.len() - 1 {
            if !b.boundary[t] {
                assert_eq!(b.next_states.column(t), b.states.column(t + 1), "step {t}");
            }
        }
        assert_eq!(b.log_probs.len(), b.len());
        assert_eq!(b.values.len(), b.len());
    }
}

#[test]
fn collection_is_deterministic_under_a_seed() {
    let env = short_pendulum();
    let cfg = small_cfg(Mode::Gail);
    let run = || {
        let mut agent = new_actor_critic(&env, &cfg).unwrap();
        let mut sampler = Sampler::new(env.reseeded(11));
        collect_rollouts(&mut sampler, &mut agent, 150, &mut rng(5)).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn applied_actions_are_clipped_physical_controls() {
    let env = short_pendulum();
    let mut cfg = small_cfg(Mode::Gail);
    cfg.init_log_std = 1.0;
    let mut agent = new_actor_critic(&env, &cfg).unwrap();
    let mut sampler = Sampler::new(env.clone());
    let b = collect_rollouts(&mut sampler, &mut agent, 200, &mut rng(2)).unwrap();
    let bound = env.model().control_bound();
    let mut clipped = 0;
    for j in 0..b.len() {
        let raw = b.actions[(0, j)] * bound;
        let applied = b.applied_actions[(0, j)];
        assert_eq!(applied, raw.clamp(-bound, bound));
        clipped += usize::from(raw.abs() > bound);
    }
    assert!(clipped > 0);
}

#[test]
fn logistic_loss_at_one_half_is_two_ln_two() {
    let z = vec![0.0; 7];
    let parts = discriminator::loss_from_logits(&z, &z[..3], 0.0);
    assert!((parts.logistic - 2.0 * 2f64.ln()).abs() < 1e-15);
    assert!((parts.entropy - 2f64.ln()).abs() < 1e-15);
    let reg = discriminator::loss_from_logits(&z, &z, 1e-3);
    assert!((reg.total - (2.0 * 2f64.ln() - 1e-3 * 2f64.ln())).abs() < 1e-15);
}

#[test]
fn rewards_follow_negative_log_d() {
    assert!((reward_from_probability(0.5) - 2f64.ln()).abs() < 1e-15);
    assert!((reward_from_logit(0.0) - 2f64.ln()).abs() < 1e-15);
    assert!((reward_from_probability(0.0) - 1e-8f64.ln().abs()).abs() < 1e-12);
    assert!((reward_from_probability(0.0) - 18.420680743952367).abs() < 1e-9);
    assert!(reward_from_probability(1.0) > 0.0 && reward_from_probability(1.0) < 2e-8);
    assert!(reward_from_logit(-1e6).is_finite());
    assert!((reward_from_logit(-1e6) - reward_from_probability(0.0)).abs() < 1e-9);
    assert!(reward_from_logit(40.0) > 0.0);
    // agent-like inputs earn less
    let zs: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.5).collect();
    for w in zs.windows(2) {
        assert!(reward_from_logit(w[1]) <= reward_from_logit(w[0]));
    }
}

proptest! {
    #[test]
    fn logit_and_probability_rewards_agree(z in -15.0f64..15.0) {
        let d = 1.0 / (1.0 + (-z).exp());
        prop_assert!((reward_from_logit(z) - reward_from_probability(d)).abs() < 1e-9);
    }
}

fn gaussian_cloud(n: usize, center: [f64; 2], r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(2, n, |i, _| center[i] + 0.2 * { let z: f64 = StandardNormal.sample(r); z })
}

#[test]
fn identical_batches_drive_d_to_one_half() {
    let mut r = rng(3);
    let mut d = Discriminator::new(2, &[16, 16], Activation::Tanh, 1e-2, 0.0, false, &mut r).unwrap();
    let last = d.net.n_layers() - 1;
    let bias_at = d.net.weight_range(last).end;
    d.net.params_mut()[bias_at] = 2.0;
    let x = gaussian_cloud(64, [0.0, 0.0], &mut r);
    let (parts, _) = d.loss_and_grad(&x, &x).unwrap();
    assert!(parts.logistic > 2.0 * 2f64.ln());
    for _ in 0..300 {
        d.update(&x, &x).unwrap();
    }
    for p in d.probabilities(&x).unwrap() {
        assert!((p - 0.5).abs() < 0.02, "p = {p}");
    }
    let parts = d.loss(&x, &x).unwrap();
    assert!((parts.logistic - 2.0 * 2f64.ln()).abs() < 1e-3);
}

#[test]
fn identical_batches_gradient_points_toward_one_half() {
    // dL/dz summed over both copies of a sample is (2p − 1)/n: positive
    // when D leans agent, negative when it leans expert
    let x = DMatrix::from_row_slice(1, 3, &[-1.0, 0.0, 1.0]);
    for bias in [-1.5, 1.5] {
        let mut d = Discriminator::new(1, &[], Activation::Tanh, 1e-3, 0.0, false, &mut rng(0)).unwrap();
        d.net.params_mut()[0] = 0.0;
        d.net.params_mut()[1] = bias;
        let (_, g) = d.loss_and_grad(&x, &x).unwrap();
        assert!(g[0].abs() < 1e-12);
        assert_eq!(g[1].signum(), bias.signum());
    }
}

/// Brute-force search over directions for a hyperplane with a positive
/// margin on both sets.
fn separating_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in 0..3600 {
        let th = k as f64 * std::f64::consts::PI / 1800.0;
        let (c, s) = (th.cos(), th.sin());
        let pa = a.column_iter().map(|x| c * x[0] + s * x[1]).fold(f64::INFINITY, f64::min);
        let pb = b.column_iter().map(|x| c * x[0] + s * x[1]).fold(f64::NEG_INFINITY, f64::max);
        best = best.max(pa - pb);
    }
    best
}

#[test]
fn separable_toy_set_is_learned() {
    let mut r = rng(9);
    let agent = gaussian_cloud(500, [1.0, 0.5], &mut r);
    let expert = gaussian_cloud(500, [-1.0, -0.5], &mut r);
    let margin = separating_margin(&agent, &expert);
    assert!(margin > 0.0, "toy set must be separable, margin {margin}");
    let mut d = Discriminator::new(2, &[32, 32], Activation::Tanh, 3e-3, 1e-3, false, &mut r).unwrap();
    for _ in 0..500 {
        d.update(&agent, &expert).unwrap();
    }
    let pa = d.probabilities(&agent).unwrap();
    let pe = d.probabilities(&expert).unwrap();
    let correct = pa.iter().filter(|&&p| p > 0.5).count() + pe.iter().filter(|&&p| p < 0.5).count();
    let acc = correct as f64 / 1000.0;
    assert!(acc > 0.99, "accuracy {acc}");
    assert_eq!(d.updates(), 500);
}

#[test]
fn discriminator_rejects_bad_batches() {
    let mut d = Discriminator::new(3, &[8], Activation::Tanh, 1e-3, 0.0, false, &mut rng(0)).unwrap();
    let empty = DMatrix::zeros(3, 0);
    let ok = DMatrix::zeros(3, 4);
    assert!(matches!(d.update(&empty, &ok), Err(ImitationError::EmptyBatch)));
    assert!(matches!(d.update(&ok, &empty), Err(ImitationError::EmptyBatch)));
    let wide = DMatrix::zeros(4, 4);
    assert!(matches!(
        d.update(&ok, &wide),
        Err(ImitationError::Neural(crate::neural::NeuralError::ShapeMismatch { expected: 3, found: 4, .. }))
    ));
}

/// `σ̂ = uᵀ W v` at the current weights, as after a power-iteration step.
fn refresh_sigma(d: &mut Discriminator) {
    if let Some(s) = &mut d.spectral {
        for l in 0..d.net.n_layers() {
            s.sigma[l] = s.u[l].dot(&(d.net.weight(l) * &s.v[l]));
        }
    }
}

fn check_disc_gradient(d: &Discriminator, seed: u64) {
    let mut r = rng(seed);
    let dim = d.input_dim();
    let a = DMatrix::from_fn(dim, 6, |_, _| StandardNormal.sample(&mut r));
    let e = DMatrix::from_fn(dim, 5, |_, _| StandardNormal.sample(&mut r));
    let (_, g) = d.loss_and_grad(&a, &e).unwrap();
    let h = 1e-6;
    for _ in 0..64 {
        let i = r.random_range(0..d.net.n_params());
        let mut p = d.clone();
        p.net.params_mut()[i] += h;
        refresh_sigma(&mut p);
        let mut m = d.clone();
        m.net.params_mut()[i] -= h;
        refresh_sigma(&mut m);
        let numeric = (p.loss_and_grad(&a, &e).unwrap().0.total - m.loss_and_grad(&a, &e).unwrap().0.total) / (2.0 * h);
        let err = (g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(1e-8);
        assert!(err < 1e-4 || (g[i] - numeric).abs() < 1e-9, "seed {seed} param {i}: {} vs {numeric}", g[i]);
    }
}

#[test]
fn discriminator_loss_gradient_matches_finite_differences() {
    let mut r = rng(21);
    let mut plain = Discriminator::new(5, &[12, 12], Activation::Tanh, 1e-3, 0.3, false, &mut r).unwrap();
    let x = DMatrix::from_fn(5, 40, |_, _| StandardNormal.sample(&mut r));
    plain.norm.update(&(x * 2.0));
    check_disc_gradient(&plain, 1);

    let spectral = Discriminator::new(5, &[12, 12], Activation::Tanh, 1e-3, 0.3, true, &mut r).unwrap();
    check_disc_gradient(&spectral, 2);

    let f = crate::neural::AngleFeatures::new(vec![true, false, true, false]);
    let angled = Discriminator::with_features(f, &[12], Activation::Relu, 1e-3, 0.1, true, &mut r).unwrap();
    assert_eq!(angled.input_dim(), 4);
    assert_eq!(angled.net.input_dim(), 6);
    check_disc_gradient(&angled, 3);
}

#[test]
fn transition_deltas_are_scaled_differences() {
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let s2 = DMatrix::from_row_slice(2, 2, &[1.5, 2.0, 2.0, 5.0]);
    let mut x = build_inputs(Mode::Gaifo, &s, &DMatrix::zeros(1, 2), &s2);
    discriminator::transition_deltas(&mut x, 2, 0.5);
    assert_eq!(x.column(0).as_slice(), &[1.0, 3.0, 1.5, -2.0]);
    assert_eq!(x.column(1).as_slice(), &[2.0, 4.0, 2.0, 2.0]);
}

#[test]
fn discriminator_input_layout_follows_mode() {
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let a = DMatrix::from_row_slice(1, 2, &[9.0, 8.0]);
    let s2 = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]);
    let gail = build_inputs(Mode::Gail, &s, &a, &s2);
    assert_eq!(gail.nrows(), Mode::Gail.input_dim(2, 1));
    assert_eq!(gail.column(1).as_slice(), &[2.0, 4.0, 8.0]);
    let gaifo = build_inputs(Mode::Gaifo, &s, &a, &s2);
    assert_eq!(gaifo.nrows(), Mode::Gaifo.input_dim(2, 1));
    assert_eq!(gaifo.column(0).as_slice(), &[1.0, 3.0, 5.0, 7.0]);
}

/// `A_t = Σ_k (γλ)^k δ_{t+k}` summed directly up to the end of the segment.
fn double_loop_gae(
    r: &[f64],
    v: &[f64],
    vn: &[f64],
    term: &[bool],
    boundary: &[bool],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| r[t] + if term[t] { 0.0 } else { gamma * vn[t] } - v[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut w = 1.0;
            for k in t..n {
                sum += w * delta[k];
                if boundary[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            sum
        })
        .collect()
}

#[test]
fn gae_lambda_zero_is_one_step_td() {
    let n = 6;
    let r = vec![0.5; n];
    let v = vec![2.0; n];
    let (adv, targets) = gae(&r, &v, &v, &[false; 6], &[false, false, true, false, false, false], 0.9, 0.0);
    for t in 0..n {
        assert!((adv[t] - (0.5 + 0.9 * 2.0 - 2.0)).abs() < 1e-15);
        assert!((targets[t] - (adv[t] + 2.0)).abs() < 1e-15);
    }
}

#[test]
fn gae_lambda_one_is_return_to_go_minus_value() {
    let r = [1.0, -2.0, 0.5, 3.0, 1.5];
    let v = [0.3, 0.1, -0.4, 0.2, 0.7];
    let vn = [0.1, -0.4, 0.2, 0.7, 9.0];
    let term = [false, false, false, false, true];
    let g: f64 = 0.97;
    let (adv, _) = gae(&r, &v, &vn, &term, &term, g, 1.0);
    for t in 0..5 {
        let rtg: f64 = (t..5).map(|k| g.powi((k - t) as i32) * r[k]).sum();
        assert!((adv[t] - (rtg - v[t])).abs() < 1e-12, "t = {t}");
    }
}

#[test]
fn gae_matches_double_loop_on_random_batches() {
    let mut rg = rng(77);
    for _ in 0..50 {
        let n = rg.random_range(1..120);
        let r: Vec<f64> = (0..n).map(|_| rg.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rg.random_range(-3.0..3.0)).collect();
        let vn: Vec<f64> = (0..n).map(|_| rg.random_range(-3.0..3.0)).collect();
        let term: Vec<bool> = (0..n).map(|_| rg.random_bool(0.05)).collect();
        let boundary: Vec<bool> = term.iter().map(|&t| t || rg.random_bool(0.05)).collect();
        let (g, l) = (rg.random_range(0.8..1.0), rg.random_range(0.0..1.0));
        let (adv, _) = gae(&r, &v, &vn, &term, &boundary, g, l);
        let oracle = double_loop_gae(&r, &v, &vn, &term, &boundary, g, l);
        for t in 0..n {
            assert!((adv[t] - oracle[t]).abs() < 1e-12);
        }
    }
}

#[test]
fn normalized_advantages_have_zero_mean_unit_variance() {
    let mut a: Vec<f64> = (0..100).map(|i| (i as f64).sin() * 5.0 + 3.0).collect();
    normalize_advantages(&mut a);
    let (m, s) = mean_std(&a);
    assert!(m.abs() < 1e-12);
    assert!((s - 1.0).abs() < 1e-6);
}

fn bandit_policy(seed: u64) -> (GaussianPolicy, DMatrix<f64>) {
    let policy = GaussianPolicy::new(1, 1, &[8], Activation::Tanh, false, &mut rng(seed)).unwrap();
    (policy, DMatrix::from_element(1, 500, 1.0))
}

#[test]
fn zero_advantages_leave_policy_unchanged() {
    let (mut policy, states) = bandit_policy(0);
    let actions = DMatrix::from_fn(1, 500, |_, j| (j as f64 * 0.37).sin());
    let logp = policy.log_prob_batch(&states, &actions).unwrap();
    let before = policy.params();
    let stats = trpo_step(&mut policy, &states, &actions, &logp, &vec![0.0; 500], &TrpoSettings::default()).unwrap();
    assert!(!stats.accepted);
    assert_eq!(policy.params(), before);
}

#[test]
fn bandit_mean_converges_to_optimum() {
    let (mut policy, states) = bandit_policy(1);
    let mut r = rng(2);
    let settings = TrpoSettings::default();
    for _ in 0..200 {
        let actions = DMatrix::from_fn(1, 500, |_, j| {
            policy.sample_with(states.column(j).as_slice(), false, &mut r).unwrap()[0]
        });
        let logp = policy.log_prob_batch(&states, &actions).unwrap();
        let mut adv: Vec<f64> = actions.iter().map(|a| -(a - 2.0).powi(2)).collect();
        normalize_advantages(&mut adv);
        let stats = trpo_step(&mut policy, &states, &actions, &logp, &adv, &settings).unwrap();
        if stats.accepted {
            assert!(stats.kl <= 1.5 * settings.max_kl);
        }
    }
    let mean = policy.mean(&states.columns(0, 1).into_owned()).unwrap()[0];
    assert!((mean - 2.0).abs() < 0.1, "mean {mean}");
}

#[test]
fn conjugate_gradient_solves_spd_system() {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
    let b = [1.0, 2.0, 3.0];
    let x = conjugate_gradient(|v| Ok((&a * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()), &b, 10).unwrap();
    let exact = a.lu().solve(&nalgebra::DVector::from_column_slice(&b)).unwrap();
    for i in 0..3 {
        assert!((x[i] - exact[i]).abs() < 1e-10);
    }
}

#[test]
fn value_update_at_targets_is_a_no_op() {
    let mut r = rng(4);
    let mut net = Mlp::new(&[3, 16, 1], Activation::Tanh, 1.0, &mut r).unwrap();
    let x = DMatrix::from_fn(3, 64, |_, _| StandardNormal.sample(&mut r));
    let targets: Vec<f64> = net.forward(&x).unwrap().iter().copied().collect();
    let before = net.params().to_vec();
    let mut opt = crate::neural::Adam::new(net.n_params(), 1e-3);
    let losses = value_update(&mut net, &mut opt, &x, &targets, 5, 16, &mut r).unwrap();
    assert!(losses.iter().all(|&l| l == 0.0));
    assert_eq!(net.params(), &before[..]);
}

#[test]
fn bias_only_value_net_converges_to_least_squares_constant() {
    let mut r = rng(8);
    let mut net = Mlp::zeros(&[2, 1], Activation::Tanh).unwrap();
    // inputs are all zero, so only the bias can move the output
    let x = DMatrix::zeros(2, 50);
    let targets: Vec<f64> = (0..50).map(|i| 1.5 + ((i % 7) as f64 - 3.0) * 0.1).collect();
    let oracle = targets.iter().sum::<f64>() / 50.0;
    let mut opt = crate::neural::Adam::new(net.n_params(), 1e-2);
    let losses = value_update(&mut net, &mut opt, &x, &targets, 1000, 50, &mut r).unwrap();
    assert!((net.forward(&x).unwrap()[(0, 0)] - oracle).abs() < 1e-3);
    assert!(losses.last().unwrap() < &losses[0]);
}

#[test]
fn curve_csv_round_trips() {
    let curve = LearningCurve {
        metadata: vec![("env".into(), "pendulum".into()), ("mode".into(), "gaifo".into())],
        points: vec![
            CurvePoint {
                env_steps: 0,
                eval_return_mean: -12.5,
                eval_return_std: 0.25,
                disc_loss: f64::NAN,
                policy_kl: 0.0,
            },
            CurvePoint {
                env_steps: 1024,
                eval_return_mean: -0.1 / 3.0,
                eval_return_std: 1e-300,
                disc_loss: 1.3862943611198906,
                policy_kl: 0.0098,
            },
        ],
    };
    let text = curve.to_csv();
    assert!(text.starts_with("# env=pendulum\n# mode=gaifo\nenv_steps,"));
    let back = LearningCurve::from_csv(&text).unwrap();
    assert_eq!(back.to_csv(), text);
    assert_eq!(back.metadata_value("mode"), Some("gaifo"));
    assert!(back.points[0].disc_loss.is_nan());
    assert_eq!(back.points[1], curve.points[1]);
    assert!(LearningCurve::from_csv("env_steps\n1,2,3\n").is_err());
}

#[test]
fn gail_requires_actions() {
    let env = short_pendulum();
    let ds = lqr_dataset(&env, 2).strip_actions();
    assert!(matches!(
        train(&env, &ds, &small_cfg(Mode::Gail)),
        Err(ImitationError::DatasetModeMismatch)
    ));
    assert!(matches!(expert_inputs(Mode::Gail, &ds), Err(ImitationError::DatasetModeMismatch)));
    assert_eq!(expert_inputs(Mode::Gaifo, &ds).unwrap().nrows(), 4);
}

#[test]
fn invalid_configs_are_rejected() {
    let env = short_pendulum();
    let ds = lqr_dataset(&env, 2);
    for bad in [
        ImitationConfig { batch_size: 0, ..small_cfg(Mode::Gail) },
        ImitationConfig { gamma: 1.0, ..small_cfg(Mode::Gail) },
        ImitationConfig { max_kl: -1.0, ..small_cfg(Mode::Gail) },
        ImitationConfig { noise_bound: -0.1, ..small_cfg(Mode::Gail) },
    ] {
        assert!(matches!(train(&env, &ds, &bad), Err(ImitationError::InvalidConfig(_))));
    }
    let cart = Env::new("cartpole", 0.0, 0).unwrap();
    assert!(matches!(
        train(&cart, &ds, &small_cfg(Mode::Gaifo)),
        Err(ImitationError::DimensionMismatch(_))
    ));
}

#[test]
fn training_loop_bookkeeping() {
    let env = short_pendulum();
    let ds = lqr_dataset(&env, 3);
    for mode in [Mode::Gail, Mode::Gaifo] {
        let cfg = small_cfg(mode);
        let data = if mode == Mode::Gaifo { ds.strip_actions() } else { ds.clone() };
        let out = train(&env, &data, &cfg).unwrap();
        assert_eq!(out.generator_cycles, 12);
        let expected = out.generator_cycles / cfg.gen_updates_per_cycle;
        assert!(out.disc_updates.abs_diff(expected) <= 1);
        assert_eq!(out.accepted_steps + out.rejected_steps, 12);
        assert!(out.max_accepted_kl <= 1.5 * cfg.max_kl);
        // evaluations at step 0, every 4 cycles, and none extra at the end
        let steps: Vec<usize> = out.curve.points.iter().map(|p| p.env_steps).collect();
        assert_eq!(steps, vec![0, 800, 1600, 2400]);
        assert!(out.curve.points[0].disc_loss.is_nan());
        assert!(out.curve.points[1..].iter().all(|p| p.disc_loss.is_finite()));
        assert_eq!(out.curve.metadata_value("mode"), Some(mode.as_str()));
    }
}

#[test]
fn training_is_deterministic() {
    let env = short_pendulum();
    let ds = lqr_dataset(&env, 2);
    let cfg = ImitationConfig {
        spectral_norm: true,
        input_norm: true,
        ..small_cfg(Mode::Gaifo)
    };
    let a = train(&env, &ds, &cfg).unwrap();
    let b = train(&env, &ds, &cfg).unwrap();
    assert_eq!(a.curve.to_csv(), b.curve.to_csv());
    assert_eq!(a.policy, b.policy);
    let deltas = ImitationConfig { transition_deltas: false, ..cfg.clone() };
    let d = train(&env, &ds, &deltas).unwrap();
    assert_eq!(d.policy, train(&env, &ds, &deltas).unwrap().policy);
    assert_ne!(d.policy.params(), a.policy.params());
    let other = train(&env, &ds, &ImitationConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(other.policy.params(), a.policy.params());
}

#[test]
fn true_reward_never_reaches_a_gradient() {
    let env = short_pendulum();
    let ds = lqr_dataset(&env, 2);
    let mut scaled = env.clone();
    scaled.set_reward_scale(-1000.0);
    for mode in [Mode::Gail, Mode::Gaifo] {
        let cfg = small_cfg(mode);
        let a = train(&env, &ds, &cfg).unwrap();
        let b = train(&scaled, &ds, &cfg).unwrap();
        assert_eq!(a.policy.params(), b.policy.params());
        for (p, q) in a.curve.points.iter().zip(&b.curve.points) {
            assert_eq!(p.policy_kl, q.policy_kl);
            assert!(p.disc_loss == q.disc_loss || (p.disc_loss.is_nan() && q.disc_loss.is_nan()));
            assert!((q.eval_return_mean + 1000.0 * p.eval_return_mean).abs() <= 1e-9 * q.eval_return_mean.abs());
        }
    }
}

#[test]
fn spectral_estimates_stay_accurate_during_training() {
    let env = short_pendulum();
    let ds = lqr_dataset(&env, 2);
    let cfg = ImitationConfig {
        spectral_norm: true,
        gen_updates_per_cycle: 1,
        total_env_steps: 200 * 220,
        eval_every: 1000,
        ..small_cfg(Mode::Gail)
    };
    let out = train(&env, &ds, &cfg).unwrap();
    assert!(out.disc_updates >= 200);
    assert!(out.max_effective_sigma <= 1.05, "σ = {}", out.max_effective_sigma);
    assert!(out.max_sigma_rel_error <= 0.05, "error {}", out.max_sigma_rel_error);
}

#[test]
fn evaluation_uses_fixed_initial_states() {
    let env = short_pendulum();
    let policy = new_actor_critic(&env, &small_cfg(Mode::Gail)).unwrap().policy;
    let a = evaluate(&policy, env.reseeded(3), 4).unwrap();
    let b = evaluate(&policy, env.reseeded(3), 4).unwrap();
    assert_eq!(a, b);
    let zero = evaluate_with(env.reseeded(3), 4, |_| Ok(vec![0.0])).unwrap();
    assert!(zero.0 < 0.0);
}

#[test]
fn config_metadata_round_trips_through_set() {
    let cfg = ImitationConfig {
        mode: Mode::Gaifo,
        hidden: vec![7, 9],
        activation: Activation::Relu,
        max_kl: 0.0123,
        input_norm: true,
        noise_bound: 0.02,
        seed: 17,
        fisher_subsample: 3,
        ..ImitationConfig::default()
    };
    let mut back = ImitationConfig::default();
    for (k, v) in cfg.metadata() {
        back.set(&k, &v).unwrap();
    }
    assert_eq!(back, cfg);
    assert!(matches!(back.set("max_kll", "1"), Err(ImitationError::InvalidConfig(_))));
    assert!(matches!(back.set("batch_size", "-3"), Err(ImitationError::InvalidConfig(_))));
    assert!(matches!(back.set("mode", "bc"), Err(ImitationError::InvalidConfig(_))));
}
