use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::Env;
use crate::expert::TrajectoryDataset;
use crate::neural::{AngleFeatures, GaussianPolicy, Mlp};

use super::discriminator::{build_inputs, transition_deltas, Discriminator};
use super::gae::gae_advantages;
use super::rollout::{collect_rollouts, evaluate, ActorCritic, RolloutBatch, Sampler};
use super::trpo::{trpo_step, TrpoSettings, TrpoStats};
use super::value::value_update;
use super::{ImitationConfig, ImitationError, Mode};

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    PolicyInit = 1,
    ValueInit = 2,
    DiscInit = 3,
    Env = 4,
    Actions = 5,
    ExpertSampling = 6,
    ValueShuffle = 7,
    Eval = 8,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Environment seed derived from a run seed and stream.
pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    stream_rng(seed, stream).random()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub env_steps: usize,
    pub eval_return_mean: f64,
    pub eval_return_std: f64,
    /// Latest discriminator loss (NaN before the first update or when
    /// training on true reward).
    pub disc_loss: f64,
    /// KL of the latest trust-region step.
    pub policy_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub metadata: Vec<(String, String)>,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn final_point(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    pub fn final_return(&self) -> f64 {
        self.final_point().map_or(f64::NAN, |p| p.eval_return_mean)
    }

    /// `# key=value` header lines, then the CSV table.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("env_steps,eval_return_mean,eval_return_std,disc_loss,policy_kl\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.env_steps, p.eval_return_mean, p.eval_return_std, p.disc_loss, p.policy_kl
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ImitationError> {
        let mut curve = LearningCurve::default();
        let bad = |line: usize, m: &str| ImitationError::CurveParse(format!("line {}: {m}", line + 1));
        let mut seen_header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta.trim().split_once('=').ok_or_else(|| bad(i, "metadata without `=`"))?;
                curve.metadata.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            if !seen_header {
                seen_header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(i, "expected 5 columns"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i, "bad number"));
            curve.points.push(CurvePoint {
                env_steps: f[0].parse().map_err(|_| bad(i, "bad step count"))?,
                eval_return_mean: num(f[1])?,
                eval_return_std: num(f[2])?,
                disc_loss: num(f[3])?,
                policy_kl: num(f[4])?,
            });
        }
        Ok(curve)
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub curve: LearningCurve,
    pub policy: GaussianPolicy,
    pub generator_cycles: usize,
    pub disc_updates: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest mean KL among accepted trust-region steps.
    pub max_accepted_kl: f64,
    /// Largest exact top singular value of any effective discriminator
    /// layer after an update (spectral normalization only).
    pub max_effective_sigma: f64,
    /// Largest `|σ̂ − σ| / σ` over the same checks.
    pub max_sigma_rel_error: f64,
    /// Fraction of value updates whose per-pass losses never increased.
    pub value_monotone_fraction: f64,
}

pub fn new_actor_critic(env: &Env, cfg: &ImitationConfig) -> Result<ActorCritic, ImitationError> {
    let rng = &mut stream_rng(cfg.seed, Stream::PolicyInit);
    let (sd, ad) = (env.state_dim(), env.action_dim());
    let mut policy = if cfg.angle_features {
        let f = AngleFeatures::new(env.angular_mask());
        GaussianPolicy::with_features(f, ad, &cfg.hidden, cfg.activation, cfg.input_norm, rng)?
    } else {
        GaussianPolicy::new(sd, ad, &cfg.hidden, cfg.activation, cfg.input_norm, rng)?
    };
    policy.log_std.fill(cfg.init_log_std);
    let mut sizes = vec![policy.mean_net.input_dim()];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(1);
    let value = Mlp::new(&sizes, cfg.activation, 1.0, &mut stream_rng(cfg.seed, Stream::ValueInit))?;
    Ok(ActorCritic::new(policy, value, cfg.value_lr))
}

/// Expert discriminator inputs, one column per stored transition.
pub fn expert_inputs(mode: Mode, dataset: &TrajectoryDataset) -> Result<DMatrix<f64>, ImitationError> {
    if mode == Mode::Gail && !dataset.has_actions() {
        return Err(ImitationError::DatasetModeMismatch);
    }
    let n = dataset.n_transitions();
    let sd = dataset.state_dim;
    let second = match mode {
        Mode::Gail => dataset.action_dim,
        Mode::Gaifo => sd,
    };
    let mut x = DMatrix::zeros(sd + second, n);
    for (j, step) in dataset.steps().enumerate() {
        let tail = match mode {
            Mode::Gail => &step.action,
            Mode::Gaifo => &step.next_state,
        };
        for (i, v) in step.state.iter().chain(tail).enumerate() {
            x[(i, j)] = *v;
        }
    }
    Ok(x)
}

/// One trust-region policy step and one value update on `rewards`.
pub fn generator_update<R: Rng + ?Sized>(
    agent: &mut ActorCritic,
    batch: &RolloutBatch,
    rewards: &[f64],
    cfg: &ImitationConfig,
    shuffle_rng: &mut R,
) -> Result<(TrpoStats, Vec<f64>), ImitationError> {
    let (adv, targets) = gae_advantages(
        rewards,
        &batch.values,
        &batch.next_values,
        &batch.terminated,
        &batch.boundary,
        cfg.gamma,
        cfg.lambda,
    );
    let stats = trpo_step(
        &mut agent.policy,
        &batch.states,
        &batch.actions,
        &batch.log_probs,
        &adv,
        &TrpoSettings::from(cfg),
    )?;
    let inputs = agent.policy.prepare(&batch.states);
    let targets = agent.standardize_targets(&targets);
    let losses = value_update(
        &mut agent.value,
        &mut agent.value_opt,
        &inputs,
        &targets,
        cfg.value_iters,
        cfg.value_minibatch,
        shuffle_rng,
    )?;
    Ok((stats, losses))
}

fn monotone(losses: &[f64]) -> bool {
    losses.windows(2).all(|w| w[1] <= w[0])
}

/// Where the generator's learning signal comes from.
pub enum RewardSource<'a> {
    /// Adversarial imitation against expert inputs.
    Imitation { expert: &'a TrajectoryDataset },
    /// The environment's own reward (expert training only).
    Environment,
}

/// Shared training loop. `on_eval` sees every evaluation and may return
/// `true` to stop early. Returns the outcome plus the discriminator, if any.
pub(crate) fn run_loop(
    env: &Env,
    source: RewardSource<'_>,
    cfg: &ImitationConfig,
    mut on_eval: impl FnMut(&CurvePoint, &GaussianPolicy) -> bool,
) -> Result<(TrainOutcome, Option<Discriminator>), ImitationError> {
    cfg.validate()?;
    let mut template = env.clone();
    template.set_noise_bound(cfg.noise_bound);
    let sd = template.state_dim();
    let ad = template.action_dim();
    let dt = template.model().dt();
    let deltas = cfg.mode == Mode::Gaifo && cfg.transition_deltas;

    let mut agent = new_actor_critic(&template, cfg)?;
    let mut disc_state = match source {
        RewardSource::Imitation { expert } => {
            if expert.state_dim != sd || (expert.has_actions() && expert.action_dim != ad) {
                return Err(ImitationError::DimensionMismatch(format!(
                    "dataset dims ({}, {}) vs env ({sd}, {ad})",
                    expert.state_dim, expert.action_dim
                )));
            }
            let mut x = expert_inputs(cfg.mode, expert)?;
            if deltas {
                transition_deltas(&mut x, sd, dt);
            }
            if x.ncols() == 0 {
                return Err(ImitationError::EmptyBatch);
            }
            let rng = &mut stream_rng(cfg.seed, Stream::DiscInit);
            let disc = if cfg.angle_features {
                let state_mask = template.angular_mask();
                let mut mask = state_mask.clone();
                match cfg.mode {
                    Mode::Gail => mask.resize(sd + ad, false),
                    Mode::Gaifo => mask.extend(state_mask),
                }
                let f = AngleFeatures::new(mask);
                let (lr, coef) = (cfg.disc_lr, cfg.disc_entropy_coef);
                Discriminator::with_features(f, &cfg.hidden, cfg.activation, lr, coef, cfg.spectral_norm, rng)?
            } else {
                let dim = cfg.mode.input_dim(sd, ad);
                Discriminator::new(dim, &cfg.hidden, cfg.activation, cfg.disc_lr, cfg.disc_entropy_coef, cfg.spectral_norm, rng)?
            };
            Some((disc, x))
        }
        RewardSource::Environment => None,
    };

    let mut sampler = Sampler::new(template.reseeded(stream_seed(cfg.seed, Stream::Env)));
    let eval_env = template.reseeded(stream_seed(cfg.seed, Stream::Eval));
    let mut action_rng = stream_rng(cfg.seed, Stream::Actions);
    let mut expert_rng = stream_rng(cfg.seed, Stream::ExpertSampling);
    let mut shuffle_rng = stream_rng(cfg.seed, Stream::ValueShuffle);

    let mut metadata = vec![
        ("env".to_string(), template.id().to_string()),
        ("horizon".to_string(), template.horizon().to_string()),
    ];
    if matches!(source, RewardSource::Environment) {
        metadata.push(("reward".to_string(), "environment".to_string()));
    }
    metadata.extend(cfg.metadata());
    let mut curve = LearningCurve {
        metadata,
        points: Vec::new(),
    };

    let mut env_steps = 0;
    let mut cycles = 0;
    let mut disc_updates = 0;
    let mut disc_loss = f64::NAN;
    let mut last_kl = 0.0;
    let (mut accepted, mut rejected) = (0, 0);
    let mut max_kl = 0.0f64;
    let mut max_sigma = 0.0f64;
    let mut max_sigma_err = 0.0f64;
    let (mut value_updates, mut value_monotone) = (0usize, 0usize);

    let mut record = |steps: usize, disc_loss: f64, kl: f64, agent: &ActorCritic, curve: &mut LearningCurve| {
        let (mean, std) = evaluate(&agent.policy, eval_env.clone(), cfg.eval_episodes)?;
        let point = CurvePoint {
            env_steps: steps,
            eval_return_mean: mean,
            eval_return_std: std,
            disc_loss,
            policy_kl: kl,
        };
        let stop = on_eval(&point, &agent.policy);
        curve.points.push(point);
        Ok::<bool, ImitationError>(stop)
    };
    let mut stopped = record(0, disc_loss, last_kl, &agent, &mut curve)?;

    while env_steps < cfg.total_env_steps && !stopped {
        let mut batch = collect_rollouts(&mut sampler, &mut agent, cfg.batch_size, &mut action_rng)?;
        env_steps += batch.len();
        let agent_inputs = disc_state
            .as_ref()
            .map(|_| {
                let mut x = build_inputs(cfg.mode, &batch.states, &batch.applied_actions, &batch.next_states);
                if deltas {
                    transition_deltas(&mut x, sd, dt);
                }
                x
            });
        batch.rewards = match (&disc_state, &agent_inputs) {
            (Some((disc, _)), Some(x)) => disc.rewards(x)?,
            _ => batch.true_rewards.clone(),
        };
        let rewards = batch.rewards.clone();
        let (stats, losses) = generator_update(&mut agent, &batch, &rewards, cfg, &mut shuffle_rng)?;
        cycles += 1;
        value_updates += 1;
        if monotone(&losses) {
            value_monotone += 1;
        }
        if stats.accepted {
            accepted += 1;
            max_kl = max_kl.max(stats.kl);
        } else {
            rejected += 1;
        }
        last_kl = stats.kl;

        if let (Some((disc, expert_x)), Some(agent_x)) = (&mut disc_state, &agent_inputs) {
            if cycles % cfg.gen_updates_per_cycle == 0 {
                for _ in 0..cfg.disc_updates_per_cycle {
                    for _ in 0..cfg.disc_steps {
                        let (na, ne) = (agent_x.ncols(), expert_x.ncols());
                        let m = if cfg.disc_minibatch == 0 { na } else { cfg.disc_minibatch.min(na) };
                        let agent_batch = if m == na {
                            agent_x.clone()
                        } else {
                            agent_x.select_columns(index::sample(&mut expert_rng, na, m).into_iter().collect::<Vec<_>>().iter())
                        };
                        let idx: Vec<usize> = (0..m).map(|_| expert_rng.random_range(0..ne)).collect();
                        let expert_batch = expert_x.select_columns(idx.iter());
                        disc_loss = disc.update(&agent_batch, &expert_batch)?.total;
                    }
                    disc_updates += 1;
                    disc.refine_spectral();
                    if let Some(est) = &disc.spectral {
                        for (l, e) in disc.effective_spectral_norms().into_iter().enumerate() {
                            max_sigma = max_sigma.max(e);
                            // σ(W) = σ(W̄) σ̂
                            let truth = e * est.sigma[l];
                            max_sigma_err = max_sigma_err.max((est.sigma[l] - truth).abs() / truth);
                        }
                    }
                }
            }
        }

        if cycles % cfg.eval_every == 0 || env_steps >= cfg.total_env_steps {
            stopped = record(env_steps, disc_loss, last_kl, &agent, &mut curve)?;
        }
    }

    let outcome = TrainOutcome {
        curve,
        policy: agent.policy,
        generator_cycles: cycles,
        disc_updates,
        accepted_steps: accepted,
        rejected_steps: rejected,
        max_accepted_kl: max_kl,
        max_effective_sigma: max_sigma,
        max_sigma_rel_error: max_sigma_err,
        value_monotone_fraction: if value_updates == 0 {
            1.0
        } else {
            value_monotone as f64 / value_updates as f64
        },
    };
    Ok((outcome, disc_state.map(|(d, _)| d)))
}

/// Adversarial imitation (GAIL or GAIfO per `cfg.mode`) against an expert
/// dataset. The environment reward is only read by evaluation.
pub fn train(env: &Env, expert: &TrajectoryDataset, cfg: &ImitationConfig) -> Result<TrainOutcome, ImitationError> {
    Ok(run_loop(env, RewardSource::Imitation { expert }, cfg, |_, _| false)?.0)
}
