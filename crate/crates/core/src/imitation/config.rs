use crate::neural::{Activation, DEFAULT_HIDDEN};

use super::ImitationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Discriminator sees `(s, a)`.
    Gail,
    /// Discriminator sees `(s, s')`.
    Gaifo,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Gail => "gail",
            Mode::Gaifo => "gaifo",
        }
    }

    /// Discriminator input width.
    pub fn input_dim(self, state_dim: usize, action_dim: usize) -> usize {
        match self {
            Mode::Gail => state_dim + action_dim,
            Mode::Gaifo => 2 * state_dim,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = ImitationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gail" => Ok(Mode::Gail),
            "gaifo" => Ok(Mode::Gaifo),
            other => Err(ImitationError::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImitationConfig {
    pub mode: Mode,
    /// Environment steps collected per generator cycle.
    pub batch_size: usize,
    pub gen_updates_per_cycle: usize,
    pub disc_updates_per_cycle: usize,
    /// Adam steps making up one discriminator update.
    pub disc_steps: usize,
    /// Agent and expert samples per discriminator step (0 = whole batch).
    pub disc_minibatch: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub max_kl: f64,
    pub value_lr: f64,
    /// Passes over the batch per value update.
    pub value_iters: usize,
    pub value_minibatch: usize,
    pub disc_lr: f64,
    pub disc_entropy_coef: f64,
    pub policy_entropy_coef: f64,
    /// Initial policy log standard deviation, in control-bound units.
    pub init_log_std: f64,
    pub input_norm: bool,
    /// Feed joint angles to every network as `(cos, sin)`.
    pub angle_features: bool,
    /// GAIfO only: replace the next velocity by the finite-difference
    /// acceleration in discriminator inputs.
    pub transition_deltas: bool,
    pub spectral_norm: bool,
    pub noise_bound: f64,
    pub total_env_steps: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_coef: f64,
    pub backtrack_steps: usize,
    /// Every k-th sample enters the Fisher-vector products.
    pub fisher_subsample: usize,
}

impl Default for ImitationConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Gail,
            batch_size: 1024,
            gen_updates_per_cycle: 3,
            disc_updates_per_cycle: 1,
            disc_steps: 30,
            disc_minibatch: 256,
            gamma: 0.995,
            lambda: 0.97,
            max_kl: 0.01,
            value_lr: 1e-3,
            value_iters: 5,
            value_minibatch: 128,
            disc_lr: 3e-4,
            disc_entropy_coef: 1e-3,
            policy_entropy_coef: 0.0,
            init_log_std: 0.0,
            input_norm: false,
            angle_features: true,
            transition_deltas: true,
            spectral_norm: true,
            noise_bound: 0.0,
            total_env_steps: 300_000,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
            activation: Activation::Tanh,
            eval_every: 10,
            eval_episodes: 10,
            cg_iters: 10,
            cg_damping: 0.1,
            backtrack_coef: 0.5,
            backtrack_steps: 10,
            fisher_subsample: 5,
        }
    }
}

impl ImitationConfig {
    pub fn validate(&self) -> Result<(), ImitationError> {
        let fail = |m: &str| Err(ImitationError::InvalidConfig(m.to_string()));
        let positive = [
            ("max_kl", self.max_kl),
            ("value_lr", self.value_lr),
            ("disc_lr", self.disc_lr),
            ("cg_damping", self.cg_damping),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(&format!("{name} must be positive"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) || !(self.lambda > 0.0 && self.lambda < 1.0) {
            return fail("gamma and lambda must lie in (0, 1)");
        }
        if self.batch_size == 0
            || self.gen_updates_per_cycle == 0
            || self.disc_steps == 0
            || self.value_iters == 0
            || self.value_minibatch == 0
            || self.eval_episodes == 0
            || self.eval_every == 0
            || self.fisher_subsample == 0
        {
            return fail("counts must be positive");
        }
        if !self.init_log_std.is_finite() {
            return fail("init_log_std must be finite");
        }
        if self.disc_entropy_coef < 0.0 || self.policy_entropy_coef < 0.0 || self.noise_bound < 0.0 {
            return fail("coefficients and noise bound must be nonnegative");
        }
        if !(self.backtrack_coef > 0.0 && self.backtrack_coef < 1.0) {
            return fail("backtrack_coef must lie in (0, 1)");
        }
        Ok(())
    }

    /// `key=value` lines describing the run.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        let act = match self.activation {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        };
        [
            ("mode", self.mode.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("gen_updates_per_cycle", self.gen_updates_per_cycle.to_string()),
            ("disc_updates_per_cycle", self.disc_updates_per_cycle.to_string()),
            ("disc_steps", self.disc_steps.to_string()),
            ("disc_minibatch", self.disc_minibatch.to_string()),
            ("gamma", self.gamma.to_string()),
            ("lambda", self.lambda.to_string()),
            ("max_kl", self.max_kl.to_string()),
            ("value_lr", self.value_lr.to_string()),
            ("value_iters", self.value_iters.to_string()),
            ("value_minibatch", self.value_minibatch.to_string()),
            ("disc_lr", self.disc_lr.to_string()),
            ("disc_entropy_coef", self.disc_entropy_coef.to_string()),
            ("policy_entropy_coef", self.policy_entropy_coef.to_string()),
            ("init_log_std", self.init_log_std.to_string()),
            ("input_norm", self.input_norm.to_string()),
            ("angle_features", self.angle_features.to_string()),
            ("transition_deltas", self.transition_deltas.to_string()),
            ("spectral_norm", self.spectral_norm.to_string()),
            ("noise_bound", self.noise_bound.to_string()),
            ("total_env_steps", self.total_env_steps.to_string()),
            ("seed", self.seed.to_string()),
            ("hidden", hidden.join(",")),
            ("activation", act.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
            ("cg_iters", self.cg_iters.to_string()),
            ("cg_damping", self.cg_damping.to_string()),
            ("backtrack_coef", self.backtrack_coef.to_string()),
            ("backtrack_steps", self.backtrack_steps.to_string()),
            ("fisher_subsample", self.fisher_subsample.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Sets one field from its `metadata` name and textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ImitationError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ImitationError> {
            value
                .trim()
                .parse()
                .map_err(|_| ImitationError::InvalidConfig(format!("bad value `{value}` for `{key}`")))
        }
        match key {
            "mode" => self.mode = value.trim().parse()?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "gen_updates_per_cycle" => self.gen_updates_per_cycle = parse(key, value)?,
            "disc_updates_per_cycle" => self.disc_updates_per_cycle = parse(key, value)?,
            "disc_steps" => self.disc_steps = parse(key, value)?,
            "disc_minibatch" => self.disc_minibatch = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "max_kl" => self.max_kl = parse(key, value)?,
            "value_lr" => self.value_lr = parse(key, value)?,
            "value_iters" => self.value_iters = parse(key, value)?,
            "value_minibatch" => self.value_minibatch = parse(key, value)?,
            "disc_lr" => self.disc_lr = parse(key, value)?,
            "disc_entropy_coef" => self.disc_entropy_coef = parse(key, value)?,
            "policy_entropy_coef" => self.policy_entropy_coef = parse(key, value)?,
            "init_log_std" => self.init_log_std = parse(key, value)?,
            "input_norm" => self.input_norm = parse(key, value)?,
            "angle_features" => self.angle_features = parse(key, value)?,
            "transition_deltas" => self.transition_deltas = parse(key, value)?,
            "spectral_norm" => self.spectral_norm = parse(key, value)?,
            "noise_bound" => self.noise_bound = parse(key, value)?,
            "total_env_steps" => self.total_env_steps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "hidden" => {
                self.hidden = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|h| parse(key, h))
                    .collect::<Result<_, _>>()?
            }
            "activation" => {
                self.activation = match value.trim() {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    other => return Err(ImitationError::InvalidConfig(format!("unknown activation `{other}`"))),
                }
            }
            "eval_every" => self.eval_every = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "cg_iters" => self.cg_iters = parse(key, value)?,
            "cg_damping" => self.cg_damping = parse(key, value)?,
            "backtrack_coef" => self.backtrack_coef = parse(key, value)?,
            "backtrack_steps" => self.backtrack_steps = parse(key, value)?,
            "fisher_subsample" => self.fisher_subsample = parse(key, value)?,
            other => return Err(ImitationError::InvalidConfig(format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}
