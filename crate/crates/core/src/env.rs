//! Episodic control tasks on top of the Euler-Lagrange catalog.
//!
//! | id        | reward per step                                   | ends early when              |
//! |-----------|---------------------------------------------------|------------------------------|
//! | pendulum  | −(φ² + 0.1 q̇² + 0.001 u²), φ = angle to upright   | never                        |
//! | reacher2  | −(‖tip − goal‖² + 0.001 ‖u‖²)                      | never                        |
//! | cartpole  | +1 while |θ| < 0.4 rad and |x| < 2.4 m             | either bound is left         |
//! | acrobot   | −1                                                | tip height exceeds `l1`      |
//!
//! Controls are clipped to the model's control box before they are applied;
//! the stored and rewarded action is always the applied one. Policies act in
//! units of the control bound (see [`Env::scale_action`]).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{ControlInput, DynamicsError, ElModel, GeneralizedCoords, System};

pub const DEFAULT_HORIZON: usize = 200;
pub const REACHER_GOAL: [f64; 2] = [0.5, 0.3];
const CARTPOLE_ANGLE_LIMIT: f64 = 0.4;
const CARTPOLE_POSITION_LIMIT: f64 = 2.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Pendulum,
    Reacher2,
    Cartpole,
    Acrobot,
}

impl Task {
    fn from_id(id: &str) -> Result<Self, DynamicsError> {
        match id {
            "pendulum" => Ok(Task::Pendulum),
            "reacher2" => Ok(Task::Reacher2),
            "cartpole" => Ok(Task::Cartpole),
            "acrobot" => Ok(Task::Acrobot),
            other => Err(DynamicsError::UnknownSystem(other.to_string())),
        }
    }
}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// State after the step (noisy when `noise_bound > 0`).
    pub next_state: Vec<f64>,
    /// Control actually applied.
    pub action: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct Env {
    model: ElModel,
    task: Task,
    horizon: usize,
    noise_bound: f64,
    reward_scale: f64,
    rng: ChaCha8Rng,
    state: Vec<f64>,
    t: usize,
}

impl Env {
    pub fn new(id: &str, noise_bound: f64, seed: u64) -> Result<Self, DynamicsError> {
        Self::with_model(ElModel::from_id(id)?, noise_bound, seed)
    }

    pub fn with_model(model: ElModel, noise_bound: f64, seed: u64) -> Result<Self, DynamicsError> {
        assert!(noise_bound >= 0.0, "noise bound must be nonnegative");
        let task = Task::from_id(model.name())?;
        let mut env = Self {
            state: vec![0.0; model.state_dim()],
            model,
            task,
            horizon: DEFAULT_HORIZON,
            noise_bound,
            reward_scale: 1.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            t: 0,
        };
        env.reset();
        Ok(env)
    }

    /// Same task and settings with a fresh random stream, already reset.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut env = self.clone();
        env.rng = ChaCha8Rng::seed_from_u64(seed);
        env.reset();
        env
    }

    pub fn set_noise_bound(&mut self, noise_bound: f64) {
        assert!(noise_bound >= 0.0, "noise bound must be nonnegative");
        self.noise_bound = noise_bound;
    }

    pub fn id(&self) -> &str {
        self.model.name()
    }

    pub fn model(&self) -> &ElModel {
        &self.model
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.model.act_dim()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn set_horizon(&mut self, horizon: usize) {
        assert!(horizon > 0, "horizon must be positive");
        self.horizon = horizon;
    }

    /// Which state coordinates are joint angles.
    pub fn angular_mask(&self) -> Vec<bool> {
        let q: &[bool] = match self.task {
            Task::Pendulum => &[true],
            Task::Reacher2 | Task::Acrobot => &[true, true],
            Task::Cartpole => &[false, true],
        };
        let mut mask = q.to_vec();
        mask.resize(self.state_dim(), false);
        mask
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    /// Multiplies every true reward; used to audit that training ignores it.
    pub fn set_reward_scale(&mut self, scale: f64) {
        self.reward_scale = scale;
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn elapsed(&self) -> usize {
        self.t
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut u = |h: f64| rng.random_range(-h..=h);
        match self.task {
            // balance around the upright position
            Task::Pendulum => vec![PI + u(0.3), u(0.5)],
            Task::Reacher2 => vec![u(0.1), u(0.1), 0.0, 0.0],
            Task::Cartpole => vec![u(0.05), u(0.05), u(0.05), u(0.05)],
            Task::Acrobot => vec![u(0.1), u(0.1), u(0.1), u(0.1)],
        }
    }

    pub fn reset(&mut self) -> Vec<f64> {
        let mut rng = self.rng.clone();
        self.state = self.initial_state(&mut rng);
        self.rng = rng;
        self.t = 0;
        self.state.clone()
    }

    /// Starts an episode from a given state.
    pub fn reset_to(&mut self, state: &[f64]) {
        assert_eq!(state.len(), self.state_dim(), "state dimension");
        self.state = state.to_vec();
        self.t = 0;
    }

    /// Maps a policy output in control-bound units to a physical control.
    pub fn scale_action(&self, action: &[f64]) -> Vec<f64> {
        let b = self.model.control_bound();
        action.iter().map(|a| a * b).collect()
    }

    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        let b = self.model.control_bound();
        action.iter().map(|a| a.clamp(-b, b)).collect()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Step, DynamicsError> {
        let applied = self.clip_action(action);
        let s = GeneralizedCoords::from_state(&self.state);
        let next = self
            .model
            .forward_step_with(&s, &ControlInput::new(applied.clone()), self.noise_bound, &mut self.rng)?
            .to_state();
        let reward = self.reward_scale * self.true_reward(&self.state, &applied, &next);
        let terminated = self.is_terminal(&next);
        self.t += 1;
        let truncated = !terminated && self.t >= self.horizon;
        self.state = next.clone();
        Ok(Step {
            next_state: next,
            action: applied,
            reward,
            terminated,
            truncated,
        })
    }

    /// Unscaled task reward for one transition.
    pub fn true_reward(&self, s: &[f64], a: &[f64], s_next: &[f64]) -> f64 {
        match self.task {
            Task::Pendulum => {
                let phi = wrap_angle(s[0] - PI);
                -(phi * phi + 0.1 * s[1] * s[1] + 0.001 * a[0] * a[0])
            }
            Task::Reacher2 => {
                let tip = self.fingertip(s);
                let dx = tip[0] - REACHER_GOAL[0];
                let dy = tip[1] - REACHER_GOAL[1];
                -(dx * dx + dy * dy + 0.001 * a.iter().map(|x| x * x).sum::<f64>())
            }
            Task::Cartpole => {
                if self.is_terminal(s_next) {
                    0.0
                } else {
                    1.0
                }
            }
            Task::Acrobot => -1.0,
        }
    }

    pub fn is_terminal(&self, s: &[f64]) -> bool {
        match self.task {
            Task::Pendulum | Task::Reacher2 => false,
            Task::Cartpole => s[1].abs() >= CARTPOLE_ANGLE_LIMIT || s[0].abs() >= CARTPOLE_POSITION_LIMIT,
            Task::Acrobot => {
                let System::Acrobot { length1, length2, .. } = *self.model.system() else {
                    unreachable!("acrobot task on a non-acrobot model")
                };
                let height = -length1 * s[0].cos() - length2 * (s[0] + s[1]).cos();
                height > length1
            }
        }
    }

    fn fingertip(&self, s: &[f64]) -> [f64; 2] {
        let System::Reacher2 { length1, length2, .. } = *self.model.system() else {
            unreachable!("reacher task on a non-reacher model")
        };
        [
            length1 * s[0].cos() + length2 * (s[0] + s[1]).cos(),
            length1 * s[0].sin() + length2 * (s[0] + s[1]).sin(),
        ]
    }
}
