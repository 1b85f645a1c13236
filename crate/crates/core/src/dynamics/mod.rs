//! Euler-Lagrange robot systems.
//!
//! A model evaluates `M(q)`, `C(q, q̇)` and `G(q)` for one of the catalog
//! systems and advances the state with the explicit Euler scheme
//!
//! ```text
//! q̈  = M(q)⁻¹ (B u − C(q, q̇) q̇ − G(q))
//! q'  = q + dt q̇
//! q̇' = q̇ + dt q̈
//! ```
//!
//! Because both increments use time-`t` quantities the map is affine in `u`
//! at fixed state, so [`ElModel::inverse_dynamics`] can invert it exactly.

mod probe;
mod systems;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use probe::UniquenessReport;
pub use systems::System;

/// Catalog identifiers accepted by [`ElModel::from_id`].
pub const CATALOG: [&str; 4] = ["pendulum", "reacher2", "cartpole", "acrobot"];

/// Default absolute tolerance for transitions generated without noise.
pub const EXACT_FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfeasibilityKind {
    /// `q'` does not equal `q + dt q̇`.
    Position,
    /// The generalized force needed leaves the column space of `B`.
    Actuation,
}

impl std::fmt::Display for InfeasibilityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibilityKind::Position => f.write_str("position"),
            InfeasibilityKind::Actuation => f.write_str("actuation"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mass matrix not positive definite at q = {q:?}")]
    SingularMass { q: Vec<f64> },
    #[error("infeasible transition ({kind}): residual {residual:e} exceeds tolerance {tolerance:e}")]
    InfeasibleTransition {
        kind: InfeasibilityKind,
        residual: f64,
        tolerance: f64,
    },
    #[error("unknown system `{0}`")]
    UnknownSystem(String),
    #[error("system `{system}` has no parameter `{name}`")]
    UnknownParameter { system: String, name: String },
}

/// Robot configuration `(q, q̇)`. Its concatenation is the MDP state.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedCoords {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl GeneralizedCoords {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Self {
        Self { q, qdot }
    }

    /// Splits a flat `(q, q̇)` state vector.
    pub fn from_state(state: &[f64]) -> Self {
        let dof = state.len() / 2;
        Self {
            q: state[..dof].to_vec(),
            qdot: state[dof..].to_vec(),
        }
    }

    pub fn to_state(&self) -> Vec<f64> {
        let mut s = self.q.clone();
        s.extend_from_slice(&self.qdot);
        s
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    fn max_abs_diff(&self, other: &GeneralizedCoords) -> f64 {
        self.q
            .iter()
            .chain(&self.qdot)
            .zip(other.q.iter().chain(&other.qdot))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Actuator forces / torques.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    pub u: Vec<f64>,
}

impl ControlInput {
    pub fn new(u: Vec<f64>) -> Self {
        Self { u }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTransition {
    pub s: GeneralizedCoords,
    pub s_next: GeneralizedCoords,
}

impl StateTransition {
    pub fn new(s: GeneralizedCoords, s_next: GeneralizedCoords) -> Self {
        Self { s, s_next }
    }

    pub fn from_states(s: &[f64], s_next: &[f64]) -> Self {
        Self::new(
            GeneralizedCoords::from_state(s),
            GeneralizedCoords::from_state(s_next),
        )
    }
}

/// Tolerances of the feasibility predicate used by inverse dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityTol {
    /// Absolute bound on `‖q' − (q + dt q̇)‖∞`.
    pub position: f64,
    /// Bound on `‖τ − B B⁺ τ‖∞`, scaled by `1 + ‖τ‖∞`.
    pub actuation: f64,
}

impl Default for FeasibilityTol {
    fn default() -> Self {
        Self {
            position: EXACT_FEAS_TOL,
            actuation: EXACT_FEAS_TOL,
        }
    }
}

/// The M, C, G terms at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElModel {
    name: String,
    system: System,
    actuation: DMatrix<f64>,
    actuation_pinv: DMatrix<f64>,
    dt: f64,
    /// `(low, high)` for each of the `2 dof` state dimensions.
    state_bounds: Vec<(f64, f64)>,
    /// Symmetric box used when sampling random controls.
    control_bound: f64,
}

impl ElModel {
    pub fn new(
        name: impl Into<String>,
        system: System,
        dt: f64,
        state_bounds: Vec<(f64, f64)>,
        control_bound: f64,
    ) -> Self {
        assert!(dt > 0.0, "timestep must be positive");
        assert_eq!(state_bounds.len(), 2 * system.dof());
        let actuation = system.actuation();
        let actuation_pinv = actuation
            .clone()
            .pseudo_inverse(1e-12)
            .expect("actuation matrix pseudo-inverse");
        Self {
            name: name.into(),
            system,
            actuation,
            actuation_pinv,
            dt,
            state_bounds,
            control_bound,
        }
    }

    pub fn pendulum() -> Self {
        Self::new(
            "pendulum",
            System::Pendulum {
                mass: 1.0,
                length: 1.0,
                gravity: 9.81,
            },
            0.05,
            vec![(-std::f64::consts::PI, std::f64::consts::PI), (-8.0, 8.0)],
            10.0,
        )
    }

    pub fn reacher2() -> Self {
        let pi = std::f64::consts::PI;
        Self::new(
            "reacher2",
            System::Reacher2 {
                mass1: 1.0,
                mass2: 1.0,
                length1: 0.5,
                length2: 0.5,
            },
            0.02,
            vec![(-pi, pi), (-pi, pi), (-5.0, 5.0), (-5.0, 5.0)],
            5.0,
        )
    }

    pub fn cartpole() -> Self {
        Self::new(
            "cartpole",
            System::Cartpole {
                cart_mass: 1.0,
                pole_mass: 0.1,
                pole_length: 0.5,
                gravity: 9.81,
            },
            0.02,
            vec![(-2.4, 2.4), (-1.0, 1.0), (-3.0, 3.0), (-3.0, 3.0)],
            10.0,
        )
    }

    pub fn acrobot() -> Self {
        let pi = std::f64::consts::PI;
        Self::new(
            "acrobot",
            System::Acrobot {
                mass1: 1.0,
                mass2: 1.0,
                length1: 1.0,
                length2: 1.0,
                com1: 0.5,
                com2: 0.5,
                inertia1: 1.0,
                inertia2: 1.0,
                gravity: 9.81,
            },
            0.02,
            vec![(-pi, pi), (-pi, pi), (-4.0, 4.0), (-4.0, 4.0)],
            5.0,
        )
    }

    pub fn from_id(id: &str) -> Result<Self, DynamicsError> {
        match id {
            "pendulum" => Ok(Self::pendulum()),
            "reacher2" => Ok(Self::reacher2()),
            "cartpole" => Ok(Self::cartpole()),
            "acrobot" => Ok(Self::acrobot()),
            other => Err(DynamicsError::UnknownSystem(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn dof(&self) -> usize {
        self.system.dof()
    }

    pub fn act_dim(&self) -> usize {
        self.actuation.ncols()
    }

    pub fn state_dim(&self) -> usize {
        2 * self.dof()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) {
        assert!(dt > 0.0, "timestep must be positive");
        self.dt = dt;
    }

    pub fn actuation(&self) -> &DMatrix<f64> {
        &self.actuation
    }

    pub fn state_bounds(&self) -> &[(f64, f64)] {
        &self.state_bounds
    }

    pub fn control_bound(&self) -> f64 {
        self.control_bound
    }

    pub fn physical_params(&self) -> Vec<(&'static str, f64)> {
        self.system.params()
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), DynamicsError> {
        if self.system.set_param(name, value) {
            Ok(())
        } else {
            Err(DynamicsError::UnknownParameter {
                system: self.name.clone(),
                name: name.to_string(),
            })
        }
    }

    fn check_coords(&self, s: &GeneralizedCoords) -> Result<(), DynamicsError> {
        let dof = self.dof();
        for len in [s.q.len(), s.qdot.len()] {
            if len != dof {
                return Err(DynamicsError::DimensionMismatch {
                    expected: dof,
                    got: len,
                });
            }
        }
        Ok(())
    }

    pub fn dynamics_terms(&self, s: &GeneralizedCoords) -> Result<DynamicsTerms, DynamicsError> {
        self.check_coords(s)?;
        Ok(DynamicsTerms {
            mass: self.system.mass_matrix(&s.q),
            coriolis: self.system.coriolis_matrix(&s.q, &s.qdot),
            gravity: self.system.gravity_vector(&s.q),
        })
    }

    /// `q̈` produced by control `u` at state `s`.
    pub fn acceleration(
        &self,
        s: &GeneralizedCoords,
        u: &ControlInput,
    ) -> Result<DVector<f64>, DynamicsError> {
        let terms = self.dynamics_terms(s)?;
        if u.u.len() != self.act_dim() {
            return Err(DynamicsError::DimensionMismatch {
                expected: self.act_dim(),
                got: u.u.len(),
            });
        }
        let qdot = DVector::from_column_slice(&s.qdot);
        let force = &self.actuation * DVector::from_column_slice(&u.u)
            - &terms.coriolis * &qdot
            - &terms.gravity;
        let chol = terms.mass.cholesky().ok_or_else(|| DynamicsError::SingularMass {
            q: s.q.clone(),
        })?;
        Ok(chol.solve(&force))
    }

    /// Explicit Euler step with optional bounded uniform noise.
    ///
    /// With `noise_bound > 0` every output coordinate receives an independent
    /// draw from the open interval `(−ε/2, ε/2)`.
    pub fn forward_step(
        &self,
        s: &GeneralizedCoords,
        u: &ControlInput,
        noise_bound: f64,
        rng_seed: u64,
    ) -> Result<GeneralizedCoords, DynamicsError> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        self.forward_step_with(s, u, noise_bound, &mut rng)
    }

    pub fn forward_step_with<R: Rng + ?Sized>(
        &self,
        s: &GeneralizedCoords,
        u: &ControlInput,
        noise_bound: f64,
        rng: &mut R,
    ) -> Result<GeneralizedCoords, DynamicsError> {
        assert!(noise_bound >= 0.0, "noise bound must be nonnegative");
        let qddot = self.acceleration(s, u)?;
        let dt = self.dt;
        let mut q: Vec<f64> = s.q.iter().zip(&s.qdot).map(|(q, v)| q + dt * v).collect();
        let mut qdot: Vec<f64> = s.qdot.iter().zip(qddot.iter()).map(|(v, a)| v + dt * a).collect();
        if noise_bound > 0.0 {
            let half = 0.5 * noise_bound;
            for x in q.iter_mut().chain(qdot.iter_mut()) {
                *x += open_uniform(rng, half);
            }
        }
        Ok(GeneralizedCoords { q, qdot })
    }

    /// Recovers the unique control that produced `t` under the noiseless map.
    pub fn inverse_dynamics(&self, t: &StateTransition) -> Result<ControlInput, DynamicsError> {
        self.inverse_dynamics_tol(t, &FeasibilityTol::default())
    }

    pub fn inverse_dynamics_tol(
        &self,
        t: &StateTransition,
        tol: &FeasibilityTol,
    ) -> Result<ControlInput, DynamicsError> {
        self.check_coords(&t.s)?;
        self.check_coords(&t.s_next)?;
        let dt = self.dt;

        let pos_residual = t
            .s
            .q
            .iter()
            .zip(&t.s.qdot)
            .zip(&t.s_next.q)
            .map(|((q, v), qn)| (qn - (q + dt * v)).abs())
            .fold(0.0, f64::max);
        if !(pos_residual <= tol.position) {
            return Err(DynamicsError::InfeasibleTransition {
                kind: InfeasibilityKind::Position,
                residual: pos_residual,
                tolerance: tol.position,
            });
        }

        let terms = self.dynamics_terms(&t.s)?;
        let qddot = DVector::from_iterator(
            self.dof(),
            t.s_next.qdot.iter().zip(&t.s.qdot).map(|(vn, v)| (vn - v) / dt),
        );
        let qdot = DVector::from_column_slice(&t.s.qdot);
        let tau = &terms.mass * qddot + &terms.coriolis * qdot + &terms.gravity;
        let u = &self.actuation_pinv * &tau;
        let residual = (&tau - &self.actuation * &u).amax();
        let tolerance = tol.actuation * (1.0 + tau.amax());
        if !(residual <= tolerance) {
            return Err(DynamicsError::InfeasibleTransition {
                kind: InfeasibilityKind::Actuation,
                residual,
                tolerance,
            });
        }
        Ok(ControlInput::new(u.iter().copied().collect()))
    }

    /// Whether `t` passes the feasibility predicate of inverse dynamics.
    pub fn is_feasible(&self, t: &StateTransition, tol: &FeasibilityTol) -> bool {
        self.inverse_dynamics_tol(t, tol).is_ok()
    }

    /// Feasibility tolerances for data generated with noise bound `eps`.
    ///
    /// Noise of at most `ε/2` on `q̇'` moves the implied generalized force by
    /// at most `max_row_sum(M) ε / (2 dt)`, with `M` bounded by its value at
    /// `q = 0` for every catalog system.
    pub fn feasibility_tol(&self, eps: f64) -> FeasibilityTol {
        if eps <= 0.0 {
            return FeasibilityTol::default();
        }
        let m0 = self.system.mass_matrix(&vec![0.0; self.dof()]);
        let row_sum = m0
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        FeasibilityTol {
            position: eps.max(EXACT_FEAS_TOL),
            actuation: EXACT_FEAS_TOL + row_sum * eps / self.dt,
        }
    }

    pub fn kinetic_energy(&self, s: &GeneralizedCoords) -> Result<f64, DynamicsError> {
        self.check_coords(s)?;
        let m = self.system.mass_matrix(&s.q);
        let v = DVector::from_column_slice(&s.qdot);
        Ok(0.5 * v.dot(&(&m * &v)))
    }

    pub fn potential_energy(&self, s: &GeneralizedCoords) -> Result<f64, DynamicsError> {
        self.check_coords(s)?;
        Ok(self.system.potential(&s.q))
    }

    pub fn total_energy(&self, s: &GeneralizedCoords) -> Result<f64, DynamicsError> {
        Ok(self.kinetic_energy(s)? + self.potential_energy(s)?)
    }

    /// Uniform sample from the model's state box.
    pub fn sample_state<R: Rng + ?Sized>(&self, rng: &mut R) -> GeneralizedCoords {
        let state: Vec<f64> = self
            .state_bounds
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..=hi))
            .collect();
        GeneralizedCoords::from_state(&state)
    }

    pub fn sample_control<R: Rng + ?Sized>(&self, rng: &mut R) -> ControlInput {
        let b = self.control_bound;
        ControlInput::new((0..self.act_dim()).map(|_| rng.random_range(-b..=b)).collect())
    }

    pub fn uniqueness_probe(
        &self,
        t: &StateTransition,
        n_candidates: usize,
        search_radius: f64,
        rng_seed: u64,
    ) -> Result<UniquenessReport, DynamicsError> {
        probe::uniqueness_probe(self, t, n_candidates, search_radius, rng_seed, &FeasibilityTol::default())
    }

    pub fn uniqueness_probe_tol(
        &self,
        t: &StateTransition,
        n_candidates: usize,
        search_radius: f64,
        rng_seed: u64,
        tol: &FeasibilityTol,
    ) -> Result<UniquenessReport, DynamicsError> {
        probe::uniqueness_probe(self, t, n_candidates, search_radius, rng_seed, tol)
    }
}

/// Draw from the open interval `(−half, half)`.
fn open_uniform<R: Rng + ?Sized>(rng: &mut R, half: f64) -> f64 {
    loop {
        let x = rng.random_range(-half..half);
        if x > -half {
            return x;
        }
    }
}
