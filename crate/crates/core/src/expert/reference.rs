//! Linear-quadratic reference controllers around each task's equilibrium.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{ControlInput, ElModel, GeneralizedCoords, StateTransition, System};
use crate::env::{wrap_angle, Env, Task, REACHER_GOAL};

use super::ExpertError;

/// `u = u_eq − K (x − x_eq)`, with angle errors wrapped.
#[derive(Debug, Clone)]
pub struct LinearController {
    pub x_eq: Vec<f64>,
    /// Static torque holding `x_eq` (gravity compensation).
    pub u_eq: Vec<f64>,
    pub gain: DMatrix<f64>,
    angular: Vec<bool>,
}

impl LinearController {
    /// Discrete-time LQR on the linearized Euler map of `env`'s model.
    pub fn lqr(env: &Env) -> Result<Self, ExpertError> {
        let model = env.model();
        let n = model.state_dim();
        let dof = model.dof();
        let (x_eq, q, r, angular) = match (env.task(), model.system()) {
            (Task::Pendulum, _) => (vec![PI, 0.0], vec![1.0, 0.1], 1e-3, vec![true, false]),
            (Task::Cartpole, _) => (vec![0.0; 4], vec![1.0, 1.0, 0.1, 0.1], 0.1, vec![false, true, false, false]),
            (Task::Reacher2, &System::Reacher2 { length1, length2, .. }) => {
                let [gx, gy] = REACHER_GOAL;
                let c2 = ((gx * gx + gy * gy - length1 * length1 - length2 * length2) / (2.0 * length1 * length2))
                    .clamp(-1.0, 1.0);
                let q2 = c2.acos();
                let q1 = gy.atan2(gx) - (length2 * q2.sin()).atan2(length1 + length2 * q2.cos());
                (vec![q1, q2, 0.0, 0.0], vec![1.0, 1.0, 0.01, 0.01], 1e-3, vec![true, true, false, false])
            }
            _ => {
                return Err(ExpertError::Config(format!(
                    "no linear reference controller for `{}`",
                    env.id()
                )))
            }
        };
        let still = GeneralizedCoords::from_state(&x_eq);
        let u_eq = model
            .inverse_dynamics(&StateTransition::new(still.clone(), still))?
            .u;
        let (a, b) = linearize(model, &x_eq, &u_eq)?;
        let qm = DMatrix::from_diagonal(&DVector::from_vec(q));
        let rm = DMatrix::identity(model.act_dim(), model.act_dim()) * r;
        let gain = dlqr(&a, &b, &qm, &rm).ok_or_else(|| ExpertError::Config("Riccati iteration diverged".into()))?;
        debug_assert_eq!(gain.ncols(), n);
        debug_assert_eq!(angular.len(), 2 * dof);
        Ok(Self {
            x_eq,
            u_eq,
            gain,
            angular,
        })
    }

    pub fn action(&self, s: &[f64]) -> Vec<f64> {
        let err = DVector::from_iterator(
            s.len(),
            s.iter().zip(&self.x_eq).zip(&self.angular).map(|((x, e), &ang)| {
                if ang {
                    wrap_angle(x - e)
                } else {
                    x - e
                }
            }),
        );
        let du = &self.gain * err;
        self.u_eq.iter().zip(du.iter()).map(|(u, d)| u - d).collect()
    }
}

/// Central-difference Jacobians `(∂f/∂x, ∂f/∂u)` of the noiseless step.
pub fn linearize(model: &ElModel, x: &[f64], u: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), ExpertError> {
    const H: f64 = 1e-6;
    let f = |x: &[f64], u: &[f64]| -> Result<Vec<f64>, ExpertError> {
        Ok(model
            .forward_step(&GeneralizedCoords::from_state(x), &ControlInput::new(u.to_vec()), 0.0, 0)?
            .to_state())
    };
    let n = x.len();
    let m = u.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    for j in 0..n {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += H;
        xm[j] -= H;
        let (fp, fm) = (f(&xp, u)?, f(&xm, u)?);
        for i in 0..n {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * H);
        }
    }
    for j in 0..m {
        let (mut up, mut um) = (u.to_vec(), u.to_vec());
        up[j] += H;
        um[j] -= H;
        let (fp, fm) = (f(x, &up)?, f(x, &um)?);
        for i in 0..n {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * H);
        }
    }
    Ok((a, b))
}

/// Infinite-horizon discrete LQR gain by Riccati iteration.
pub fn dlqr(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut p = q.clone();
    for _ in 0..100_000 {
        let btp = b.transpose() * &p;
        let k = (r + &btp * b).try_inverse()? * &btp * a;
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * &k;
        let next = (&next + next.transpose()) * 0.5;
        let change = (&next - &p).amax();
        p = next;
        if !p.iter().all(|x| x.is_finite()) {
            return None;
        }
        if change <= 1e-10 * (1.0 + p.amax()) {
            let btp = b.transpose() * &p;
            return Some((r + &btp * b).try_inverse()? * btp * a);
        }
    }
    None
}
