//! Catalog of planar rigid-body systems.
//!
//! Every system is written in the form `M(q) q̈ + C(q, q̇) q̇ + G(q) = B u`.
//! Potential energies use the hanging / resting configuration as reference
//! (`V = 0` at `q = 0` for the pendulum, reacher and acrobot; the cart-pole
//! measures the pole angle from upright and uses `V = m g l cos θ`).

use nalgebra::{DMatrix, DVector};

/// Physical description of one catalog system.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    /// Point mass on a massless rod. `q = θ`, measured from hanging down.
    Pendulum { mass: f64, length: f64, gravity: f64 },
    /// Fully actuated planar two-link arm in the horizontal plane, point
    /// masses at the link tips.
    Reacher2 {
        mass1: f64,
        mass2: f64,
        length1: f64,
        length2: f64,
    },
    /// Cart with a point-mass pole. `q = (x, θ)`, θ measured from upright,
    /// force on the cart only.
    Cartpole {
        cart_mass: f64,
        pole_mass: f64,
        pole_length: f64,
        gravity: f64,
    },
    /// Two uniform links hanging from a pivot, torque at the elbow only.
    /// `q = (θ1, θ2)` with θ1 measured from hanging down and θ2 relative.
    Acrobot {
        mass1: f64,
        mass2: f64,
        length1: f64,
        length2: f64,
        com1: f64,
        com2: f64,
        inertia1: f64,
        inertia2: f64,
        gravity: f64,
    },
}

impl System {
    pub fn dof(&self) -> usize {
        match self {
            System::Pendulum { .. } => 1,
            _ => 2,
        }
    }

    pub fn actuation(&self) -> DMatrix<f64> {
        match self {
            System::Pendulum { .. } => DMatrix::from_element(1, 1, 1.0),
            System::Reacher2 { .. } => DMatrix::identity(2, 2),
            System::Cartpole { .. } => DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            System::Acrobot { .. } => DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            System::Pendulum {
                mass,
                length,
                gravity,
            } => vec![("mass", mass), ("length", length), ("gravity", gravity)],
            System::Reacher2 {
                mass1,
                mass2,
                length1,
                length2,
            } => vec![
                ("mass1", mass1),
                ("mass2", mass2),
                ("length1", length1),
                ("length2", length2),
            ],
            System::Cartpole {
                cart_mass,
                pole_mass,
                pole_length,
                gravity,
            } => vec![
                ("cart_mass", cart_mass),
                ("pole_mass", pole_mass),
                ("pole_length", pole_length),
                ("gravity", gravity),
            ],
            System::Acrobot {
                mass1,
                mass2,
                length1,
                length2,
                com1,
                com2,
                inertia1,
                inertia2,
                gravity,
            } => vec![
                ("mass1", mass1),
                ("mass2", mass2),
                ("length1", length1),
                ("length2", length2),
                ("com1", com1),
                ("com2", com2),
                ("inertia1", inertia1),
                ("inertia2", inertia2),
                ("gravity", gravity),
            ],
        }
    }

    /// Overrides one named parameter. Returns `false` for unknown names.
    pub fn set_param(&mut self, name: &str, value: f64) -> bool {
        let slot = match self {
            System::Pendulum {
                mass,
                length,
                gravity,
            } => match name {
                "mass" => mass,
                "length" => length,
                "gravity" => gravity,
                _ => return false,
            },
            System::Reacher2 {
                mass1,
                mass2,
                length1,
                length2,
            } => match name {
                "mass1" => mass1,
                "mass2" => mass2,
                "length1" => length1,
                "length2" => length2,
                _ => return false,
            },
            System::Cartpole {
                cart_mass,
                pole_mass,
                pole_length,
                gravity,
            } => match name {
                "cart_mass" => cart_mass,
                "pole_mass" => pole_mass,
                "pole_length" => pole_length,
                "gravity" => gravity,
                _ => return false,
            },
            System::Acrobot {
                mass1,
                mass2,
                length1,
                length2,
                com1,
                com2,
                inertia1,
                inertia2,
                gravity,
            } => match name {
                "mass1" => mass1,
                "mass2" => mass2,
                "length1" => length1,
                "length2" => length2,
                "com1" => com1,
                "com2" => com2,
                "inertia1" => inertia1,
                "inertia2" => inertia2,
                "gravity" => gravity,
                _ => return false,
            },
        };
        *slot = value;
        true
    }

    pub fn mass_matrix(&self, q: &[f64]) -> DMatrix<f64> {
        match *self {
            System::Pendulum { mass, length, .. } => {
                DMatrix::from_element(1, 1, mass * length * length)
            }
            System::Reacher2 {
                mass1,
                mass2,
                length1,
                length2,
            } => {
                let c2 = q[1].cos();
                let m22 = mass2 * length2 * length2;
                let m12 = m22 + mass2 * length1 * length2 * c2;
                let m11 = (mass1 + mass2) * length1 * length1 + m22 + 2.0 * mass2 * length1 * length2 * c2;
                DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22])
            }
            System::Cartpole {
                cart_mass,
                pole_mass,
                pole_length,
                ..
            } => {
                let off = pole_mass * pole_length * q[1].cos();
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        cart_mass + pole_mass,
                        off,
                        off,
                        pole_mass * pole_length * pole_length,
                    ],
                )
            }
            System::Acrobot {
                mass1,
                mass2,
                length1,
                com1,
                com2,
                inertia1,
                inertia2,
                ..
            } => {
                let c2 = q[1].cos();
                let d22 = mass2 * com2 * com2 + inertia2;
                let d12 = mass2 * (com2 * com2 + length1 * com2 * c2) + inertia2;
                let d11 = mass1 * com1 * com1
                    + mass2 * (length1 * length1 + com2 * com2 + 2.0 * length1 * com2 * c2)
                    + inertia1
                    + inertia2;
                DMatrix::from_row_slice(2, 2, &[d11, d12, d12, d22])
            }
        }
    }

    pub fn coriolis_matrix(&self, q: &[f64], qdot: &[f64]) -> DMatrix<f64> {
        match *self {
            System::Pendulum { .. } => DMatrix::zeros(1, 1),
            System::Reacher2 {
                mass2,
                length1,
                length2,
                ..
            } => two_link_coriolis(mass2 * length1 * length2 * q[1].sin(), qdot),
            System::Cartpole {
                pole_mass,
                pole_length,
                ..
            } => {
                let h = -pole_mass * pole_length * q[1].sin() * qdot[1];
                DMatrix::from_row_slice(2, 2, &[0.0, h, 0.0, 0.0])
            }
            System::Acrobot {
                mass2,
                length1,
                com2,
                ..
            } => two_link_coriolis(mass2 * length1 * com2 * q[1].sin(), qdot),
        }
    }

    pub fn gravity_vector(&self, q: &[f64]) -> DVector<f64> {
        match *self {
            System::Pendulum {
                mass,
                length,
                gravity,
            } => DVector::from_element(1, mass * gravity * length * q[0].sin()),
            System::Reacher2 { .. } => DVector::zeros(2),
            System::Cartpole {
                pole_mass,
                pole_length,
                gravity,
                ..
            } => DVector::from_column_slice(&[0.0, -pole_mass * gravity * pole_length * q[1].sin()]),
            System::Acrobot {
                mass1,
                mass2,
                length1,
                com1,
                com2,
                gravity,
                ..
            } => {
                let g12 = mass2 * com2 * gravity * (q[0] + q[1]).sin();
                let g1 = (mass1 * com1 + mass2 * length1) * gravity * q[0].sin() + g12;
                DVector::from_column_slice(&[g1, g12])
            }
        }
    }

    /// Potential energy with `G(q) = ∂V/∂q`.
    pub fn potential(&self, q: &[f64]) -> f64 {
        match *self {
            System::Pendulum {
                mass,
                length,
                gravity,
            } => mass * gravity * length * (1.0 - q[0].cos()),
            System::Reacher2 { .. } => 0.0,
            System::Cartpole {
                pole_mass,
                pole_length,
                gravity,
                ..
            } => pole_mass * gravity * pole_length * q[1].cos(),
            System::Acrobot {
                mass1,
                mass2,
                length1,
                com1,
                com2,
                gravity,
                ..
            } => {
                (mass1 * com1 + mass2 * length1) * gravity * (1.0 - q[0].cos())
                    + mass2 * com2 * gravity * (1.0 - (q[0] + q[1]).cos())
            }
        }
    }
}

/// Coriolis matrix shared by the two-link arms: `h = m2 l1 lc2 sin q2`.
fn two_link_coriolis(h: f64, qdot: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[-h * qdot[1], -h * (qdot[0] + qdot[1]), h * qdot[0], 0.0],
    )
}
