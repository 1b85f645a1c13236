use nalgebra::{DMatrix, DVector};

use super::{FiniteMdp, TabularError, TabularPolicy};

/// Discounted occupancies `ρ(s,a)`, `ρ(s,s')` and `ρ(s,a,s')`.
///
/// The measures are unnormalized: `Σ ρ(s,a) = 1 / (1 − γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTriple {
    pub n_states: usize,
    pub n_actions: usize,
    /// `[s * n_actions + a]`
    pub rho_sa: Vec<f64>,
    /// `[s * n_states + s']`
    pub rho_ss: Vec<f64>,
    /// `[(s * n_actions + a) * n_states + s']`
    pub rho_sas: Vec<f64>,
}

impl OccupancyTriple {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            rho_sa: vec![0.0; n_states * n_actions],
            rho_ss: vec![0.0; n_states * n_states],
            rho_sas: vec![0.0; n_states * n_actions * n_states],
        }
    }

    pub fn sa(&self, s: usize, a: usize) -> f64 {
        self.rho_sa[s * self.n_actions + a]
    }

    pub fn ss(&self, s: usize, s_next: usize) -> f64 {
        self.rho_ss[s * self.n_states + s_next]
    }

    pub fn sas(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.rho_sas[(s * self.n_actions + a) * self.n_states + s_next]
    }

    /// State occupancy `ρ(s) = Σ_a ρ(s,a)`.
    pub fn state(&self) -> Vec<f64> {
        self.rho_sa.chunks(self.n_actions).map(|r| r.iter().sum()).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.rho_sa.iter().sum()
    }
}

/// Solves `(I − γ P_πᵀ) x = ρ₀` and expands `x` into the three joint measures.
pub fn exact_occupancies(mdp: &FiniteMdp, pi: &TabularPolicy) -> Result<OccupancyTriple, TabularError> {
    pi.check_against(mdp)?;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let gamma = mdp.gamma();

    // P_π[s, s'] = Σ_a π(a|s) T(s'|s,a)
    let mut p = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        for a in 0..na {
            let w = pi.prob(s, a);
            for (s_next, &t) in mdp.next_distribution(s, a).iter().enumerate() {
                p[(s, s_next)] += w * t;
            }
        }
    }
    let system = DMatrix::<f64>::identity(n, n) - p.transpose() * gamma;
    let x = system
        .lu()
        .solve(&DVector::from_column_slice(mdp.rho0()))
        .ok_or(TabularError::SingularSystem)?;

    let mut occ = OccupancyTriple::zeros(n, na);
    for s in 0..n {
        for a in 0..na {
            let sa = x[s] * pi.prob(s, a);
            occ.rho_sa[s * na + a] = sa;
            for (s_next, &t) in mdp.next_distribution(s, a).iter().enumerate() {
                let sas = sa * t;
                occ.rho_sas[(s * na + a) * n + s_next] = sas;
                occ.rho_ss[s * n + s_next] += sas;
            }
        }
    }
    Ok(occ)
}
