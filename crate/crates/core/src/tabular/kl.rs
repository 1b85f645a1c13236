use super::{exact_occupancies, FiniteMdp, TabularError, TabularPolicy};

/// `ρ(a|s,s')` with rows for unreachable `(s, s')` marked undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseDynamicsTable {
    pub n_states: usize,
    pub n_actions: usize,
    /// `[(s * n_states + s') * n_actions + a]`
    pub density: Vec<f64>,
    /// `[s * n_states + s']`
    pub defined: Vec<bool>,
}

impl InverseDynamicsTable {
    pub fn get(&self, s: usize, s_next: usize, a: usize) -> Option<f64> {
        let row = s * self.n_states + s_next;
        self.defined[row].then(|| self.density[row * self.n_actions + a])
    }

    pub fn row(&self, s: usize, s_next: usize) -> Option<&[f64]> {
        let row = s * self.n_states + s_next;
        self.defined[row].then(|| &self.density[row * self.n_actions..(row + 1) * self.n_actions])
    }
}

/// `ρπ(a|s,s') = T(s'|s,a) π(a|s) / Σ_ā T(s'|s,ā) π(ā|s)`.
pub fn inverse_dynamics_density(mdp: &FiniteMdp, pi: &TabularPolicy) -> Result<InverseDynamicsTable, TabularError> {
    pi.check_against(mdp)?;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut density = vec![0.0; n * n * na];
    let mut defined = vec![false; n * n];
    for s in 0..n {
        for s_next in 0..n {
            let row = s * n + s_next;
            let weights: Vec<f64> = (0..na).map(|a| mdp.prob(s, a, s_next) * pi.prob(s, a)).collect();
            let total: f64 = weights.iter().sum();
            if total > 0.0 {
                defined[row] = true;
                for (a, w) in weights.iter().enumerate() {
                    density[row * na + a] = w / total;
                }
            }
        }
    }
    Ok(InverseDynamicsTable {
        n_states: n,
        n_actions: na,
        density,
        defined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlReport {
    /// `KL(ρπ(s,a) ‖ ρE(s,a))` on normalized occupancies.
    pub kl_sa: f64,
    /// `KL(ρπ(s,s') ‖ ρE(s,s'))` on normalized occupancies.
    pub kl_ss: f64,
    /// Inverse dynamics disagreement, summed directly from the two
    /// inverse-dynamics tables.
    pub idd: f64,
    /// `idd − (kl_sa − kl_ss)`.
    pub residual: f64,
}

fn kl_divergence(p: &[f64], q: &[f64], scale: f64, measure: &'static str) -> Result<f64, TabularError> {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let pn = pi * scale;
        if pn <= 0.0 {
            continue;
        }
        let qn = qi * scale;
        if qn <= 0.0 {
            return Err(TabularError::SupportViolation {
                measure,
                learner_mass: pn,
            });
        }
        total += pn * (pn / qn).ln();
    }
    Ok(total)
}

/// The three divergences of the LfD / LfO decomposition for learner `pi`
/// against `expert`.
pub fn kl_report(mdp: &FiniteMdp, pi: &TabularPolicy, expert: &TabularPolicy) -> Result<KlReport, TabularError> {
    let learner = exact_occupancies(mdp, pi)?;
    let reference = exact_occupancies(mdp, expert)?;
    let scale = 1.0 - mdp.gamma();
    let kl_sa = kl_divergence(&learner.rho_sa, &reference.rho_sa, scale, "rho(s,a)")?;
    let kl_ss = kl_divergence(&learner.rho_ss, &reference.rho_ss, scale, "rho(s,s')")?;

    let inv_learner = inverse_dynamics_density(mdp, pi)?;
    let inv_expert = inverse_dynamics_density(mdp, expert)?;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut idd = 0.0;
    for s in 0..n {
        for s_next in 0..n {
            let (Some(lr), er) = (inv_learner.row(s, s_next), inv_expert.row(s, s_next)) else {
                continue;
            };
            for a in 0..na {
                let weight = learner.sas(s, a, s_next) * scale;
                if weight <= 0.0 {
                    continue;
                }
                let e = er.map_or(0.0, |r| r[a]);
                if e <= 0.0 {
                    return Err(TabularError::SupportViolation {
                        measure: "rho(a|s,s')",
                        learner_mass: weight,
                    });
                }
                idd += weight * (lr[a] / e).ln();
            }
        }
    }
    Ok(KlReport {
        kl_sa,
        kl_ss,
        idd,
        residual: idd - (kl_sa - kl_ss),
    })
}
