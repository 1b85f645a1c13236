use nalgebra::{DMatrix, SVD};
use rand::Rng;

use crate::neural::{Activation, Adam, AngleFeatures, Mlp, NeuralError, RunningNormalizer, SpectralState, DEFAULT_CLIP, WARMUP_ITERATIONS};

use super::{ImitationError, Mode};

pub const PROB_CLAMP: f64 = 1e-8;
/// Cap and tolerance for the end-of-update spectral refinement.
const REFINE_ITERATIONS: usize = 200;
const REFINE_TOL: f64 = 1e-6;

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli entropy of `σ(z)` in nats.
fn bernoulli_entropy(z: f64) -> f64 {
    let p = sigmoid(z);
    softplus(z) - z * p
}

/// Rewrites stacked `(q, q̇, q', q̇')` columns as `(q, q̇, q', (q̇' − q̇)/dt)`.
/// The velocity change carries the control, and at raw scale it is `dt`
/// times smaller than the state; positions are left alone so that transition
/// noise is not amplified along with it.
pub fn transition_deltas(x: &mut DMatrix<f64>, state_dim: usize, dt: f64) {
    assert_eq!(x.nrows(), 2 * state_dim, "expected stacked (s, s') columns");
    let dof = state_dim / 2;
    for mut col in x.column_iter_mut() {
        for i in dof..state_dim {
            col[state_dim + i] = (col[state_dim + i] - col[i]) / dt;
        }
    }
}

/// Stacks per-sample discriminator inputs as columns.
pub fn build_inputs(mode: Mode, states: &DMatrix<f64>, actions: &DMatrix<f64>, next_states: &DMatrix<f64>) -> DMatrix<f64> {
    let second = match mode {
        Mode::Gail => actions,
        Mode::Gaifo => next_states,
    };
    let rows = states.nrows() + second.nrows();
    let mut x = DMatrix::zeros(rows, states.ncols());
    x.rows_mut(0, states.nrows()).copy_from(states);
    x.rows_mut(states.nrows(), second.nrows()).copy_from(second);
    x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscLossParts {
    /// Logistic loss before the entropy bonus.
    pub logistic: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Logistic classifier `D(x) = σ(z(x))`, trained toward 1 on agent data and
/// 0 on expert data.
#[derive(Debug, Clone)]
pub struct Discriminator {
    /// Optional `(cos, sin)` expansion of angular input coordinates,
    /// applied before the normalizer.
    pub features: Option<AngleFeatures>,
    pub net: Mlp,
    pub spectral: Option<SpectralState>,
    pub norm: RunningNormalizer,
    pub opt: Adam,
    pub entropy_coef: f64,
    updates: u64,
}

impl Discriminator {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
        lr: f64,
        entropy_coef: f64,
        spectral_norm: bool,
        rng: &mut R,
    ) -> Result<Self, ImitationError> {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, activation, 1.0, rng)?;
        let spectral = spectral_norm.then(|| SpectralState::new(&net, WARMUP_ITERATIONS, rng));
        Ok(Self {
            features: None,
            opt: Adam::new(net.n_params(), lr),
            net,
            spectral,
            norm: RunningNormalizer::new(input_dim, DEFAULT_CLIP),
            entropy_coef,
            updates: 0,
        })
    }

    /// Same as [`Discriminator::new`] with angular inputs expanded first.
    #[allow(clippy::too_many_arguments)]
    pub fn with_features<R: Rng + ?Sized>(
        features: AngleFeatures,
        hidden: &[usize],
        activation: Activation,
        lr: f64,
        entropy_coef: f64,
        spectral_norm: bool,
        rng: &mut R,
    ) -> Result<Self, ImitationError> {
        let mut d = Self::new(features.output_dim(), hidden, activation, lr, entropy_coef, spectral_norm, rng)?;
        d.features = Some(features);
        Ok(d)
    }

    /// Raw input dimension.
    pub fn input_dim(&self) -> usize {
        self.features.as_ref().map_or(self.net.input_dim(), AngleFeatures::input_dim)
    }

    fn featurize(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.features {
            Some(f) => f.apply(x),
            None => x.clone(),
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Network actually evaluated (weights divided by σ̂ when spectral
    /// normalization is on).
    pub fn effective_net(&self) -> Mlp {
        match &self.spectral {
            Some(s) => s.normalized(&self.net),
            None => self.net.clone(),
        }
    }

    pub fn logits(&self, inputs: &DMatrix<f64>) -> Result<Vec<f64>, ImitationError> {
        self.check_rows(inputs.nrows())?;
        let out = self.effective_net().forward(&self.norm.apply(&self.featurize(inputs)))?;
        Ok(out.row(0).iter().copied().collect())
    }

    pub fn probabilities(&self, inputs: &DMatrix<f64>) -> Result<Vec<f64>, ImitationError> {
        Ok(self.logits(inputs)?.into_iter().map(sigmoid).collect())
    }

    /// `r = −log clamp(D(x), 1e-8, 1 − 1e-8)`.
    pub fn rewards(&self, inputs: &DMatrix<f64>) -> Result<Vec<f64>, ImitationError> {
        Ok(self.logits(inputs)?.into_iter().map(reward_from_logit).collect())
    }

    pub fn loss(&self, agent: &DMatrix<f64>, expert: &DMatrix<f64>) -> Result<DiscLossParts, ImitationError> {
        let za = self.logits(agent)?;
        let ze = self.logits(expert)?;
        Ok(loss_from_logits(&za, &ze, self.entropy_coef))
    }

    /// One Adam step on the regularized logistic loss; returns the loss at
    /// the pre-step parameters.
    pub fn update(&mut self, agent: &DMatrix<f64>, expert: &DMatrix<f64>) -> Result<DiscLossParts, ImitationError> {
        if agent.ncols() == 0 || expert.ncols() == 0 {
            return Err(ImitationError::EmptyBatch);
        }
        self.check_rows(agent.nrows())?;
        self.check_rows(expert.nrows())?;
        let (fa, fe) = (self.featurize(agent), self.featurize(expert));
        self.norm.update(&fa);
        self.norm.update(&fe);
        if let Some(s) = &mut self.spectral {
            s.step(&self.net);
        }
        let (parts, grads) = self.loss_and_grad(agent, expert)?;
        self.opt.step(self.net.params_mut(), &grads);
        self.updates += 1;
        Ok(parts)
    }

    /// Brings the spectral estimates up to date with the current weights
    /// at the end of an update.
    pub fn refine_spectral(&mut self) {
        if let Some(s) = &mut self.spectral {
            s.refine(&self.net, REFINE_ITERATIONS, REFINE_TOL);
        }
    }

    fn check_rows(&self, rows: usize) -> Result<(), ImitationError> {
        if rows == self.input_dim() {
            Ok(())
        } else {
            Err(ImitationError::Neural(NeuralError::ShapeMismatch {
                what: "discriminator input",
                expected: self.input_dim(),
                found: rows,
            }))
        }
    }

    /// Loss and its gradient w.r.t. the raw parameters, with the current
    /// normalizer and spectral estimates held fixed.
    pub fn loss_and_grad(
        &self,
        agent: &DMatrix<f64>,
        expert: &DMatrix<f64>,
    ) -> Result<(DiscLossParts, Vec<f64>), ImitationError> {
        self.check_rows(agent.nrows())?;
        self.check_rows(expert.nrows())?;
        let na = agent.ncols();
        let ne = expert.ncols();
        let mut x = DMatrix::zeros(agent.nrows(), na + ne);
        x.columns_mut(0, na).copy_from(agent);
        x.columns_mut(na, ne).copy_from(expert);
        let x = self.norm.apply(&self.featurize(&x));
        let eff = self.effective_net();
        let cache = eff.forward_cached(&x)?;
        let z: Vec<f64> = cache.output().row(0).iter().copied().collect();
        let parts = loss_from_logits(&z[..na], &z[na..], self.entropy_coef);

        let total = (na + ne) as f64;
        let mut dz = DMatrix::zeros(1, na + ne);
        for (j, &zj) in z.iter().enumerate() {
            let p = sigmoid(zj);
            let logistic = if j < na { (p - 1.0) / na as f64 } else { p / ne as f64 };
            // dH/dz = −z p (1 − p)
            let entropy = -zj * p * (1.0 - p) / total;
            dz[(0, j)] = logistic - self.entropy_coef * entropy;
        }
        let (mut grads, _) = eff.backward(&cache, &dz)?;
        if let Some(s) = &self.spectral {
            s.pullback(&eff, &mut grads);
        }
        Ok((parts, grads))
    }

    /// Largest singular value of each effective layer, computed exactly.
    pub fn effective_spectral_norms(&self) -> Vec<f64> {
        let eff = self.effective_net();
        (0..eff.n_layers())
            .map(|l| {
                let w = eff.weight(l).into_owned();
                SVD::new(w, false, false).singular_values.max()
            })
            .collect()
    }
}

pub fn reward_from_logit(z: f64) -> f64 {
    // −log σ(z) = softplus(−z)
    softplus(-z).clamp(-(1.0 - PROB_CLAMP).ln(), -PROB_CLAMP.ln())
}

/// Reward for a raw probability, with the same clamp.
pub fn reward_from_probability(d: f64) -> f64 {
    -d.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln()
}

pub fn loss_from_logits(agent: &[f64], expert: &[f64], entropy_coef: f64) -> DiscLossParts {
    let la = agent.iter().map(|&z| softplus(-z)).sum::<f64>() / agent.len() as f64;
    let le = expert.iter().map(|&z| softplus(z)).sum::<f64>() / expert.len() as f64;
    let entropy = agent.iter().chain(expert).map(|&z| bernoulli_entropy(z)).sum::<f64>()
        / (agent.len() + expert.len()) as f64;
    DiscLossParts {
        logistic: la + le,
        entropy,
        total: la + le - entropy_coef * entropy,
    }
}
