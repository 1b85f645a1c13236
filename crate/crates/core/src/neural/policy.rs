use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::check_len;
use super::{Activation, AngleFeatures, Mlp, NeuralError, RunningNormalizer, DEFAULT_CLIP};

pub const POLICY_OUTPUT_GAIN: f64 = 0.01;

/// Diagonal Gaussian with an MLP mean and a state-independent `log_std`.
///
/// States pass through `features` (if any), then through `obs_norm` with
/// its frozen statistics (if any), before entering the mean network.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    pub log_std: DVector<f64>,
    pub obs_norm: Option<RunningNormalizer>,
    pub features: Option<AngleFeatures>,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        normalize_inputs: bool,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        Ok(Self {
            mean_net: Mlp::new(&sizes, activation, POLICY_OUTPUT_GAIN, rng)?,
            log_std: DVector::zeros(action_dim),
            obs_norm: normalize_inputs.then(|| RunningNormalizer::new(state_dim, DEFAULT_CLIP)),
            features: None,
        })
    }

    /// Policy whose angular state coordinates enter as `(cos, sin)`.
    pub fn with_features<R: Rng + ?Sized>(
        features: AngleFeatures,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        normalize_inputs: bool,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        let mut policy = Self::new(features.output_dim(), action_dim, hidden, activation, normalize_inputs, rng)?;
        policy.features = Some(features);
        Ok(policy)
    }

    /// Raw state dimension.
    pub fn state_dim(&self) -> usize {
        self.features.as_ref().map_or(self.mean_net.input_dim(), AngleFeatures::input_dim)
    }

    pub fn action_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    /// Mean-network parameters followed by `log_std`.
    pub fn n_params(&self) -> usize {
        self.mean_net.n_params() + self.action_dim()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.mean_net.params().to_vec();
        p.extend(self.log_std.iter());
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        check_len("policy parameters", self.n_params(), params.len())?;
        let split = self.mean_net.n_params();
        self.mean_net.set_params(&params[..split])?;
        self.log_std.copy_from_slice(&params[split..]);
        Ok(())
    }

    pub fn std(&self) -> DVector<f64> {
        self.log_std.map(f64::exp)
    }

    pub fn update_normalizer(&mut self, states: &DMatrix<f64>) {
        if self.obs_norm.is_some() {
            let x = self.featurize(states);
            if let Some(norm) = &mut self.obs_norm {
                norm.update(&x);
            }
        }
    }

    fn featurize(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.features {
            Some(f) => f.apply(states),
            None => states.clone(),
        }
    }

    /// Network input for raw states.
    pub fn prepare(&self, states: &DMatrix<f64>) -> DMatrix<f64> {
        let x = self.featurize(states);
        match &self.obs_norm {
            Some(norm) => norm.apply(&x),
            None => x,
        }
    }

    /// Action means for a batch of raw states (columns).
    pub fn mean(&self, states: &DMatrix<f64>) -> Result<DMatrix<f64>, NeuralError> {
        self.mean_net.forward(&self.prepare(states))
    }

    pub fn log_prob_batch(&self, states: &DMatrix<f64>, actions: &DMatrix<f64>) -> Result<Vec<f64>, NeuralError> {
        let means = self.mean(states)?;
        Ok(gaussian_log_prob(&means, &self.log_std, actions))
    }

    /// Log densities and the gradient of `Σ_i w_i log π(a_i|s_i)`.
    pub fn weighted_log_prob_grad(
        &self,
        states: &DMatrix<f64>,
        actions: &DMatrix<f64>,
        weights: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NeuralError> {
        check_len("weights", states.ncols(), weights.len())?;
        let cache = self.mean_net.forward_cached(&self.prepare(states))?;
        let means = cache.output();
        if means.shape() != actions.shape() {
            return Err(NeuralError::ShapeMismatch {
                what: "actions",
                expected: means.len(),
                found: actions.len(),
            });
        }
        let logps = gaussian_log_prob(means, &self.log_std, actions);
        let inv_var = self.log_std.map(|l| (-2.0 * l).exp());
        let mut mean_grad = DMatrix::<f64>::zeros(means.nrows(), means.ncols());
        let mut log_std_grad = DVector::<f64>::zeros(self.action_dim());
        for j in 0..means.ncols() {
            for i in 0..means.nrows() {
                let diff = actions[(i, j)] - means[(i, j)];
                mean_grad[(i, j)] = weights[j] * diff * inv_var[i];
                log_std_grad[i] += weights[j] * (diff * diff * inv_var[i] - 1.0);
            }
        }
        let (mut grad, _) = self.mean_net.backward(&cache, &mean_grad)?;
        grad.extend(log_std_grad.iter());
        Ok((logps, grad))
    }

    /// Single-sample log density with its full parameter gradient.
    pub fn log_prob(&self, s: &[f64], a: &[f64]) -> Result<(f64, Vec<f64>), NeuralError> {
        let states = DMatrix::from_column_slice(s.len(), 1, s);
        let actions = DMatrix::from_column_slice(a.len(), 1, a);
        let (logps, grad) = self.weighted_log_prob_grad(&states, &actions, &[1.0])?;
        Ok((logps[0], grad))
    }

    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        s: &[f64],
        deterministic: bool,
        rng: &mut R,
    ) -> Result<DVector<f64>, NeuralError> {
        let mean = self.mean(&DMatrix::from_column_slice(s.len(), 1, s))?.column(0).into_owned();
        if deterministic {
            return Ok(mean);
        }
        let std = self.std();
        Ok(DVector::from_fn(mean.len(), |i, _| {
            let z: f64 = StandardNormal.sample(rng);
            mean[i] + std[i] * z
        }))
    }

    pub fn sample(&self, s: &[f64], rng_seed: u64, deterministic: bool) -> Result<DVector<f64>, NeuralError> {
        self.sample_with(s, deterministic, &mut ChaCha8Rng::seed_from_u64(rng_seed))
    }

    /// Differential entropy (independent of the state).
    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|l| l + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum()
    }

    /// Fisher information times `v`, averaged over the given states.
    ///
    /// The mean block is `Jᵀ diag(σ⁻²) J / N` computed with one forward-mode
    /// and one reverse pass; the `log_std` block is `2 I`.
    pub fn fisher_vector_product(&self, states: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>, NeuralError> {
        check_len("tangent", self.n_params(), v.len())?;
        let split = self.mean_net.n_params();
        let x = self.prepare(states);
        let (_, jv) = self.mean_net.jvp(&x, &v[..split])?;
        let n = x.ncols() as f64;
        let inv_var = self.log_std.map(|l| (-2.0 * l).exp());
        let mut w = jv;
        for mut col in w.column_iter_mut() {
            for i in 0..col.len() {
                col[i] *= inv_var[i] / n;
            }
        }
        let cache = self.mean_net.forward_cached(&x)?;
        let (mut out, _) = self.mean_net.backward(&cache, &w)?;
        out.extend(v[split..].iter().map(|x| 2.0 * x));
        Ok(out)
    }
}

/// Column-wise diagonal-Gaussian log density.
pub fn gaussian_log_prob(means: &DMatrix<f64>, log_std: &DVector<f64>, actions: &DMatrix<f64>) -> Vec<f64> {
    let d = means.nrows() as f64;
    let norm = -0.5 * d * (2.0 * PI).ln() - log_std.sum();
    (0..means.ncols())
        .map(|j| {
            let mut q = 0.0;
            for i in 0..means.nrows() {
                let z = (actions[(i, j)] - means[(i, j)]) * (-log_std[i]).exp();
                q += z * z;
            }
            norm - 0.5 * q
        })
        .collect()
}

/// Mean over columns of `KL(N(μ_old, σ_old) ‖ N(μ_new, σ_new))`.
pub fn mean_gaussian_kl(
    old_means: &DMatrix<f64>,
    old_log_std: &DVector<f64>,
    new_means: &DMatrix<f64>,
    new_log_std: &DVector<f64>,
) -> f64 {
    let n = old_means.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..old_means.nrows() {
            let var_old = (2.0 * old_log_std[i]).exp();
            let var_new = (2.0 * new_log_std[i]).exp();
            let dm = old_means[(i, j)] - new_means[(i, j)];
            total += new_log_std[i] - old_log_std[i] + (var_old + dm * dm) / (2.0 * var_new) - 0.5;
        }
    }
    total / n as f64
}
