use nalgebra::{DMatrix, DMatrixView, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Mlp;

pub const WARMUP_ITERATIONS: usize = 50;

/// Left and right singular-vector estimates for every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub u: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    /// Latest `σ̂ = uᵀ W v` per layer.
    pub sigma: Vec<f64>,
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = g.norm();
        if n > 0.0 {
            return g / n;
        }
    }
}

/// One power-iteration step; returns `σ̂`.
pub fn power_iteration(w: DMatrixView<'_, f64>, u: &mut DVector<f64>, v: &mut DVector<f64>) -> f64 {
    let wu = w.tr_mul(u);
    let n = wu.norm();
    if n > 0.0 {
        *v = wu / n;
    }
    let wv = w * &*v;
    let n = wv.norm();
    if n > 0.0 {
        *u = wv / n;
    }
    u.dot(&(w * &*v))
}

/// Single step of the estimator on a bare matrix: updates `(u, v)` and
/// returns `(W / σ̂, σ̂)`.
pub fn spectral_step(w: &DMatrix<f64>, u: &mut DVector<f64>, v: &mut DVector<f64>) -> (DMatrix<f64>, f64) {
    let sigma = power_iteration(w.as_view(), u, v);
    (w / sigma, sigma)
}

impl SpectralState {
    pub fn new<R: Rng + ?Sized>(net: &Mlp, warmup: usize, rng: &mut R) -> Self {
        let sizes = net.layer_sizes();
        let mut state = Self {
            u: (0..net.n_layers()).map(|l| random_unit(sizes[l + 1], rng)).collect(),
            v: (0..net.n_layers()).map(|l| random_unit(sizes[l], rng)).collect(),
            sigma: vec![1.0; net.n_layers()],
        };
        for _ in 0..warmup {
            state.step(net);
        }
        state
    }

    pub fn step(&mut self, net: &Mlp) {
        for l in 0..net.n_layers() {
            self.sigma[l] = power_iteration(net.weight(l), &mut self.u[l], &mut self.v[l]);
        }
    }

    /// Extra power iterations until every `σ̂` moves by less than `tol`
    /// (relative) or `max_iter` is reached; returns the iterations used.
    pub fn refine(&mut self, net: &Mlp, max_iter: usize, tol: f64) -> usize {
        for it in 0..max_iter {
            let before = self.sigma.clone();
            self.step(net);
            let settled = before
                .iter()
                .zip(&self.sigma)
                .all(|(a, b)| (a - b).abs() <= tol * b.abs());
            if settled {
                return it + 1;
            }
        }
        max_iter
    }

    /// Copy of `net` with every weight matrix divided by its `σ̂`.
    pub fn normalized(&self, net: &Mlp) -> Mlp {
        let mut out = net.clone();
        for l in 0..net.n_layers() {
            let inv = 1.0 / self.sigma[l];
            for p in &mut out.params_mut()[net.weight_range(l)] {
                *p *= inv;
            }
        }
        out
    }

    /// Maps gradients w.r.t. the normalized weights `W̄` back to the raw
    /// weights, treating `u, v` as constants:
    /// `∂L/∂W = (G − ⟨G, W̄⟩ u vᵀ) / σ̂`.
    pub fn pullback(&self, normalized: &Mlp, grads: &mut [f64]) {
        for l in 0..normalized.n_layers() {
            let range = normalized.weight_range(l);
            let w_bar = normalized.weight(l);
            let g = DMatrixView::from_slice(&grads[range.clone()], w_bar.nrows(), w_bar.ncols());
            let inner = g.dot(&w_bar);
            let raw = (g - &self.u[l] * self.v[l].transpose() * inner) / self.sigma[l];
            grads[range].copy_from_slice(raw.as_slice());
        }
    }
}
