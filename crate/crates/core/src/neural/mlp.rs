use nalgebra::{DMatrix, DMatrixView, DVector, DVectorView};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = NeuralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(NeuralError::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Fully connected network. Samples are columns.
///
/// Parameters live in one flat vector; layer `l` holds `W_l` (out × in,
/// column-major) followed by `b_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

/// Values kept from a forward pass for reverse accumulation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer, plus the final output last.
    pub activations: Vec<DMatrix<f64>>,
    /// Pre-activations of every layer.
    pub pre: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

fn layer_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0];
    for w in sizes.windows(2) {
        let last = *offsets.last().unwrap();
        offsets.push(last + w[0] * w[1] + w[1]);
    }
    offsets
}

/// `rows × cols` matrix with orthonormal rows or columns, scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> DMatrix<f64> {
    let tall = rows >= cols;
    let (r, c) = if tall { (rows, cols) } else { (cols, rows) };
    let a = DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let rdiag = qr.r().diagonal();
    for j in 0..c {
        if rdiag[j] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if tall { q } else { q.transpose() };
    q * gain
}

impl Mlp {
    /// Zero-initialized network.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self, NeuralError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(NeuralError::Config(format!("bad layer sizes {layer_sizes:?}")));
        }
        let offsets = layer_offsets(layer_sizes);
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params: vec![0.0; *offsets.last().unwrap()],
            offsets,
        })
    }

    /// Orthogonal weights (gain 1 on hidden layers, `output_gain` on the last),
    /// zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activation: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        let n_layers = net.n_layers();
        for l in 0..n_layers {
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            let w = orthogonal(layer_sizes[l + 1], layer_sizes[l], gain, rng);
            let off = net.offsets[l];
            net.params[off..off + w.len()].copy_from_slice(w.as_slice());
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NeuralError> {
        check_len("parameters", self.params.len(), params.len())?;
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Flat range of layer `l`'s weights inside the parameter vector.
    pub fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let off = self.offsets[l];
        off..off + self.layer_sizes[l] * self.layer_sizes[l + 1]
    }

    pub fn weight(&self, l: usize) -> DMatrixView<'_, f64> {
        let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
        DMatrixView::from_slice(&self.params[self.weight_range(l)], rows, cols)
    }

    pub fn bias(&self, l: usize) -> DVectorView<'_, f64> {
        let start = self.weight_range(l).end;
        DVectorView::from_slice(&self.params[start..start + self.layer_sizes[l + 1]], self.layer_sizes[l + 1])
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<(), NeuralError> {
        check_len("input rows", self.input_dim(), x.nrows())
    }

    fn affine(&self, l: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = self.weight(l) * x;
        let b = self.bias(l);
        for mut col in z.column_iter_mut() {
            col += &b;
        }
        z
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, NeuralError> {
        self.check_input(x)?;
        let mut a = x.clone();
        for l in 0..self.n_layers() {
            let mut z = self.affine(l, &a);
            if l + 1 < self.n_layers() {
                z.apply(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward_vec(&self, x: &[f64]) -> Result<DVector<f64>, NeuralError> {
        let out = self.forward(&DMatrix::from_column_slice(x.len(), 1, x))?;
        Ok(out.column(0).into_owned())
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> Result<ForwardCache, NeuralError> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.n_layers() + 1);
        let mut pre = Vec::with_capacity(self.n_layers());
        activations.push(x.clone());
        for l in 0..self.n_layers() {
            let z = self.affine(l, &activations[l]);
            let a = if l + 1 < self.n_layers() {
                z.map(|v| self.activation.apply(v))
            } else {
                z.clone()
            };
            pre.push(z);
            activations.push(a);
        }
        Ok(ForwardCache { activations, pre })
    }

    /// Reverse accumulation of `Σ output_grad ⊙ output` into parameter and
    /// input gradients.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &DMatrix<f64>,
    ) -> Result<(Vec<f64>, DMatrix<f64>), NeuralError> {
        let out = cache.output();
        if out.shape() != output_grad.shape() {
            return Err(NeuralError::ShapeMismatch {
                what: "output gradient",
                expected: out.nrows() * out.ncols(),
                found: output_grad.nrows() * output_grad.ncols(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = output_grad.clone();
        for l in (0..self.n_layers()).rev() {
            let dw = &delta * cache.activations[l].transpose();
            let range = self.weight_range(l);
            grads[range.clone()].copy_from_slice(dw.as_slice());
            let bstart = range.end;
            for (i, row) in delta.row_iter().enumerate() {
                grads[bstart + i] = row.sum();
            }
            let mut below = self.weight(l).transpose() * &delta;
            if l > 0 {
                let z = &cache.pre[l - 1];
                let y = &cache.activations[l];
                for ((g, &zv), &yv) in below.iter_mut().zip(z.iter()).zip(y.iter()) {
                    *g *= self.activation.derivative(zv, yv);
                }
            }
            delta = below;
        }
        Ok((grads, delta))
    }

    /// Outputs, parameter gradients and input gradients in one call.
    pub fn forward_backward(
        &self,
        x: &DMatrix<f64>,
        output_grad: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>), NeuralError> {
        let cache = self.forward_cached(x)?;
        let (grads, input_grad) = self.backward(&cache, output_grad)?;
        Ok((cache.activations.last().unwrap().clone(), grads, input_grad))
    }

    /// Forward-mode directional derivative of the outputs along `dparams`.
    pub fn jvp(&self, x: &DMatrix<f64>, dparams: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), NeuralError> {
        self.check_input(x)?;
        check_len("tangent", self.params.len(), dparams.len())?;
        let mut a = x.clone();
        let mut da = DMatrix::<f64>::zeros(x.nrows(), x.ncols());
        for l in 0..self.n_layers() {
            let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            let range = self.weight_range(l);
            let dw = DMatrixView::from_slice(&dparams[range.clone()], rows, cols);
            let db = DVectorView::from_slice(&dparams[range.end..range.end + rows], rows);
            let z = self.affine(l, &a);
            let mut dz = dw * &a + self.weight(l) * &da;
            for mut col in dz.column_iter_mut() {
                col += &db;
            }
            if l + 1 < self.n_layers() {
                let y = z.map(|v| self.activation.apply(v));
                for ((d, &zv), &yv) in dz.iter_mut().zip(z.iter()).zip(y.iter()) {
                    *d *= self.activation.derivative(zv, yv);
                }
                a = y;
            } else {
                a = z;
            }
            da = dz;
        }
        Ok((a, da))
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), NeuralError> {
    if expected == found {
        Ok(())
    } else {
        Err(NeuralError::ShapeMismatch { what, expected, found })
    }
}
