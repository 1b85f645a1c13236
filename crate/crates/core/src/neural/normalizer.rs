use nalgebra::{DMatrix, DVector};

pub const VAR_FLOOR: f64 = 1e-8;
pub const DEFAULT_CLIP: f64 = 5.0;

/// Streaming per-feature mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNormalizer {
    pub count: u64,
    pub mean: DVector<f64>,
    /// Sum of squared deviations from the mean.
    pub m2: DVector<f64>,
    pub clip: f64,
}

impl RunningNormalizer {
    pub fn new(dim: usize, clip: f64) -> Self {
        Self {
            count: 0,
            mean: DVector::zeros(dim),
            m2: DVector::zeros(dim),
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self) -> DVector<f64> {
        if self.count == 0 {
            DVector::from_element(self.dim(), 1.0)
        } else {
            self.m2.map(|m| (m / self.count as f64).max(0.0))
        }
    }

    /// Welford update, one sample (column) at a time.
    pub fn update(&mut self, batch: &DMatrix<f64>) {
        assert_eq!(batch.nrows(), self.dim(), "normalizer dimension");
        for col in batch.column_iter() {
            self.count += 1;
            let n = self.count as f64;
            for i in 0..self.dim() {
                let delta = col[i] - self.mean[i];
                self.mean[i] += delta / n;
                self.m2[i] += delta * (col[i] - self.mean[i]);
            }
        }
    }

    /// `(x − mean) / sqrt(var + 1e-8)` clamped to `±clip`.
    pub fn apply(&self, batch: &DMatrix<f64>) -> DMatrix<f64> {
        let scale = self.variance().map(|v| 1.0 / (v + VAR_FLOOR).sqrt());
        let mut out = batch.clone();
        for mut col in out.column_iter_mut() {
            for i in 0..col.len() {
                col[i] = ((col[i] - self.mean[i]) * scale[i]).clamp(-self.clip, self.clip);
            }
        }
        out
    }

    pub fn update_apply(&mut self, batch: &DMatrix<f64>) -> DMatrix<f64> {
        self.update(batch);
        self.apply(batch)
    }
}
