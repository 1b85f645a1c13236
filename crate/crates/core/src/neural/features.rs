use nalgebra::DMatrix;

/// Replaces each angular input coordinate `x` by `(cos x, sin x)`; other
/// coordinates pass through in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AngleFeatures {
    pub angular: Vec<bool>,
}

impl AngleFeatures {
    pub fn new(angular: Vec<bool>) -> Self {
        Self { angular }
    }

    pub fn input_dim(&self) -> usize {
        self.angular.len()
    }

    pub fn output_dim(&self) -> usize {
        self.angular.iter().map(|&a| if a { 2 } else { 1 }).sum()
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.input_dim(), "feature input dimension");
        let mut out = DMatrix::zeros(self.output_dim(), x.ncols());
        for j in 0..x.ncols() {
            let mut r = 0;
            for (i, &ang) in self.angular.iter().enumerate() {
                let v = x[(i, j)];
                if ang {
                    out[(r, j)] = v.cos();
                    out[(r + 1, j)] = v.sin();
                    r += 2;
                } else {
                    out[(r, j)] = v;
                    r += 1;
                }
            }
        }
        out
    }
}
