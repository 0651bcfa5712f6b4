//! Small dense-math kernels backing the vision forward path.
//!
//! Everything runs in f64 with a fixed sequential accumulation order, so
//! results are bit-reproducible across platforms and runs. No BLAS, no SIMD
//! dispatch: determinism is the point, throughput is not.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * rhs`, plain triple loop with k-innermost accumulation.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.at(r, k) * rhs.at(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    /// Adds `bias` to every row in place.
    pub fn add_row_bias(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols, "bias length mismatch");
        for row in self.data.chunks_exact_mut(self.cols) {
            for (slot, b) in row.iter_mut().zip(bias) {
                *slot += b;
            }
        }
    }

    pub fn add(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Epsilon inside the layer-norm variance denominator.
pub(crate) const LN_EPS: f64 = 1e-6;

/// Per-row layer normalization with learned scale and shift:
/// `gamma * (x - mean) / sqrt(var + eps) + beta`, biased variance.
pub(crate) fn layer_norm(x: &Mat, gamma: &[f64], beta: &[f64]) -> Mat {
    assert_eq!(gamma.len(), x.cols);
    assert_eq!(beta.len(), x.cols);
    let mut out = Mat::zeros(x.rows, x.cols);
    let n = x.cols as f64;
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        for c in 0..x.cols {
            out.set(r, c, gamma[c] * (row[c] - mean) * inv + beta[c]);
        }
    }
    out
}

const GELU_A: f64 = 0.044715;

fn gelu_c() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

/// Tanh-approximation GELU: `0.5 x (1 + tanh(c (x + a x^3)))`.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (gelu_c() * (x + GELU_A * x * x * x)).tanh())
}

/// Derivative of [`gelu`]. With `u = c (x + a x^3)` and `t = tanh(u)`:
/// `0.5 (1 + t) + 0.5 x (1 - t^2) c (1 + 3 a x^2)`.
pub(crate) fn gelu_prime(x: f64) -> f64 {
    let c = gelu_c();
    let u = c * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * GELU_A * x * x)
}

/// Numerically stable row-wise softmax in place.
pub(crate) fn softmax_rows(x: &mut Mat) {
    for r in 0..x.rows {
        let row = &mut x.data[r * x.cols..(r + 1) * x.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}
