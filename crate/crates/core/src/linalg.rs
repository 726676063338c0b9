//! Dense symmetric positive-definite factorization used by the regression
//! and sampler code.

use crate::error::{Error, Result};

/// Relative pivot tolerance: a pivot below `RANK_TOL * max(diag G)` marks the
/// design as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Lower Cholesky factor `G = L Lᵀ`, stored row-major.
#[derive(Clone, Debug, Default)]
pub struct SpdFactor {
    n: usize,
    l: Vec<f64>,
}

impl SpdFactor {
    /// Factor a row-major `n×n` symmetric matrix.
    pub fn new(gram: &[f64], n: usize) -> Result<Self> {
        Self::extend_from(None, 0, gram, n)
    }

    /// Factor `gram`, reusing the first `keep` rows of `prev`. Valid whenever
    /// the leading `keep×keep` blocks of the two matrices coincide, since row
    /// `i` of `L` depends only on the leading `(i+1)×(i+1)` block.
    pub fn extend_from(prev: Option<&SpdFactor>, keep: usize, gram: &[f64], n: usize) -> Result<Self> {
        assert_eq!(gram.len(), n * n, "gram has wrong size");
        let max_diag = (0..n).map(|i| gram[i * n + i]).fold(0.0_f64, f64::max);
        let tol = RANK_TOL * max_diag;
        let mut l = vec![0.0; n * n];
        let keep = match prev {
            Some(p) => keep.min(p.n).min(n),
            None => 0,
        };
        if let Some(p) = prev {
            for i in 0..keep {
                l[i * n..i * n + i + 1].copy_from_slice(&p.l[i * p.n..i * p.n + i + 1]);
                let piv = l[i * n + i] * l[i * n + i];
                if piv <= tol {
                    return Err(Error::SingularDesign { column: i, pivot: piv });
                }
            }
        }
        for i in keep..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let mut s = gram[i * n + j];
                for (a, b) in ri.iter().zip(rj) {
                    s -= a * b;
                }
                if i == j {
                    if !(s > tol) {
                        return Err(Error::SingularDesign { column: i, pivot: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solve `L x = b`, continuing from an already solved prefix of length `keep`.
    pub fn forward_from(&self, b: &[f64], x: &mut Vec<f64>, keep: usize) {
        let n = self.n;
        x.resize(n, 0.0);
        for i in keep.min(n)..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = b[i];
            for (a, xv) in row.iter().zip(x.iter()) {
                s -= a * xv;
            }
            x[i] = s / self.l[i * n + i];
        }
    }

    /// Solve `L x = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.n);
        self.forward_from(b, &mut x, 0);
        x
    }

    /// Solve `Lᵀ x = b`.
    pub fn backward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let xi = x[i] / self.l[i * n + i];
            x[i] = xi;
            for j in 0..i {
                x[j] -= self.l[i * n + j] * xi;
            }
        }
        x
    }

    /// Solve `G x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// `Lᵀ x`
    pub fn upper_mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let xi = x[i];
            for j in 0..=i {
                out[j] += self.l[i * n + j] * xi;
            }
        }
        out
    }

    /// `xᵀ G x = ‖Lᵀ x‖²`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.upper_mul(x).iter().map(|v| v * v).sum()
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * self.n + i].ln()).sum()
    }

    /// Dense `G⁻¹`, row-major. Test and reporting use only.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.solve(&e);
            for r in 0..n {
                inv[r * n + c] = col[r];
            }
        }
        inv
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
