use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform B-spline basis of a given degree.
///
/// `knots.len() == count + degree + 1`. The basis is a partition of unity only
/// on `[knots[degree], knots[count]]`, so evaluation is restricted to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    degree: usize,
    knots: Vec<f64>,
    count: usize,
}

impl SplineBasis {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if knots.len() < degree + 2 {
            return Err(invalid(format!(
                "{} knots cannot support a degree-{degree} basis",
                knots.len()
            )));
        }
        if knots.iter().any(|t| !t.is_finite()) || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("knots must be finite and strictly increasing"));
        }
        let h0 = knots[1] - knots[0];
        if knots.windows(2).any(|w| ((w[1] - w[0]) - h0).abs() > 1e-9 * h0) {
            return Err(invalid("knots must be equally spaced"));
        }
        let count = knots.len() - degree - 1;
        Ok(Self { degree, knots, count })
    }

    /// Basis whose covered interval is exactly `[lo, hi]`, split into
    /// `count - degree` equal knot intervals. With the defaults (4 cubic
    /// functions) the whole window is the single central interval.
    pub fn for_window(lo: f64, hi: f64, count: usize, degree: usize) -> Result<Self> {
        if count <= degree {
            return Err(invalid(format!("need more basis functions ({count}) than the degree ({degree})")));
        }
        if !(hi > lo) {
            return Err(invalid(format!("empty spline window [{lo}, {hi}]")));
        }
        let inner = count - degree;
        let h = (hi - lo) / inner as f64;
        let mut knots: Vec<f64> = (0..count + degree + 1)
            .map(|j| lo + (j as f64 - degree as f64) * h)
            .collect();
        knots[degree] = lo;
        knots[count] = hi;
        Self::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn covered_interval(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.count])
    }

    /// All basis values at one point, Cox-de Boor triangle computed in place.
    pub fn eval_point(&self, x: f64, out: &mut [f64]) -> Result<()> {
        let (lo, hi) = self.covered_interval();
        if !(x >= lo && x <= hi) {
            return Err(Error::Domain(format!("{x} outside spline interval [{lo}, {hi}]")));
        }
        let t = &self.knots;
        let m = t.len() - 1;
        let mut n = vec![0.0; m];
        if x == hi {
            n[self.count - 1] = 1.0;
        } else {
            for j in 0..m {
                if t[j] <= x && x < t[j + 1] {
                    n[j] = 1.0;
                }
            }
        }
        for p in 1..=self.degree {
            for j in 0..m - p {
                let left = (x - t[j]) / (t[j + p] - t[j]) * n[j];
                let right = (t[j + p + 1] - x) / (t[j + p + 1] - t[j + 1]) * n[j + 1];
                n[j] = left + right;
            }
        }
        out[..self.count].copy_from_slice(&n[..self.count]);
        Ok(())
    }

    /// Basis evaluated on a grid, one `Vec` per basis function.
    pub fn columns(&self, nu: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut cols = vec![vec![0.0; nu.len()]; self.count];
        let mut row = vec![0.0; self.count];
        for (i, &x) in nu.iter().enumerate() {
            self.eval_point(x, &mut row)?;
            for (c, &v) in cols.iter_mut().zip(&row) {
                c[i] = v;
            }
        }
        Ok(cols)
    }
}

/// N×k_B matrix of B-spline values; column j holds B_{d,j;t}(ν).
pub fn bspline_basis(nu: &[f64], basis: &SplineBasis) -> Result<DMatrix<f64>> {
    let cols = basis.columns(nu)?;
    Ok(DMatrix::from_fn(nu.len(), basis.count(), |i, j| cols[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Textbook recursive definition, kept separate from the in-place triangle.
    fn cox_de_boor(t: &[f64], j: usize, p: usize, x: f64, hi: f64, last: usize) -> f64 {
        if p == 0 {
            if x == hi {
                return if j == last { 1.0 } else { 0.0 };
            }
            return if t[j] <= x && x < t[j + 1] { 1.0 } else { 0.0 };
        }
        let a = (x - t[j]) / (t[j + p] - t[j]);
        let b = (t[j + p + 1] - x) / (t[j + p + 1] - t[j + 1]);
        a * cox_de_boor(t, j, p - 1, x, hi, last) + b * cox_de_boor(t, j + 1, p - 1, x, hi, last)
    }

    #[test]
    fn degree_zero_is_indicator() {
        let b = SplineBasis::new(0, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let m = bspline_basis(&[0.5, 1.5, 2.5], &b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[(i, j)], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn linear_hat_at_midpoint() {
        let b = SplineBasis::new(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let m = bspline_basis(&[1.5], &b).unwrap();
        assert!((m[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((m[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cubic_matches_recursive_oracle() {
        let b = SplineBasis::for_window(400.0, 1600.0, 4, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen_range(400.0..=1600.0)).chain([400.0, 1600.0]).collect();
        let m = bspline_basis(&xs, &b).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            for j in 0..4 {
                let want = cox_de_boor(b.knots(), j, 3, x, 1600.0, 3);
                assert!((m[(i, j)] - want).abs() < 1e-12, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn more_functions_match_oracle() {
        let b = SplineBasis::for_window(0.0, 10.0, 7, 3).unwrap();
        assert_eq!(b.knots().len(), 11);
        for k in 0..=100 {
            let x = k as f64 * 0.1;
            let mut row = vec![0.0; 7];
            b.eval_point(x, &mut row).unwrap();
            for j in 0..7 {
                let want = cox_de_boor(b.knots(), j, 3, x, 10.0, 6);
                assert!((row[j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn default_window_layout() {
        let b = SplineBasis::for_window(400.0, 1600.0, 4, 3).unwrap();
        assert_eq!(b.knots().len(), 8);
        assert_eq!(b.covered_interval(), (400.0, 1600.0));
        assert_eq!(b.knots()[0], 400.0 - 3.0 * 1200.0);
    }

    #[test]
    fn outside_interval_is_domain_error() {
        let b = SplineBasis::for_window(400.0, 1600.0, 4, 3).unwrap();
        assert!(matches!(bspline_basis(&[399.0], &b), Err(Error::Domain(_))));
        assert!(matches!(bspline_basis(&[1600.5], &b), Err(Error::Domain(_))));
    }

    #[test]
    fn knots_must_be_uniform() {
        assert!(SplineBasis::new(1, vec![0.0, 1.0, 3.0, 4.0]).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity(x in 400.0..=1600.0f64, count in 4usize..9) {
            let b = SplineBasis::for_window(400.0, 1600.0, count, 3).unwrap();
            let mut row = vec![0.0; count];
            b.eval_point(x, &mut row).unwrap();
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
