//! Cached least-squares state of one peak configuration.
//!
//! Internally the design columns are ordered `[target? | spline | peaks]`
//! with peaks sorted by location, so a proposal that touches peak `j` only
//! invalidates Cholesky rows from `fixed + j` onwards.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::linalg::{dot, SpdFactor};
use crate::spectral::{PeakParams, SplineBasis, Spectrum};

/// Below this fraction of ‖y‖² the residue is recomputed from the residual
/// vector instead of by subtraction, which would lose all precision.
const CANCELLATION_GUARD: f64 = 1e-6;

/// The data and the columns that every configuration shares.
pub(crate) struct Problem {
    pub y: Vec<f64>,
    pub nu: Vec<f64>,
    pub yty: f64,
    fixed: Vec<Rc<[f64]>>,
    pub has_target: bool,
}

impl Problem {
    pub fn new(y: &Spectrum, basis: &SplineBasis, target: Option<&[f64]>) -> Result<Self> {
        let nu = y.wavenumbers().to_vec();
        let mut fixed: Vec<Rc<[f64]>> = Vec::with_capacity(basis.count() + 1);
        if let Some(t) = target {
            if t.len() != nu.len() {
                return Err(Error::DimensionMismatch { expected: nu.len(), found: t.len() });
            }
            fixed.push(Rc::from(t));
        }
        for col in basis.columns(&nu)? {
            fixed.push(Rc::from(col));
        }
        let yv = y.intensity().to_vec();
        let yty = dot(&yv, &yv);
        Ok(Self { y: yv, nu, yty, fixed, has_target: target.is_some() })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn fixed_count(&self) -> usize {
        self.fixed.len()
    }
}

#[derive(Clone)]
pub(crate) struct Fit {
    pub peaks: Vec<PeakParams>,
    cols: Vec<Rc<[f64]>>,
    gram: Vec<f64>,
    xty: Vec<f64>,
    pub factor: SpdFactor,
    z: Vec<f64>,
    zz: f64,
    pub s2: f64,
}

impl Fit {
    /// Configuration without peaks.
    pub fn initial(problem: &Problem) -> Result<Self> {
        let cols = problem.fixed.clone();
        let k = cols.len();
        let mut gram = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..=a {
                let v = dot(&cols[a], &cols[b]);
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        let xty: Vec<f64> = cols.iter().map(|c| dot(c, &problem.y)).collect();
        let factor = SpdFactor::new(&gram, k)?;
        let z = factor.forward(&xty);
        Ok(Self::finish(problem, Vec::new(), cols, gram, xty, factor, z))
    }

    fn finish(
        problem: &Problem,
        peaks: Vec<PeakParams>,
        cols: Vec<Rc<[f64]>>,
        gram: Vec<f64>,
        xty: Vec<f64>,
        factor: SpdFactor,
        z: Vec<f64>,
    ) -> Self {
        let zz = dot(&z, &z);
        let mut fit = Self { peaks, cols, gram, xty, factor, z, zz, s2: 0.0 };
        let fast = problem.yty - zz;
        fit.s2 = if fast > CANCELLATION_GUARD * problem.yty {
            fast
        } else {
            let beta = fit.beta_hat();
            let mut s2 = 0.0;
            for (r, &yr) in problem.y.iter().enumerate() {
                let mut f = 0.0;
                for (c, b) in fit.cols.iter().zip(&beta) {
                    f += c[r] * b;
                }
                s2 += (yr - f) * (yr - f);
            }
            s2
        };
        fit
    }

    pub fn k(&self) -> usize {
        self.cols.len()
    }

    pub fn peak_count(&self) -> usize {
        self.peaks.len()
    }

    /// b̃ with a zero prior mean: s²/2 + β̂ᵀXᵀXβ̂ / (2(g+1)).
    pub fn b_tilde(&self, g: f64) -> f64 {
        0.5 * self.s2 + self.zz / (2.0 * (g + 1.0))
    }

    /// ML coefficients in internal column order.
    pub fn beta_hat(&self) -> Vec<f64> {
        self.factor.backward(&self.z)
    }

    /// Build the fit for `peaks` (sorted by location), reusing every column,
    /// Gram entry and Cholesky row that the change leaves intact.
    pub fn propose(&self, problem: &Problem, peaks: Vec<PeakParams>) -> Result<Self> {
        let kf = problem.fixed_count();
        let k_old = self.k();
        let k = kf + peaks.len();

        // sources: new column index -> old column index, when unchanged
        let mut src: Vec<Option<usize>> = (0..kf).map(Some).collect();
        let mut i = 0;
        for p in &peaks {
            while i < self.peaks.len() && self.peaks[i].location < p.location {
                i += 1;
            }
            if i < self.peaks.len() && self.peaks[i] == *p {
                src.push(Some(kf + i));
                i += 1;
            } else {
                src.push(None);
            }
        }
        let keep = src.iter().enumerate().take_while(|(j, s)| **s == Some(*j)).count();

        let cols: Vec<Rc<[f64]>> = (0..k)
            .map(|c| match src[c] {
                Some(o) => Rc::clone(&self.cols[o]),
                None => {
                    let p = &peaks[c - kf];
                    problem.nu.iter().map(|&v| p.eval(v)).collect::<Vec<f64>>().into()
                }
            })
            .collect();

        let mut gram = vec![0.0; k * k];
        let mut xty = vec![0.0; k];
        for a in 0..k {
            xty[a] = match src[a] {
                Some(o) => self.xty[o],
                None => dot(&cols[a], &problem.y),
            };
            for b in 0..=a {
                let v = match (src[a], src[b]) {
                    (Some(oa), Some(ob)) => self.gram[oa * k_old + ob],
                    _ => dot(&cols[a], &cols[b]),
                };
                gram[a * k + b] = v;
                gram[b * k + a] = v;
            }
        }
        let factor = SpdFactor::extend_from(Some(&self.factor), keep, &gram, k)?;
        let mut z = self.z[..keep.min(self.z.len())].to_vec();
        factor.forward_from(&xty, &mut z, keep);
        Ok(Self::finish(problem, peaks, cols, gram, xty, factor, z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::marginal_stats;
    use crate::spectral::{assemble_design, WavenumberGrid};
    use rand::{Rng, SeedableRng};

    fn problem(seed: u64) -> (Problem, Spectrum, SplineBasis) {
        let grid = WavenumberGrid::uniform(400.0, 1600.0, 120).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = grid
            .values()
            .iter()
            .map(|v| 10.0 + 30.0 * PeakParams::new(900.0, 15.0, 0.3).eval(*v) + rng.gen_range(-1.0..1.0))
            .collect();
        let s = Spectrum::new(grid, y).unwrap();
        let basis = SplineBasis::for_window(400.0, 1600.0, 4, 3).unwrap();
        (Problem::new(&s, &basis, None).unwrap(), s, basis)
    }

    fn check_against_direct(fit: &Fit, s: &Spectrum, basis: &SplineBasis, g: f64) {
        let d = assemble_design(s.grid(), &fit.peaks, basis, None).unwrap();
        let st = marginal_stats(s.intensity(), &d, g, &vec![0.0; d.ncols()]).unwrap();
        assert!(((fit.s2 - st.s2) / st.s2).abs() < 1e-8, "{} vs {}", fit.s2, st.s2);
        assert!(((fit.b_tilde(g) - st.b_tilde) / st.b_tilde).abs() < 1e-8);
    }

    #[test]
    fn incremental_updates_match_direct_regression() {
        let (pr, s, basis) = problem(1);
        let f0 = Fit::initial(&pr).unwrap();
        check_against_direct(&f0, &s, &basis, 50.0);
        let a = PeakParams::new(700.0, 12.0, 0.5);
        let b = PeakParams::new(905.0, 14.0, 0.2);
        let c = PeakParams::new(1400.0, 30.0, 0.9);
        let f1 = f0.propose(&pr, vec![a, c]).unwrap();
        check_against_direct(&f1, &s, &basis, 50.0);
        let f2 = f1.propose(&pr, vec![a, b, c]).unwrap();
        check_against_direct(&f2, &s, &basis, 3.0);
        let f3 = f2.propose(&pr, vec![a, PeakParams::new(903.0, 15.0, 0.3), c]).unwrap();
        check_against_direct(&f3, &s, &basis, 3.0);
        let f4 = f3.propose(&pr, vec![c]).unwrap();
        check_against_direct(&f4, &s, &basis, 3.0);
        assert!(f2.s2 < f1.s2);
    }

    #[test]
    fn exact_fit_uses_residual_path() {
        let grid = WavenumberGrid::uniform(400.0, 1600.0, 60).unwrap();
        let y: Vec<f64> = grid.values().iter().map(|v| 5.0 + 1e-3 * v - 1e-7 * v * v).collect();
        let s = Spectrum::new(grid, y).unwrap();
        let basis = SplineBasis::for_window(400.0, 1600.0, 4, 3).unwrap();
        let pr = Problem::new(&s, &basis, None).unwrap();
        let f = Fit::initial(&pr).unwrap();
        assert!(f.s2 >= 0.0 && f.s2 < 1e-18 * pr.yty);
    }
}
