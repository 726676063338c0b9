use nalgebra::{DMatrix, DVector};

use super::{PeakParams, SplineBasis, WavenumberGrid};
use crate::error::{Error, Result};

/// Regression design `X`: `[target? | peaks | spline]` column blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    columns: DMatrix<f64>,
    peak_count: usize,
    spline_count: usize,
    has_target: bool,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn nrows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.columns.ncols()
    }

    pub fn peak_count(&self) -> usize {
        self.peak_count
    }

    pub fn spline_count(&self) -> usize {
        self.spline_count
    }

    pub fn has_target(&self) -> bool {
        self.has_target
    }

    /// Column index range holding the peak block.
    pub fn peak_columns(&self) -> std::ops::Range<usize> {
        let start = usize::from(self.has_target);
        start..start + self.peak_count
    }

    pub fn spline_columns(&self) -> std::ops::Range<usize> {
        let start = usize::from(self.has_target) + self.peak_count;
        start..start + self.spline_count
    }

    #[cfg(test)]
    pub(crate) fn replace_matrix_for_tests(&mut self, m: DMatrix<f64>) {
        assert_eq!(m.shape(), self.columns.shape());
        self.columns = m;
    }
}

/// Build the design for a peak configuration. With `target` present the
/// unit-concentration target signal becomes column 0 (stage 2 layout).
pub fn assemble_design(
    grid: &WavenumberGrid,
    peaks: &[PeakParams],
    basis: &SplineBasis,
    target: Option<&[f64]>,
) -> Result<DesignMatrix> {
    let nu = grid.values();
    let n = nu.len();
    for p in peaks {
        p.validate()?;
    }
    if let Some(t) = target {
        if t.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: t.len() });
        }
    }
    let spline = basis.columns(nu)?;
    let offset = usize::from(target.is_some());
    let k = offset + peaks.len() + basis.count();
    let mut m = DMatrix::zeros(n, k);
    if let Some(t) = target {
        m.column_mut(0).copy_from_slice(t);
    }
    for (j, p) in peaks.iter().enumerate() {
        let mut col = m.column_mut(offset + j);
        for (i, &v) in nu.iter().enumerate() {
            col[i] = p.eval(v);
        }
    }
    for (j, s) in spline.iter().enumerate() {
        m.column_mut(offset + peaks.len() + j).copy_from_slice(s);
    }
    Ok(DesignMatrix {
        columns: m,
        peak_count: peaks.len(),
        spline_count: basis.count(),
        has_target: target.is_some(),
    })
}

/// X·β
pub fn evaluate_model(design: &DesignMatrix, beta: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != design.ncols() {
        return Err(Error::DimensionMismatch { expected: design.ncols(), found: beta.len() });
    }
    let b = DVector::from_column_slice(beta);
    Ok((design.matrix() * b).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{bspline_basis, pseudo_voigt};
    use rand::{Rng, SeedableRng};

    fn setup() -> (WavenumberGrid, SplineBasis) {
        let g = WavenumberGrid::uniform(400.0, 1600.0, 120).unwrap();
        let b = SplineBasis::for_window(400.0, 1600.0, 4, 3).unwrap();
        (g, b)
    }

    #[test]
    fn no_peaks_is_spline_basis() {
        let (g, b) = setup();
        let d = assemble_design(&g, &[], &b, None).unwrap();
        assert_eq!(d.ncols(), 4);
        assert_eq!(d.matrix(), &bspline_basis(g.values(), &b).unwrap());
    }

    #[test]
    fn first_column_is_peak() {
        let (g, b) = setup();
        let p = PeakParams::new(812.0, 14.0, 0.4);
        let d = assemble_design(&g, &[p], &b, None).unwrap();
        let want = pseudo_voigt(g.values(), &p).unwrap();
        assert_eq!(d.matrix().column(0).as_slice(), want.as_slice());
        assert_eq!(d.ncols(), 5);
    }

    #[test]
    fn stage_two_layout() {
        let (g, b) = setup();
        let target: Vec<f64> = g.values().iter().map(|v| (v / 100.0).sin()).collect();
        let peaks = [PeakParams::new(700.0, 9.0, 0.1), PeakParams::new(1300.0, 20.0, 0.9)];
        let d = assemble_design(&g, &peaks, &b, Some(&target)).unwrap();
        assert_eq!(d.ncols(), peaks.len() + 4 + 1);
        assert_eq!(d.matrix().column(0).as_slice(), target.as_slice());
        assert_eq!(d.peak_columns(), 1..3);
        assert_eq!(d.spline_columns(), 3..7);
    }

    #[test]
    fn evaluate_zero_and_unit() {
        let (g, b) = setup();
        let peaks = [PeakParams::new(900.0, 10.0, 0.5)];
        let d = assemble_design(&g, &peaks, &b, None).unwrap();
        assert!(evaluate_model(&d, &[0.0; 5]).unwrap().iter().all(|&v| v == 0.0));
        let y = evaluate_model(&d, &[0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(y.as_slice(), d.matrix().column(2).as_slice());
        assert!(evaluate_model(&d, &[1.0; 4]).is_err());
    }

    #[test]
    fn evaluate_matches_naive_sum() {
        let (g, b) = setup();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let peaks: Vec<PeakParams> = (0..6)
            .map(|_| PeakParams::new(rng.gen_range(400.0..1600.0), rng.gen_range(3.0..40.0), rng.gen()))
            .collect();
        let d = assemble_design(&g, &peaks, &b, None).unwrap();
        let beta: Vec<f64> = (0..d.ncols()).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let fast = evaluate_model(&d, &beta).unwrap();
        for i in 0..d.nrows() {
            let mut s = 0.0;
            for j in 0..d.ncols() {
                s += d.matrix()[(i, j)] * beta[j];
            }
            assert!((fast[i] - s).abs() < 1e-12);
        }
    }

    #[test]
    fn target_length_checked() {
        let (g, b) = setup();
        assert!(assemble_design(&g, &[], &b, Some(&[1.0, 2.0])).is_err());
    }
}
