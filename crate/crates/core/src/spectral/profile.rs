use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

/// Gaussian term is skipped beyond this many widths from the centre; it has
/// long underflowed to zero by then.
const GAUSS_CUTOFF_WIDTHS: f64 = 50.0;

/// Shape of one pseudo-Voigt peak: centre `location` (cm⁻¹), FWHM `width`
/// (cm⁻¹) and Gaussian fraction `weight` in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakParams {
    pub location: f64,
    pub width: f64,
    pub weight: f64,
}

impl PeakParams {
    pub fn new(location: f64, width: f64, weight: f64) -> Self {
        Self { location, width, weight }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(invalid(format!("peak width must be positive, got {}", self.width)));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(invalid(format!("peak weight must lie in [0, 1], got {}", self.weight)));
        }
        if !self.location.is_finite() {
            return Err(invalid("peak location must be finite"));
        }
        Ok(())
    }

    /// Line-shape value at a single wavenumber. Unit height at the centre.
    #[inline]
    pub fn eval(&self, nu: f64) -> f64 {
        let d = nu - self.location;
        let r = d / self.width;
        let lorentz = 1.0 / (1.0 + 4.0 * r * r);
        let gauss = if d.abs() > GAUSS_CUTOFF_WIDTHS * self.width {
            0.0
        } else {
            (-FOUR_LN2 * r * r).exp()
        };
        self.weight * gauss + (1.0 - self.weight) * lorentz
    }
}

/// Evaluate the pseudo-Voigt line shape of `p` on every wavenumber in `nu`.
pub fn pseudo_voigt(nu: &[f64], p: &PeakParams) -> Result<Vec<f64>> {
    p.validate()?;
    let mut out = vec![0.0; nu.len()];
    pseudo_voigt_into(nu, p, &mut out);
    Ok(out)
}

/// Unchecked variant writing into a caller-provided buffer.
#[inline]
pub fn pseudo_voigt_into(nu: &[f64], p: &PeakParams, out: &mut [f64]) {
    debug_assert_eq!(nu.len(), out.len());
    for (o, &v) in out.iter_mut().zip(nu) {
        *o = p.eval(v);
    }
}

/// A variable-size collection of peaks with their amplitudes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    peaks: Vec<PeakParams>,
    amplitudes: Vec<f64>,
}

impl PeakSet {
    pub fn new(peaks: Vec<PeakParams>, amplitudes: Vec<f64>) -> Result<Self> {
        if peaks.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch { expected: peaks.len(), found: amplitudes.len() });
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(invalid("peak amplitudes must be finite"));
        }
        for p in &peaks {
            p.validate()?;
        }
        Ok(Self { peaks, amplitudes })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn peaks(&self) -> &[PeakParams] {
        &self.peaks
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Σ β_j g(ν; θ_j)
    pub fn signal(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; nu.len()];
        for (p, &a) in self.peaks.iter().zip(&self.amplitudes) {
            for (o, &v) in out.iter_mut().zip(nu) {
                *o += a * p.eval(v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_height_at_centre() {
        for &(w, rho) in &[(1.0, 0.0), (7.5, 0.3), (40.0, 1.0)] {
            let p = PeakParams::new(1000.0, w, rho);
            assert_eq!(pseudo_voigt(&[1000.0], &p).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn half_height_at_half_width() {
        for &rho in &[0.0, 0.25, 0.5, 1.0] {
            let p = PeakParams::new(500.0, 12.0, rho);
            let v = pseudo_voigt(&[494.0, 506.0], &p).unwrap();
            assert!((v[0] - 0.5).abs() < 1e-15);
            assert!((v[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_profiles_one_width_out() {
        let g = PeakParams::new(0.0, 2.0, 1.0);
        let l = PeakParams::new(0.0, 2.0, 0.0);
        assert!((pseudo_voigt(&[2.0], &g).unwrap()[0] - 0.0625).abs() < 1e-15);
        assert!((pseudo_voigt(&[2.0], &l).unwrap()[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_width() {
        assert!(pseudo_voigt(&[0.0], &PeakParams::new(0.0, 0.0, 0.5)).is_err());
        assert!(pseudo_voigt(&[0.0], &PeakParams::new(0.0, -1.0, 0.5)).is_err());
        assert!(pseudo_voigt(&[0.0], &PeakParams::new(0.0, 1.0, 1.5)).is_err());
    }

    #[test]
    fn lorentz_tail_kept_beyond_cutoff() {
        let p = PeakParams::new(0.0, 1.0, 0.5);
        let v = p.eval(100.0);
        assert!((v - 0.5 / (1.0 + 4.0 * 1e4)).abs() < 1e-18);
    }

    #[test]
    fn peakset_length_mismatch() {
        assert!(PeakSet::new(vec![PeakParams::new(0.0, 1.0, 0.5)], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_about_centre(l in -500.0..500.0f64, w in 0.1..80.0f64, rho in 0.0..=1.0f64, d in 0.0..300.0f64) {
            let p = PeakParams::new(l, w, rho);
            prop_assert!((p.eval(l + d) - p.eval(l - d)).abs() < 1e-12);
        }

        #[test]
        fn fwhm_independent_of_weight(w in 0.1..80.0f64, rho in 0.0..=1.0f64) {
            let p = PeakParams::new(0.0, w, rho);
            prop_assert!((p.eval(w / 2.0) - 0.5).abs() < 1e-12);
        }

        #[test]
        fn values_in_unit_interval(d in -1e4..1e4f64, w in 0.1..80.0f64, rho in 0.0..=1.0f64) {
            let v = PeakParams::new(0.0, w, rho).eval(d);
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
