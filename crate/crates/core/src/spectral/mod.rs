//! Spectral primitives: wavenumber grids, spectra, peak line shapes, the
//! B-spline baseline basis and design-matrix assembly.

mod design;
mod profile;
mod spline;

pub use design::{assemble_design, evaluate_model, DesignMatrix};
pub use profile::{pseudo_voigt, pseudo_voigt_into, PeakParams, PeakSet};
pub use spline::{bspline_basis, SplineBasis};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Raman shift axis in cm⁻¹. Strictly increasing, at least two points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WavenumberGrid {
    values: Vec<f64>,
}

impl WavenumberGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!("grid needs at least 2 points, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid contains non-finite values"));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(format!("grid not strictly increasing at index {}", i + 1)));
        }
        Ok(Self { values })
    }

    /// `n` equally spaced points from `lo` to `hi` inclusive.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(invalid(format!("uniform grid needs n >= 2 and lo < hi ({lo}, {hi}, {n})")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        values[n - 1] = hi;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.last() - self.first()
    }
}

impl TryFrom<Vec<f64>> for WavenumberGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<WavenumberGrid> for Vec<f64> {
    fn from(grid: WavenumberGrid) -> Self {
        grid.values
    }
}

/// An observed signal on a wavenumber grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    grid: WavenumberGrid,
    intensity: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: WavenumberGrid, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: intensity.len() });
        }
        if intensity.iter().any(|v| !v.is_finite()) {
            return Err(invalid("spectrum contains non-finite intensities"));
        }
        Ok(Self { grid, intensity })
    }

    pub fn grid(&self) -> &WavenumberGrid {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        self.grid.values()
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.intensity.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Same grid, new values.
    pub fn with_intensity(&self, intensity: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), intensity)
    }

    pub fn into_parts(self) -> (WavenumberGrid, Vec<f64>) {
        (self.grid, self.intensity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_non_monotone() {
        assert!(WavenumberGrid::new(vec![1.0, 1.0, 2.0]).is_err());
        assert!(WavenumberGrid::new(vec![1.0]).is_err());
        assert!(WavenumberGrid::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn uniform_grid_hits_endpoints() {
        let g = WavenumberGrid::uniform(400.0, 1600.0, 300).unwrap();
        assert_eq!(g.len(), 300);
        assert_eq!(g.first(), 400.0);
        assert_eq!(g.last(), 1600.0);
    }

    #[test]
    fn spectrum_length_must_match() {
        let g = WavenumberGrid::uniform(0.0, 1.0, 3).unwrap();
        assert!(matches!(
            Spectrum::new(g.clone(), vec![0.0; 2]),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
        assert!(Spectrum::new(g, vec![0.0, f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn grid_serde_validates() {
        let bad: std::result::Result<WavenumberGrid, _> = serde_json::from_str("[2.0, 1.0]");
        assert!(bad.is_err());
        let ok: WavenumberGrid = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(ok.len(), 2);
    }
}
