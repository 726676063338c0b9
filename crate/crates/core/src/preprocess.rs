//! Cleanup of instrument exports: repeat median, Savitzky-Golay smoothing,
//! windowing and background subtraction, applied in that order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{Spectrum, WavenumberGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub savgol_window: usize,
    pub savgol_order: usize,
    pub window: [f64; 2],
    /// Measured background (e.g. water) subtracted last.
    #[serde(skip)]
    pub background: Option<Spectrum>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { savgol_window: 21, savgol_order: 3, window: [350.0, 1650.0], background: None }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        check_savgol(self.savgol_window, self.savgol_order)?;
        if !(self.window[0] < self.window[1]) {
            return Err(invalid("window must satisfy low < high"));
        }
        Ok(())
    }
}

fn check_savgol(window: usize, order: usize) -> Result<()> {
    if window % 2 == 0 || window <= order {
        return Err(invalid(format!("Savitzky-Golay window {window} must be odd and exceed order {order}")));
    }
    Ok(())
}

fn check_same_grid(spectra: &[Spectrum]) -> Result<&Spectrum> {
    let first = spectra.first().ok_or_else(|| Error::Empty("no spectra given".into()))?;
    if spectra.iter().any(|s| s.grid() != first.grid()) {
        return Err(Error::IncompatibleGrid("all repeats must share one grid".into()));
    }
    Ok(first)
}

/// Pointwise median across repeats; an even count averages the middle pair.
pub fn median_repeats(repeats: &[Spectrum]) -> Result<Spectrum> {
    let first = check_same_grid(repeats)?;
    let r = repeats.len();
    let mut column = vec![0.0; r];
    let out = (0..first.len())
        .map(|i| {
            for (c, s) in column.iter_mut().zip(repeats) {
                *c = s.intensity()[i];
            }
            column.sort_unstable_by(f64::total_cmp);
            if r % 2 == 1 {
                column[r / 2]
            } else {
                0.5 * (column[r / 2 - 1] + column[r / 2])
            }
        })
        .collect();
    first.with_intensity(out)
}

/// Weights that evaluate the least-squares polynomial of degree `order`
/// through `window` equally spaced samples at sample index `at`.
pub fn savgol_weights(window: usize, order: usize, at: usize) -> Result<Vec<f64>> {
    check_savgol(window, order)?;
    if at >= window {
        return Err(invalid("evaluation position outside the window"));
    }
    let h = (window / 2) as f64;
    // abscissae scaled to [-1, 1] for conditioning
    let t = |i: usize| (i as f64 - h) / h;
    let v = DMatrix::from_fn(window, order + 1, |i, j| t(i).powi(j as i32));
    let gram_inv = (v.transpose() * &v)
        .try_inverse()
        .ok_or_else(|| Error::Internal("singular Savitzky-Golay system".into()))?;
    let e = DMatrix::from_fn(1, order + 1, |_, j| t(at).powi(j as i32));
    let w = e * gram_inv * v.transpose();
    Ok(w.iter().copied().collect())
}

/// Smooth with the local polynomial fit. Points within half a window of an
/// edge use the first or last full window evaluated off-center, so
/// polynomials up to `order` pass through unchanged everywhere.
pub fn savitzky_golay(y: &Spectrum, window: usize, order: usize) -> Result<Spectrum> {
    check_savgol(window, order)?;
    let n = y.len();
    if n < window {
        return Err(invalid(format!("spectrum of {n} points is shorter than the window {window}")));
    }
    let h = window / 2;
    let x = y.intensity();
    let apply = |w: &[f64], start: usize| w.iter().zip(&x[start..start + window]).map(|(a, b)| a * b).sum::<f64>();
    let center = savgol_weights(window, order, h)?;
    let mut out = vec![0.0; n];
    for i in h..n - h {
        out[i] = apply(&center, i - h);
    }
    for at in 0..h {
        out[at] = apply(&savgol_weights(window, order, at)?, 0);
        let tail = window - 1 - at;
        out[n - 1 - at] = apply(&savgol_weights(window, order, tail)?, n - window);
    }
    y.with_intensity(out)
}

/// Keep the points with `low <= ν <= high`.
pub fn crop_window(y: &Spectrum, low: f64, high: f64) -> Result<Spectrum> {
    let keep: Vec<usize> = (0..y.len()).filter(|&i| (low..=high).contains(&y.wavenumbers()[i])).collect();
    if keep.len() < 2 {
        return Err(Error::Empty(format!("fewer than two grid points inside [{low}, {high}]")));
    }
    let grid = WavenumberGrid::new(keep.iter().map(|&i| y.wavenumbers()[i]).collect())?;
    Spectrum::new(grid, keep.iter().map(|&i| y.intensity()[i]).collect())
}

/// Linear interpolation onto `grid`, which must lie within the source span.
pub fn resample_to_grid(s: &Spectrum, grid: &WavenumberGrid) -> Result<Spectrum> {
    if s.grid() == grid {
        return Ok(s.clone());
    }
    let xs = s.wavenumbers();
    let ys = s.intensity();
    if grid.first() < xs[0] || grid.last() > xs[xs.len() - 1] {
        return Err(Error::IncompatibleGrid(format!(
            "target grid [{}, {}] extends beyond source [{}, {}]",
            grid.first(),
            grid.last(),
            xs[0],
            xs[xs.len() - 1]
        )));
    }
    let mut j = 0;
    let out = grid
        .values()
        .iter()
        .map(|&x| {
            while j + 2 < xs.len() && xs[j + 1] < x {
                j += 1;
            }
            let t = (x - xs[j]) / (xs[j + 1] - xs[j]);
            if t == 0.0 {
                ys[j]
            } else if t == 1.0 {
                ys[j + 1]
            } else {
                ys[j] + t * (ys[j + 1] - ys[j])
            }
        })
        .collect();
    Spectrum::new(grid.clone(), out)
}

/// y − background, with the background resampled onto y's grid if needed.
pub fn subtract_background(y: &Spectrum, background: &Spectrum) -> Result<Spectrum> {
    let b = resample_to_grid(background, y.grid())?;
    y.with_intensity(y.intensity().iter().zip(b.intensity()).map(|(a, b)| a - b).collect())
}

/// One applied step and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    MedianRepeats { repeats: usize },
    SavitzkyGolay { window: usize, order: usize },
    CropWindow { low: f64, high: f64, points: usize },
    SubtractBackground { source: Option<String> },
}

/// Run the full pipeline (median → smoothing → crop → background) on a stack
/// of repeats and report every step taken.
pub fn preprocess(repeats: &[Spectrum], config: &PreprocessConfig) -> Result<(Spectrum, Vec<Step>)> {
    config.validate()?;
    let mut steps = Vec::with_capacity(4);
    let y = median_repeats(repeats)?;
    steps.push(Step::MedianRepeats { repeats: repeats.len() });
    let y = savitzky_golay(&y, config.savgol_window, config.savgol_order)?;
    steps.push(Step::SavitzkyGolay { window: config.savgol_window, order: config.savgol_order });
    let [low, high] = config.window;
    let mut y = crop_window(&y, low, high)?;
    steps.push(Step::CropWindow { low, high, points: y.len() });
    if let Some(b) = &config.background {
        y = subtract_background(&y, b)?;
        steps.push(Step::SubtractBackground { source: None });
    }
    Ok((y, steps))
}
