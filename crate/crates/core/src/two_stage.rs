//! The two-stage quantification procedure.
//!
//! Stage one decomposes a pure reference measurement into peaks and rescales
//! the fitted peak signal to unit concentration. Stage two fits each mixture
//! with that signal as a fixed, freely scaled design column, while extra
//! peaks absorb the interferents and the spline absorbs the baseline.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::ModelConfig;
use crate::sampler::{run_chain, select_and_estimate, ChainTrace, FitResult};
use crate::spectral::{PeakParams, PeakSet, SplineBasis, Spectrum, WavenumberGrid};

pub use crate::preprocess::resample_to_grid;

/// Learned target line shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    /// Σ (β̂_j / c_pure)·g(ν; θ̂_j) on `grid`.
    pub unit_signal: Vec<f64>,
    pub grid: WavenumberGrid,
    pub peaks: Vec<PeakParams>,
    pub amplitudes: Vec<f64>,
    pub c_pure: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl TargetModel {
    /// Build from estimated peaks; recomputes the unit signal.
    pub fn from_peaks(grid: WavenumberGrid, peaks: Vec<PeakParams>, amplitudes: Vec<f64>, c_pure: f64) -> Result<Self> {
        if !(c_pure > 0.0 && c_pure.is_finite()) {
            return Err(invalid(format!("reference concentration must be positive, got {c_pure}")));
        }
        let set = PeakSet::new(peaks, amplitudes)?;
        let unit_signal = set.signal(grid.values()).into_iter().map(|v| v / c_pure).collect();
        let (peaks, amplitudes) = (set.peaks().to_vec(), set.amplitudes().to_vec());
        Ok(Self { unit_signal, grid, peaks, amplitudes, c_pure, seed: 0, config_hash: String::new() })
    }

    pub fn k_hat(&self) -> usize {
        self.peaks.len()
    }
}

/// Stage one, also returning the chain and its estimate.
pub fn learn_target_traced(
    reference: &Spectrum,
    c_pure: f64,
    config: &ModelConfig,
    seed: u64,
) -> Result<(TargetModel, ChainTrace, FitResult)> {
    if !(c_pure > 0.0 && c_pure.is_finite()) {
        return Err(invalid(format!("reference concentration must be positive, got {c_pure}")));
    }
    config.validate()?;
    let trace = run_chain(reference, config, None, seed)?;
    let fit = select_and_estimate(&trace, config.burn_in)?;
    let mut model = TargetModel::from_peaks(reference.grid().clone(), fit.peaks.clone(), fit.amplitudes.clone(), c_pure)?;
    model.seed = seed;
    model.config_hash = config.hash();
    Ok((model, trace, fit))
}

pub fn learn_target(reference: &Spectrum, c_pure: f64, config: &ModelConfig, seed: u64) -> Result<TargetModel> {
    learn_target_traced(reference, c_pure, config, seed).map(|(m, _, _)| m)
}

/// Fitted signal split into its three sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub target: Vec<f64>,
    pub interferent: Vec<f64>,
    pub baseline: Vec<f64>,
}

impl Components {
    pub fn total(&self) -> Vec<f64> {
        (0..self.target.len())
            .map(|i| self.target[i] + self.interferent[i] + self.baseline[i])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantResult {
    pub c_mix_hat: f64,
    pub c_mix_sd: f64,
    #[serde(rename = "k_I_hat")]
    pub k_i_hat: usize,
    pub seed: u64,
    pub config_hash: String,
    pub interferent_peaks: Vec<PeakParams>,
    pub interferent_amplitudes: Vec<f64>,
    pub baseline_coefficients: Vec<f64>,
    pub samples_used: usize,
    pub components: Components,
}

/// Stage two, also returning the chain.
pub fn quantify_traced(
    mixture: &Spectrum,
    target: &TargetModel,
    config: &ModelConfig,
    seed: u64,
) -> Result<(QuantResult, ChainTrace)> {
    config.validate()?;
    let y = resample_to_grid(mixture, &target.grid)?;
    let trace = run_chain(&y, config, Some(&target.unit_signal), seed)?;
    let fit = select_and_estimate(&trace, config.burn_in)?;
    let nu = y.wavenumbers();
    let c = fit.c_mix.unwrap_or(0.0);
    let basis = SplineBasis::for_window(nu[0], nu[nu.len() - 1], config.k_b, config.degree)?;
    let mut baseline = vec![0.0; nu.len()];
    for (col, b) in basis.columns(nu)?.iter().zip(&fit.baseline) {
        for (o, v) in baseline.iter_mut().zip(col) {
            *o += b * v;
        }
    }
    let components = Components {
        target: target.unit_signal.iter().map(|v| c * v).collect(),
        interferent: PeakSet::new(fit.peaks.clone(), fit.amplitudes.clone())?.signal(nu),
        baseline,
    };
    let result = QuantResult {
        c_mix_hat: c,
        c_mix_sd: fit.c_mix_sd.unwrap_or(0.0),
        k_i_hat: fit.k_hat,
        seed,
        config_hash: config.hash(),
        interferent_peaks: fit.peaks,
        interferent_amplitudes: fit.amplitudes,
        baseline_coefficients: fit.baseline,
        samples_used: fit.samples_used,
        components,
    };
    Ok((result, trace))
}

pub fn quantify(mixture: &Spectrum, target: &TargetModel, config: &ModelConfig, seed: u64) -> Result<QuantResult> {
    quantify_traced(mixture, target, config, seed).map(|(r, _)| r)
}
