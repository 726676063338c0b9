use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ChainTrace;
use crate::error::{invalid, Error, Result};
use crate::spectral::PeakParams;

/// Point estimates from a chain: MAP peak count, then posterior means over
/// the retained samples that have exactly that count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub k_hat: usize,
    pub peaks: Vec<PeakParams>,
    pub amplitudes: Vec<f64>,
    pub baseline: Vec<f64>,
    pub c_mix: Option<f64>,
    pub c_mix_sd: Option<f64>,
    pub sigma2_hat: f64,
    pub samples_used: usize,
    /// Post-burn-in histogram of k_P.
    pub k_histogram: BTreeMap<usize, usize>,
}

fn mean(xs: impl Iterator<Item = f64>, m: usize) -> f64 {
    xs.sum::<f64>() / m as f64
}

/// Discard the first `burn_in` fraction of retained states, pick the most
/// frequent k_P (ties go to the smaller count) and average parameters over
/// the states with that count. Peaks are matched across states by their
/// location order.
pub fn select_and_estimate(trace: &ChainTrace, burn_in: f64) -> Result<FitResult> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(invalid("burn-in fraction must lie in [0, 1)"));
    }
    let start = (burn_in * trace.states.len() as f64).floor() as usize;
    let kept = &trace.states[start.min(trace.states.len())..];
    if kept.is_empty() {
        return Err(Error::Empty("no samples after burn-in".into()));
    }
    let mut hist = BTreeMap::new();
    for s in kept {
        *hist.entry(s.k_p()).or_insert(0usize) += 1;
    }
    let (mut k_hat, mut best) = (0, 0);
    for (&k, &c) in &hist {
        if c > best {
            k_hat = k;
            best = c;
        }
    }
    let chosen: Vec<_> = kept.iter().filter(|s| s.k_p() == k_hat).collect();
    let m = chosen.len();
    if m == 0 {
        return Err(Error::Internal("MAP peak count has no samples".into()));
    }
    let peaks = (0..k_hat)
        .map(|j| {
            PeakParams::new(
                mean(chosen.iter().map(|s| s.peaks.peaks()[j].location), m),
                mean(chosen.iter().map(|s| s.peaks.peaks()[j].width), m),
                mean(chosen.iter().map(|s| s.peaks.peaks()[j].weight), m),
            )
        })
        .collect();
    let amplitudes = (0..k_hat).map(|j| mean(chosen.iter().map(|s| s.peaks.amplitudes()[j]), m)).collect();
    let nb = chosen[0].beta_baseline.len();
    let baseline = (0..nb).map(|j| mean(chosen.iter().map(|s| s.beta_baseline[j]), m)).collect();
    let sigma2_hat = mean(chosen.iter().map(|s| s.sigma2), m);
    let (c_mix, c_mix_sd) = if chosen[0].c_mix.is_some() {
        let c: Vec<f64> = chosen.iter().map(|s| s.c_mix.unwrap_or(f64::NAN)).collect();
        let mu = mean(c.iter().copied(), m);
        let var = if m > 1 { c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
        (Some(mu), Some(var.sqrt()))
    } else {
        (None, None)
    };
    Ok(FitResult {
        k_hat,
        peaks,
        amplitudes,
        baseline,
        c_mix,
        c_mix_sd,
        sigma2_hat,
        samples_used: m,
        k_histogram: hist,
    })
}
