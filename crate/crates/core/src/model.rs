//! Priors, hyperparameters and the marginal quantities (ML coefficients,
//! residue, b̃) that the sampler is built on.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, SpdFactor};
use crate::spectral::{DesignMatrix, PeakParams, Spectrum, WavenumberGrid};

/// Inverse-gamma `(shape, scale)` used to draw peak widths, both for birth
/// proposals and in the simulator.
///
/// The defaults are a stand-in for a fit to surveyed Raman peak widths:
/// mode ≈ 10.9 cm⁻¹, sd ≈ 10.8 cm⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthSampling {
    pub shape: f64,
    pub scale: f64,
}

impl Default for WidthSampling {
    fn default() -> Self {
        Self { shape: 4.5, scale: 60.0 }
    }
}

impl WidthSampling {
    pub fn mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }

    pub fn ln_pdf(&self, w: f64) -> f64 {
        ln_inv_gamma_pdf(w, self.shape, self.scale)
    }
}

/// Every hyperparameter of the model and the sampler. Serialized as JSON;
/// all fields are optional and unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Inverse-gamma prior on g.
    pub a_g: f64,
    pub b_g: f64,
    /// Gamma prior on the Poisson rate Λ.
    pub a_lambda: f64,
    pub b_lambda: f64,
    /// Width prior; derived from `width_sampling` when absent.
    pub a_w: Option<f64>,
    pub b_w: Option<f64>,
    pub width_sampling: WidthSampling,
    /// Variance inflation applied to `width_sampling` to obtain the prior.
    pub width_variance_factor: f64,
    /// Location support; defaults to the data grid.
    pub l_min: Option<f64>,
    pub l_max: Option<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub k_b: usize,
    pub degree: usize,
    pub k_max: usize,

    pub iterations: usize,
    /// Fraction of `iterations` after which trans-dimensional moves stop.
    pub freeze_fraction: f64,
    pub anneal: bool,
    pub burn_in: f64,
    pub thin: usize,
    /// Initial probability of each trans-dimensional move type.
    pub initial_move_prob: f64,
    /// Random-walk scales for (location, width, weight).
    pub within_step: [f64; 3],
    pub split_delta_l: f64,
    pub split_delta_w: f64,
    pub max_restarts: usize,
    /// Drop the second 1/k'_P factor of the birth and split ratios so that,
    /// with a flat likelihood, k_P is exactly Poisson(Λ). Off by default: the
    /// standard ratios target the k_P-peak density over location-sorted
    /// configurations, whose prior marginal on k_P is ∝ Λ^k / (k!)².
    pub poisson_count_prior: bool,
    /// Integrate Λ out of the birth, death, split and merge ratios (Λ is then
    /// drawn from its conditional given the new k_P). With a diffuse gamma
    /// hyperprior the plain Λ-conditional ratios make k_P = 0 practically
    /// absorbing, since Λ | k_P = 0 concentrates near zero.
    pub marginal_lambda: bool,
    /// Hold g at this value instead of Gibbs-sampling it (diagnostics).
    pub fix_g: Option<f64>,
    /// Hold Λ at this value instead of Gibbs-sampling it (diagnostics).
    pub fix_lambda: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            a_g: 1e-3,
            b_g: 1e-3,
            a_lambda: 1e-3,
            b_lambda: 1e-3,
            a_w: None,
            b_w: None,
            width_sampling: WidthSampling::default(),
            width_variance_factor: 4.0,
            l_min: None,
            l_max: None,
            rho_min: 0.0,
            rho_max: 1.0,
            k_b: 4,
            degree: 3,
            k_max: 60,
            iterations: 10_000,
            freeze_fraction: 0.8,
            anneal: true,
            burn_in: 0.5,
            thin: 1,
            initial_move_prob: 0.2,
            within_step: [1.0, 0.5, 0.05],
            split_delta_l: 10.0,
            split_delta_w: 5.0,
            max_restarts: 1000,
            poisson_count_prior: false,
            marginal_lambda: true,
            fix_g: None,
            fix_lambda: None,
        }
    }
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a_g", self.a_g),
            ("b_g", self.b_g),
            ("a_lambda", self.a_lambda),
            ("b_lambda", self.b_lambda),
            ("width_sampling.shape", self.width_sampling.shape),
            ("width_sampling.scale", self.width_sampling.scale),
            ("width_variance_factor", self.width_variance_factor),
            ("split_delta_l", self.split_delta_l),
            ("split_delta_w", self.split_delta_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(a) = self.a_w {
            if !(a > 0.0) {
                return Err(invalid("a_w must be positive"));
            }
        }
        if let Some(b) = self.b_w {
            if !(b > 0.0) {
                return Err(invalid("b_w must be positive"));
            }
        }
        if self.a_w.is_some() != self.b_w.is_some() {
            return Err(invalid("a_w and b_w must be given together"));
        }
        if let (Some(lo), Some(hi)) = (self.l_min, self.l_max) {
            if !(lo < hi) {
                return Err(invalid(format!("l_min ({lo}) must be below l_max ({hi})")));
            }
        }
        if !(self.rho_min >= 0.0 && self.rho_max <= 1.0 && self.rho_min < self.rho_max) {
            return Err(invalid("need 0 <= rho_min < rho_max <= 1"));
        }
        if self.k_b <= self.degree {
            return Err(invalid("k_b must exceed the spline degree"));
        }
        if self.k_max < 1 {
            return Err(invalid("k_max must be at least 1"));
        }
        if self.iterations < 1 || self.thin < 1 {
            return Err(invalid("iterations and thin must be at least 1"));
        }
        if !(self.freeze_fraction > 0.0 && self.freeze_fraction <= 1.0) {
            return Err(invalid("freeze_fraction must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(invalid("burn_in must lie in [0, 1)"));
        }
        if !(self.initial_move_prob > 0.0 && self.initial_move_prob <= 0.25) {
            return Err(invalid("initial_move_prob must lie in (0, 0.25]"));
        }
        if self.within_step.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("within_step scales must be positive"));
        }
        if self.fix_g.is_some_and(|g| !(g > 0.0)) || self.fix_lambda.is_some_and(|l| !(l > 0.0)) {
            return Err(invalid("fixed g and lambda must be positive"));
        }
        Ok(())
    }

    /// Short stable digest of the serialized configuration.
    pub fn hash(&self) -> String {
        crate::io::json_hash(self)
    }

    /// Resolve derived quantities against the data grid.
    pub fn hyper(&self, grid: &WavenumberGrid) -> Result<PriorHyper> {
        self.validate()?;
        let (a_w, b_w) = match (self.a_w, self.b_w) {
            (Some(a), Some(b)) => (a, b),
            _ => scale_inverse_gamma_variance(
                self.width_sampling.shape,
                self.width_sampling.scale,
                self.width_variance_factor,
            )?,
        };
        let l_min = self.l_min.unwrap_or(grid.first());
        let l_max = self.l_max.unwrap_or(grid.last());
        if !(l_min < l_max) {
            return Err(invalid("empty location support"));
        }
        Ok(PriorHyper {
            a_g: self.a_g,
            b_g: self.b_g,
            a_lambda: self.a_lambda,
            b_lambda: self.b_lambda,
            a_w,
            b_w,
            sampling: self.width_sampling,
            l_min,
            l_max,
            rho_min: self.rho_min,
            rho_max: self.rho_max,
            k_max: self.k_max,
        })
    }
}

/// Numeric hyperparameters after resolving defaults against a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorHyper {
    pub a_g: f64,
    pub b_g: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub a_w: f64,
    pub b_w: f64,
    pub sampling: WidthSampling,
    pub l_min: f64,
    pub l_max: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub k_max: usize,
}

impl PriorHyper {
    pub fn delta_l(&self) -> f64 {
        self.l_max - self.l_min
    }

    pub fn delta_rho(&self) -> f64 {
        self.rho_max - self.rho_min
    }

    pub fn in_support(&self, p: &PeakParams) -> bool {
        p.location >= self.l_min
            && p.location <= self.l_max
            && p.weight >= self.rho_min
            && p.weight <= self.rho_max
            && p.width > 0.0
    }

    /// Log prior of one peak's shape parameters.
    pub fn ln_peak_prior(&self, p: &PeakParams) -> f64 {
        if !self.in_support(p) {
            return f64::NEG_INFINITY;
        }
        -self.delta_l().ln() - self.delta_rho().ln() + ln_inv_gamma_pdf(p.width, self.a_w, self.b_w)
    }
}

/// Inverse-gamma log density with shape `a` and scale `b`.
pub fn ln_inv_gamma_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

/// Gamma log density with shape `a` and rate `b`.
pub fn ln_gamma_pdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    a * b.ln() - ln_gamma(a) + (a - 1.0) * x.ln() - b * x
}

pub fn ln_uniform_pdf(x: f64, lo: f64, hi: f64) -> f64 {
    if x >= lo && x <= hi {
        -(hi - lo).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Improper Jeffreys prior p(σ²) ∝ 1/σ².
pub fn ln_jeffreys_variance(s2: f64) -> f64 {
    if s2 > 0.0 {
        -s2.ln()
    } else {
        f64::NEG_INFINITY
    }
}

pub fn ln_width_prior(w: f64, a_w: f64, b_w: f64) -> f64 {
    ln_inv_gamma_pdf(w, a_w, b_w)
}

fn ig_shape_ratio(a: f64) -> f64 {
    (a + 1.0).powi(2) / ((a - 1.0).powi(2) * (a - 2.0))
}

/// Inverse gamma with the same mode as `(shape, scale)` and `factor` times
/// its variance.
pub fn scale_inverse_gamma_variance(shape: f64, scale: f64, factor: f64) -> Result<(f64, f64)> {
    if !(shape > 2.0) {
        return Err(Error::NoFiniteVariance(shape));
    }
    if !(factor > 0.0) || !(scale > 0.0) {
        return Err(invalid("scale and variance factor must be positive"));
    }
    if factor == 1.0 {
        return Ok((shape, scale));
    }
    let mode = scale / (shape + 1.0);
    // variance / mode² depends on the shape only and decreases on (2, ∞)
    let target = factor * ig_shape_ratio(shape);
    let (mut lo, mut hi) = if factor > 1.0 {
        (2.0, shape)
    } else {
        let mut hi = shape * 2.0;
        while ig_shape_ratio(hi) > target {
            hi *= 2.0;
        }
        (shape, hi)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ig_shape_ratio(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok((a, mode * (a + 1.0)))
}

/// The width prior: mode kept, variance inflated fourfold.
pub fn weaken_width_prior(alpha_s: f64, beta_s: f64) -> Result<(f64, f64)> {
    scale_inverse_gamma_variance(alpha_s, beta_s, 4.0)
}

/// Quantities of the regression `y ≈ Xβ` that the collapsed sampler needs.
#[derive(Clone, Debug)]
pub struct MarginalStats {
    pub beta_hat: Vec<f64>,
    /// ‖y − Xβ̂‖²
    pub s2: f64,
    pub b_tilde: f64,
    /// ½ log |(g+1) I_k|
    pub logdet_term: f64,
    pub gram: SpdFactor,
}

/// ML fit and b̃ = s²/2 + (β̂−β₀)ᵀXᵀX(β̂−β₀) / (2(g+1)).
pub fn marginal_stats(y: &[f64], x: &DesignMatrix, g: f64, beta0: &[f64]) -> Result<MarginalStats> {
    let m = x.matrix();
    let (n, k) = (m.nrows(), m.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if beta0.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: beta0.len() });
    }
    let mut gram = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    for i in 0..k {
        let ci = m.column(i);
        xty[i] = dot(ci.as_slice(), y);
        for j in 0..=i {
            let v = dot(ci.as_slice(), m.column(j).as_slice());
            gram[i * k + j] = v;
            gram[j * k + i] = v;
        }
    }
    let factor = SpdFactor::new(&gram, k)?;
    let beta_hat = factor.solve(&xty);
    let mut s2 = 0.0;
    for r in 0..n {
        let mut fit = 0.0;
        for (j, b) in beta_hat.iter().enumerate() {
            fit += m[(r, j)] * b;
        }
        s2 += (y[r] - fit).powi(2);
    }
    let diff: Vec<f64> = beta_hat.iter().zip(beta0).map(|(a, b)| a - b).collect();
    let b_tilde = 0.5 * s2 + factor.quad_form(&diff) / (2.0 * (g + 1.0));
    Ok(MarginalStats {
        beta_hat,
        s2,
        b_tilde,
        logdet_term: 0.5 * k as f64 * (g + 1.0).ln(),
        gram: factor,
    })
}

/// Log of the collapsed conditional p(θ, k_P | Λ, g, y) up to a constant,
/// given b̃ for the configuration. `k_total` counts every design column.
pub fn log_conditional_from_parts(
    peaks: &[PeakParams],
    k_total: usize,
    n: usize,
    b_tilde: f64,
    lambda: f64,
    g: f64,
    hyper: &PriorHyper,
) -> f64 {
    let k_p = peaks.len();
    let mut lp = -0.5 * n as f64 * b_tilde.ln() - 0.5 * k_total as f64 * (g + 1.0).ln();
    if k_p > 0 {
        lp += k_p as f64 * lambda.ln() - ln_gamma(k_p as f64 + 1.0);
    }
    for p in peaks {
        lp += hyper.ln_peak_prior(p);
        if lp == f64::NEG_INFINITY {
            break;
        }
    }
    lp
}

/// Log of the collapsed conditional for `peaks` with design `x` built from them.
pub fn log_conditional_theta(
    y: &Spectrum,
    x: &DesignMatrix,
    peaks: &[PeakParams],
    lambda: f64,
    g: f64,
    hyper: &PriorHyper,
) -> Result<f64> {
    if x.peak_count() != peaks.len() {
        return Err(Error::DimensionMismatch { expected: x.peak_count(), found: peaks.len() });
    }
    if peaks.iter().any(|p| !hyper.in_support(p)) {
        return Ok(f64::NEG_INFINITY);
    }
    let zeros = vec![0.0; x.ncols()];
    let stats = marginal_stats(y.intensity(), x, g, &zeros)?;
    Ok(log_conditional_from_parts(peaks, x.ncols(), y.len(), stats.b_tilde, lambda, g, hyper))
}
