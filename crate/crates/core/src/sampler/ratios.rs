//! Log acceptance ratios of the five move types.
//!
//! Every function takes the b̃ values of the current and proposed
//! configurations; the likelihood enters only through their ratio and the
//! (g+1)^{∓1/2} factor of a dimension change.

use crate::model::{ln_inv_gamma_pdf, PriorHyper};
use crate::spectral::PeakParams;

/// Scalars shared by all ratios at one iteration.
#[derive(Clone, Copy, Debug)]
pub struct RatioContext {
    pub n: usize,
    /// ln(g + 1); zero neutralizes the g-prior factor.
    pub ln_g1: f64,
    pub ln_lambda: f64,
    pub hyper: PriorHyper,
    pub delta_l: f64,
    pub delta_w: f64,
    pub poisson_count_prior: bool,
    /// Integrate Λ out of the count prior in dimension-changing moves, so a
    /// birth from k peaks carries (a_Λ + k)/(b_Λ + 1) in place of Λ.
    pub marginal_lambda: bool,
}

impl RatioContext {
    fn ln_b_ratio(&self, b_old: f64, b_new: f64) -> f64 {
        if b_old == b_new {
            return 0.0;
        }
        -0.5 * self.n as f64 * (b_new / b_old).ln()
    }

    fn ln_width_prior(&self, w: f64) -> f64 {
        ln_inv_gamma_pdf(w, self.hyper.a_w, self.hyper.b_w)
    }

    /// The 1/k'_P factor that the birth and split ratios carry on top of the
    /// proposal's own selection probabilities.
    fn ln_extra_count(&self, k: usize) -> f64 {
        if self.poisson_count_prior {
            0.0
        } else {
            (k as f64).ln()
        }
    }

    /// ln of the prior rate for a step from `k` to `k + 1` peaks.
    fn ln_rate(&self, k: usize) -> f64 {
        if self.marginal_lambda {
            ((self.hyper.a_lambda + k as f64) / (self.hyper.b_lambda + 1.0)).ln()
        } else {
            self.ln_lambda
        }
    }

    fn ln_jacobian(&self) -> f64 {
        (8.0 * self.delta_l * self.delta_w).ln()
    }
}

pub fn ln_accept_within(ctx: &RatioContext, b_old: f64, b_new: f64, old: &PeakParams, new: &PeakParams) -> f64 {
    if !ctx.hyper.in_support(new) {
        return f64::NEG_INFINITY;
    }
    ctx.ln_b_ratio(b_old, b_new) + ctx.ln_width_prior(new.width) - ctx.ln_width_prior(old.width)
}

/// Birth of `born`, taking the configuration to `k_new` peaks.
pub fn ln_accept_birth(ctx: &RatioContext, b_old: f64, b_new: f64, k_new: usize, born: &PeakParams) -> f64 {
    if !ctx.hyper.in_support(born) || k_new > ctx.hyper.k_max {
        return f64::NEG_INFINITY;
    }
    let lk = (k_new as f64).ln();
    ctx.ln_b_ratio(b_old, b_new) + ctx.ln_rate(k_new - 1) - lk - 0.5 * ctx.ln_g1 + ctx.ln_width_prior(born.width)
        - ctx.ln_extra_count(k_new)
        - ctx.hyper.sampling.ln_pdf(born.width)
}

/// Death of `killed`, out of `k_old` peaks.
pub fn ln_accept_death(ctx: &RatioContext, b_old: f64, b_new: f64, k_old: usize, killed: &PeakParams) -> f64 {
    if k_old == 0 {
        return f64::NEG_INFINITY;
    }
    let lk = (k_old as f64).ln();
    ctx.ln_b_ratio(b_old, b_new) - ctx.ln_rate(k_old - 1) + lk + 0.5 * ctx.ln_g1 - ctx.ln_width_prior(killed.width)
        + ctx.ln_extra_count(k_old)
        + ctx.hyper.sampling.ln_pdf(killed.width)
}

/// Split of `parent` into `plus` (higher location) and `minus`, giving `k_new` peaks.
pub fn ln_accept_split(
    ctx: &RatioContext,
    b_old: f64,
    b_new: f64,
    k_new: usize,
    parent: &PeakParams,
    plus: &PeakParams,
    minus: &PeakParams,
) -> f64 {
    if !ctx.hyper.in_support(plus) || !ctx.hyper.in_support(minus) || k_new > ctx.hyper.k_max {
        return f64::NEG_INFINITY;
    }
    ctx.ln_b_ratio(b_old, b_new) + ctx.ln_rate(k_new - 1) - ctx.ln_extra_count(k_new) - 0.5 * ctx.ln_g1
        - ctx.hyper.delta_l().ln()
        + ctx.ln_width_prior(plus.width)
        + ctx.ln_width_prior(minus.width)
        - ctx.ln_width_prior(parent.width)
        + ctx.ln_jacobian()
}

/// Merge of the adjacent pair (`plus`, `minus`) into `merged`, out of `k_old` peaks.
pub fn ln_accept_merge(
    ctx: &RatioContext,
    b_old: f64,
    b_new: f64,
    k_old: usize,
    merged: &PeakParams,
    plus: &PeakParams,
    minus: &PeakParams,
) -> f64 {
    if k_old < 2 || !ctx.hyper.in_support(merged) {
        return f64::NEG_INFINITY;
    }
    ctx.ln_b_ratio(b_old, b_new) - ctx.ln_rate(k_old - 1) + ctx.ln_extra_count(k_old) + 0.5 * ctx.ln_g1
        + ctx.hyper.delta_l().ln()
        - ctx.ln_width_prior(plus.width)
        - ctx.ln_width_prior(minus.width)
        + ctx.ln_width_prior(merged.width)
        - ctx.ln_jacobian()
}

/// Deterministic part of the split: (l, w, u_l, u_w) ↦ (l⁺, l⁻, w⁺, w⁻).
pub fn split_map(l: f64, w: f64, u_l: f64, u_w: f64, delta_l: f64, delta_w: f64) -> [f64; 4] {
    [l + delta_l * u_l, l - delta_l * u_l, w + delta_w * u_w, w - delta_w * u_w]
}

/// Inverse of [`split_map`]: (l⁺, l⁻, w⁺, w⁻) ↦ (l, w, u_l, u_w).
pub fn merge_map(l_plus: f64, l_minus: f64, w_plus: f64, w_minus: f64, delta_l: f64, delta_w: f64) -> [f64; 4] {
    [
        0.5 * (l_plus + l_minus),
        0.5 * (w_plus + w_minus),
        (l_plus - l_minus) / (2.0 * delta_l),
        (w_plus - w_minus) / (2.0 * delta_w),
    ]
}
