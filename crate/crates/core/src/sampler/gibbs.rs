//! Conjugate conditional updates for g, Λ, σ² and β.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::model::PriorHyper;

/// Draw from a gamma distribution with the given shape and unit scale.
fn unit_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    Gamma::new(shape, 1.0).expect("positive gamma shape").sample(rng)
}

/// Inverse gamma with shape `a` and scale `b`.
pub fn draw_inv_gamma<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    b / unit_gamma(rng, a)
}

/// Logarithm of a gamma(shape, rate) draw, exact even for shapes so small
/// that the draw itself underflows.
pub fn draw_ln_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    if shape >= 1.0 {
        unit_gamma(rng, shape).ln() - rate.ln()
    } else {
        // Ga(a) = Ga(a + 1) · U^{1/a}
        let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        unit_gamma(rng, shape + 1.0).ln() + u.ln() / shape - rate.ln()
    }
}

/// g | β, σ² ~ IG(a_g + k/2, b_g + βᵀXᵀXβ / (2σ²)), zero prior mean.
pub fn gibbs_update_g<R: Rng + ?Sized>(
    rng: &mut R,
    beta: &[f64],
    gram: &SpdFactor,
    sigma2: f64,
    hyper: &PriorHyper,
) -> f64 {
    let k = beta.len() as f64;
    let q = gram.quad_form(beta);
    draw_inv_gamma(rng, hyper.a_g + 0.5 * k, hyper.b_g + q / (2.0 * sigma2))
}

/// ln Λ with Λ | k_P ~ Ga(a_Λ + k_P, b_Λ + 1).
pub fn gibbs_update_ln_lambda<R: Rng + ?Sized>(rng: &mut R, k_p: usize, hyper: &PriorHyper) -> f64 {
    draw_ln_gamma(rng, hyper.a_lambda + k_p as f64, hyper.b_lambda + 1.0)
}

pub fn gibbs_update_lambda<R: Rng + ?Sized>(rng: &mut R, k_p: usize, hyper: &PriorHyper) -> f64 {
    gibbs_update_ln_lambda(rng, k_p, hyper).exp()
}

/// σ² ~ IG(N/2, b̃).
pub fn gibbs_update_sigma2<R: Rng + ?Sized>(rng: &mut R, n: usize, b_tilde: f64) -> Result<f64> {
    if !(b_tilde > 0.0) || !b_tilde.is_finite() {
        return Err(Error::DegenerateFit(b_tilde));
    }
    Ok(draw_inv_gamma(rng, 0.5 * n as f64, b_tilde))
}

/// A coefficient draw and whether it respects the non-negativity constraint.
#[derive(Clone, Debug)]
pub struct BetaDraw {
    pub beta: Vec<f64>,
    pub feasible: bool,
}

/// β ~ N(g/(g+1) β̂, g/(g+1) σ² (XᵀX)⁻¹); entries in `constrained` must be
/// non-negative, otherwise the caller restarts the iteration.
pub fn gibbs_update_beta<R: Rng + ?Sized>(
    rng: &mut R,
    beta_hat: &[f64],
    gram: &SpdFactor,
    g: f64,
    sigma2: f64,
    constrained: Range<usize>,
) -> BetaDraw {
    let shrink = g / (g + 1.0);
    let scale = (shrink * sigma2).sqrt();
    let eps: Vec<f64> = (0..beta_hat.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    // Lᵀ v = ε gives cov(v) = (L Lᵀ)⁻¹
    let v = gram.backward(&eps);
    let beta: Vec<f64> = beta_hat.iter().zip(&v).map(|(b, e)| shrink * b + scale * e).collect();
    let feasible = beta[constrained].iter().all(|&b| b >= 0.0);
    BetaDraw { beta, feasible }
}
