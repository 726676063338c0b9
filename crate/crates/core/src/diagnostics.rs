//! Self-checks of the sampler against closed forms and brute-force oracles.
//!
//! Each check returns its raw statistics; the caller decides the tolerance.
//! They back both the test suite and the acceptance report.

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF, InverseGamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::model::{log_conditional_theta, ModelConfig, PriorHyper, WidthSampling};
use crate::sampler::{
    gibbs_update_beta, gibbs_update_g, gibbs_update_lambda, gibbs_update_sigma2, insert_sorted, propose_birth,
    propose_death, propose_merge, propose_split, run_chain, run_prior_chain, split_map, ProposalScales, RatioContext,
    RatioTerms,
};
use crate::spectral::{assemble_design, PeakParams, SplineBasis, Spectrum, WavenumberGrid};

/// Empirical moment against its closed form.
#[derive(Clone, Debug)]
pub struct MomentCheck {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    /// Monte-Carlo standard error of `observed`.
    pub se: f64,
}

impl MomentCheck {
    pub fn z(&self) -> f64 {
        (self.observed - self.expected) / self.se
    }
}

struct Moments {
    mean: f64,
    var: f64,
    se_mean: f64,
    se_var: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d2 = (x - mean).powi(2);
        m2 += d2;
        m4 += d2 * d2;
    }
    let var = m2 / (n - 1.0);
    let m4 = m4 / n;
    Moments { mean, var, se_mean: (var / n).sqrt(), se_var: ((m4 - var * var).max(0.0) / n).sqrt() }
}

fn push_checks(out: &mut Vec<MomentCheck>, name: &str, xs: &[f64], mean: f64, var: f64) {
    let m = moments(xs);
    out.push(MomentCheck { name: format!("{name} mean"), expected: mean, observed: m.mean, se: m.se_mean });
    out.push(MomentCheck { name: format!("{name} variance"), expected: var, observed: m.var, se: m.se_var });
}

fn random_spd<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let a: Vec<f64> = (0..k * k).map(|_| rng.sample(StandardNormal)).collect();
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            m[i * k + j] = (0..k).map(|r| a[r * k + i] * a[r * k + j]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
        }
    }
    m
}

/// Draw each conjugate conditional (g, Λ, σ², β) `draws` times at a fixed
/// random state and compare mean and variance with the closed forms.
pub fn gibbs_moment_checks(draws: usize, seed: u64) -> Result<Vec<MomentCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hyper = ModelConfig::default().hyper(&WavenumberGrid::uniform(0.0, 1.0, 2)?)?;
    let mut out = Vec::new();

    // g: shape a_g + k/2 > 4 keeps the variance estimate's error finite
    let k = 12;
    let gram = SpdFactor::new(&random_spd(&mut rng, k), k)?;
    let beta: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let sigma2 = 0.7;
    let a = hyper.a_g + 0.5 * k as f64;
    let b = hyper.b_g + gram.quad_form(&beta) / (2.0 * sigma2);
    let xs: Vec<f64> = (0..draws).map(|_| gibbs_update_g(&mut rng, &beta, &gram, sigma2, &hyper)).collect();
    push_checks(&mut out, "g", &xs, b / (a - 1.0), b * b / ((a - 1.0).powi(2) * (a - 2.0)));

    let k_p = 5;
    let (shape, rate) = (hyper.a_lambda + k_p as f64, hyper.b_lambda + 1.0);
    let xs: Vec<f64> = (0..draws).map(|_| gibbs_update_lambda(&mut rng, k_p, &hyper)).collect();
    push_checks(&mut out, "lambda", &xs, shape / rate, shape / (rate * rate));

    let (n, b_tilde) = (300, 41.5);
    let a = 0.5 * n as f64;
    let xs = (0..draws).map(|_| gibbs_update_sigma2(&mut rng, n, b_tilde)).collect::<Result<Vec<f64>>>()?;
    push_checks(&mut out, "sigma2", &xs, b_tilde / (a - 1.0), b_tilde * b_tilde / ((a - 1.0).powi(2) * (a - 2.0)));

    let k = 4;
    let gram = SpdFactor::new(&random_spd(&mut rng, k), k)?;
    let beta_hat: Vec<f64> = (0..k).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let (g, sigma2) = (25.0, 0.4);
    let shrink = g / (g + 1.0);
    let mut cols = vec![Vec::with_capacity(draws); k];
    for _ in 0..draws {
        let d = gibbs_update_beta(&mut rng, &beta_hat, &gram, g, sigma2, 0..0);
        for (c, v) in cols.iter_mut().zip(d.beta) {
            c.push(v);
        }
    }
    for (j, xs) in cols.iter().enumerate() {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let inv_jj = gram.solve(&e)[j];
        push_checks(&mut out, &format!("beta[{j}]"), xs, shrink * beta_hat[j], shrink * sigma2 * inv_jj);
    }
    Ok(out)
}

/// Largest |A(x→x')·A(x'→x) − 1| seen for one move pair.
#[derive(Clone, Debug)]
pub struct ReversibilityCheck {
    pub pair: &'static str,
    pub trials: usize,
    pub max_error: f64,
}

fn random_context<R: Rng>(rng: &mut R, hyper: &PriorHyper, scales: &ProposalScales) -> RatioContext {
    RatioContext {
        n: rng.gen_range(20..600),
        ln_g1: rng.gen_range(0.0..8.0),
        ln_lambda: rng.gen_range(-3.0..3.0),
        hyper: *hyper,
        delta_l: scales.delta_l,
        delta_w: scales.delta_w,
        poisson_count_prior: rng.gen(),
        marginal_lambda: rng.gen(),
    }
}

fn random_peaks<R: Rng>(rng: &mut R, hyper: &PriorHyper, k: usize) -> Vec<PeakParams> {
    let mut peaks = Vec::with_capacity(k);
    for _ in 0..k {
        let p = PeakParams::new(
            rng.gen_range(hyper.l_min..hyper.l_max),
            rng.gen_range(2.0..40.0),
            rng.gen_range(hyper.rho_min..hyper.rho_max),
        );
        insert_sorted(&mut peaks, p);
    }
    peaks
}

/// Score every trans-dimensional proposal together with the move that undoes
/// it, on random states, contexts and b̃ values. Pairs: birth→death,
/// death→birth, split→merge, merge→split.
pub fn reversibility_checks(trials: usize, seed: u64) -> Result<Vec<ReversibilityCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig::default();
    let hyper = cfg.hyper(&WavenumberGrid::uniform(400.0, 1600.0, 300)?)?;
    // a generous split reach makes merge candidates common
    let scales = ProposalScales { within: cfg.within_step, delta_l: 60.0, delta_w: 5.0 };
    let names = ["birth/death", "death/birth", "split/merge", "merge/split"];
    let mut out: Vec<ReversibilityCheck> =
        names.iter().map(|&pair| ReversibilityCheck { pair, trials: 0, max_error: 0.0 }).collect();
    let mut attempts = 0;
    while out.iter().any(|c| c.trials < trials) {
        attempts += 1;
        if attempts > 1000 * trials.max(1) {
            return Err(Error::Internal("too few valid reversibility trials".into()));
        }
        let ctx = random_context(&mut rng, &hyper, &scales);
        let k = rng.gen_range(0..12);
        let peaks = random_peaks(&mut rng, &hyper, k);
        let which = rng.gen_range(0..4);
        let proposal = match which {
            0 => propose_birth(&peaks, &mut rng, &hyper),
            1 => propose_death(&peaks, &mut rng),
            2 => propose_split(&peaks, &mut rng, &hyper, &scales),
            _ => propose_merge(&peaks, &mut rng, &hyper, &scales),
        };
        let reverse = match proposal.terms {
            RatioTerms::Birth { k_new, born } => RatioTerms::Death { k_old: k_new, killed: born },
            RatioTerms::Death { k_old, killed } => RatioTerms::Birth { k_new: k_old, born: killed },
            RatioTerms::Split { k_new, parent, plus, minus } => {
                RatioTerms::Merge { k_old: k_new, merged: parent, plus, minus }
            }
            RatioTerms::Merge { k_old, merged, plus, minus } => {
                RatioTerms::Split { k_new: k_old, parent: merged, plus, minus }
            }
            _ => continue,
        };
        let b_old = rng.gen_range(1.0..1e3);
        let b_new = b_old * (0.05 * rng.sample::<f64, _>(StandardNormal)).exp();
        let fwd = proposal.terms.ln_accept(&ctx, b_old, b_new);
        let rev = reverse.ln_accept(&ctx, b_new, b_old);
        if !fwd.is_finite() || !rev.is_finite() {
            continue;
        }
        let c = &mut out[which];
        c.trials += 1;
        c.max_error = c.max_error.max(((fwd + rev).exp() - 1.0).abs());
    }
    Ok(out)
}

/// Split map seen as a function of the proposal's two uniform variates
/// (u_l ~ U(0,1), u_w = 2v − 1 with v ~ U(0,1)).
fn split_from_uniforms(x: [f64; 4], delta_l: f64, delta_w: f64) -> [f64; 4] {
    split_map(x[0], x[1], x[2], 2.0 * x[3] - 1.0, delta_l, delta_w)
}

/// |det| of the central-difference Jacobian of the split transform
/// (l, w, u_l, v) ↦ (l⁺, l⁻, w⁺, w⁻).
pub fn split_jacobian_fd(l: f64, w: f64, u_l: f64, v: f64, delta_l: f64, delta_w: f64, h: f64) -> f64 {
    let x = [l, w, u_l, v];
    let mut jac = Matrix4::zeros();
    for c in 0..4 {
        let (mut xp, mut xm) = (x, x);
        xp[c] += h;
        xm[c] -= h;
        let (fp, fm) = (split_from_uniforms(xp, delta_l, delta_w), split_from_uniforms(xm, delta_l, delta_w));
        for r in 0..4 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac.determinant().abs()
}

/// Largest relative deviation of the finite-difference determinant from
/// 8·δ_l·δ_w over random points and step sizes.
pub fn split_jacobian_check(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let (dl, dw) = (rng.gen_range(0.5..50.0), rng.gen_range(0.5..20.0));
        let det = split_jacobian_fd(
            rng.gen_range(400.0..1600.0),
            rng.gen_range(1.0..60.0),
            rng.gen(),
            rng.gen(),
            dl,
            dw,
            1e-3,
        );
        worst = worst.max((det / (8.0 * dl * dw) - 1.0).abs());
    }
    worst
}

/// Posterior of k_P on a small problem: chain frequencies against quadrature.
#[derive(Clone, Debug)]
pub struct TinyOracle {
    pub quadrature: Vec<f64>,
    pub chain: Vec<f64>,
    pub total_variation: f64,
}

/// The tiny instance: 40 points, one true peak, at most two model peaks,
/// g and Λ fixed and the weight ρ pinned to a sliver so the integral is
/// four-dimensional at most.
pub fn tiny_problem(seed: u64) -> Result<(Spectrum, ModelConfig)> {
    let grid = WavenumberGrid::uniform(0.0, 100.0, 40)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = PeakParams::new(45.0, 10.0, 0.5);
    let y: Vec<f64> = grid
        .values()
        .iter()
        .map(|&v| 2.0 + 0.01 * v + 1.2 * truth.eval(v) + 0.5 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let width = WidthSampling { shape: 30.0, scale: 310.0 };
    let cfg = ModelConfig {
        a_w: Some(width.shape),
        b_w: Some(width.scale),
        width_sampling: width,
        rho_min: 0.5,
        rho_max: 0.5 + 1e-6,
        k_max: 2,
        fix_g: Some(40.0),
        fix_lambda: Some(1.0),
        anneal: false,
        burn_in: 0.05,
        within_step: [2.0, 1.0, 1e-7],
        split_delta_l: 15.0,
        split_delta_w: 2.0,
        ..ModelConfig::default()
    };
    Ok((Spectrum::new(grid, y)?, cfg))
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Midpoint-rule posterior of k_P ∈ {0, 1, 2} for [`tiny_problem`],
/// integrating the collapsed conditional over location-sorted configurations.
pub fn tiny_quadrature(y: &Spectrum, cfg: &ModelConfig, n_loc: usize, n_width: usize) -> Result<Vec<f64>> {
    let hyper = cfg.hyper(y.grid())?;
    let basis = SplineBasis::for_window(y.grid().first(), y.grid().last(), cfg.k_b, cfg.degree)?;
    let g = cfg.fix_g.ok_or_else(|| Error::InvalidParameter("tiny oracle needs fixed g".into()))?;
    let lambda = cfg.fix_lambda.ok_or_else(|| Error::InvalidParameter("tiny oracle needs fixed lambda".into()))?;
    let rho = 0.5 * (hyper.rho_min + hyper.rho_max);
    let ln_cell_rho = hyper.delta_rho().ln();
    let dl = hyper.delta_l() / n_loc as f64;
    let locs: Vec<f64> = (0..n_loc).map(|i| hyper.l_min + (i as f64 + 0.5) * dl).collect();
    let (w_lo, w_hi) = (3.0, 25.0);
    let dw = (w_hi - w_lo) / n_width as f64;
    let widths: Vec<f64> = (0..n_width).map(|i| w_lo + (i as f64 + 0.5) * dw).collect();
    let ln_cell = (dl * dw).ln() + ln_cell_rho;
    let score = |peaks: &[PeakParams]| -> Result<f64> {
        let x = assemble_design(y.grid(), peaks, &basis, None)?;
        log_conditional_theta(y, &x, peaks, lambda, g, &hyper)
    };
    let z0 = score(&[])?;
    let singles: Vec<PeakParams> =
        locs.iter().flat_map(|&l| widths.iter().map(move |&w| PeakParams::new(l, w, rho))).collect();
    let mut t1 = Vec::with_capacity(singles.len());
    for p in &singles {
        t1.push(score(&[*p])? + ln_cell);
    }
    let mut t2 = Vec::new();
    for (a, pa) in singles.iter().enumerate() {
        for pb in &singles[a..] {
            if pb.location <= pa.location {
                continue;
            }
            t2.push(score(&[*pa, *pb])? + 2.0 * ln_cell);
        }
    }
    let z = [z0, logsumexp(&t1), logsumexp(&t2)];
    let total = logsumexp(&z);
    Ok(z.iter().map(|v| (v - total).exp()).collect())
}

pub fn tiny_oracle_check(iterations: usize, seed: u64) -> Result<TinyOracle> {
    let (y, mut cfg) = tiny_problem(seed)?;
    cfg.iterations = iterations;
    let quadrature = tiny_quadrature(&y, &cfg, 60, 22)?;
    let trace = run_chain(&y, &cfg, None, seed)?;
    let start = (cfg.burn_in * trace.states.len() as f64) as usize;
    let kept = &trace.states[start..];
    let mut chain = vec![0.0; 3];
    for s in kept {
        chain[s.k_p()] += 1.0 / kept.len() as f64;
    }
    let total_variation = 0.5 * quadrature.iter().zip(&chain).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(TinyOracle { quadrature, chain, total_variation })
}

/// Goodness-of-fit p-values for a likelihood-free chain.
#[derive(Clone, Debug)]
pub struct PriorRecovery {
    pub samples: usize,
    /// Chi-square test of the k_P histogram.
    pub count_p: f64,
    /// Kolmogorov–Smirnov tests of the pooled peak parameters.
    pub location_p: f64,
    pub width_p: f64,
    pub weight_p: f64,
}

impl PriorRecovery {
    pub fn min_p(&self) -> f64 {
        self.count_p.min(self.location_p).min(self.width_p).min(self.weight_p)
    }
}

/// Asymptotic Kolmogorov–Smirnov p-value with Stephens' small-sample correction.
pub fn ks_p_value(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    let t = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    if t < 0.2 {
        return 1.0;
    }
    let p: f64 = (1..=100).map(|j| {
        let j = j as f64;
        2.0 * if j as i64 % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * j * j * t * t).exp()
    }).sum();
    p.clamp(0.0, 1.0)
}

/// Chi-square p-value of `counts` against probabilities `probs`, pooling
/// the tail so every expected count is at least five.
pub fn chi_square_p_value(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let (mut obs, mut exp) = (Vec::new(), Vec::new());
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (c, p) in counts.iter().zip(probs) {
        o_acc += *c as f64;
        e_acc += p * n as f64;
        if e_acc >= 5.0 {
            obs.push(o_acc);
            exp.push(e_acc);
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if let (Some(o), Some(e)) = (obs.last_mut(), exp.last_mut()) {
        *o += o_acc;
        *e += e_acc;
    }
    if obs.len() < 2 {
        return 1.0;
    }
    let stat: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (obs.len() - 1) as f64;
    1.0 - ChiSquared::new(df).expect("positive degrees of freedom").cdf(stat)
}

/// Prior probabilities of k_P = 0..=k_max for the likelihood-free chain.
pub fn prior_count_pmf(lambda: f64, k_max: usize, poisson: bool) -> Vec<f64> {
    let factorial_power = if poisson { 1.0 } else { 2.0 };
    let ln: Vec<f64> =
        (0..=k_max).map(|k| k as f64 * lambda.ln() - factorial_power * ln_gamma(k as f64 + 1.0)).collect();
    let total = logsumexp(&ln);
    ln.iter().map(|v| (v - total).exp()).collect()
}

/// Run the sampler with the likelihood switched off and test the retained
/// configurations (every `thin`-th) against the prior.
pub fn prior_recovery_check(poisson: bool, iterations: usize, thin: usize, seed: u64) -> Result<PriorRecovery> {
    let grid = WavenumberGrid::uniform(400.0, 1600.0, 300)?;
    let lambda = 3.0;
    let cfg = ModelConfig {
        iterations,
        fix_lambda: Some(lambda),
        poisson_count_prior: poisson,
        k_max: 30,
        ..ModelConfig::default()
    };
    let hyper = cfg.hyper(&grid)?;
    let configs = run_prior_chain(&grid, &cfg, seed)?;
    let burn = iterations / 20;
    let kept: Vec<&Vec<PeakParams>> = configs[burn..].iter().step_by(thin).collect();
    let mut counts = vec![0usize; cfg.k_max + 1];
    let (mut locs, mut widths, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    for c in &kept {
        counts[c.len()] += 1;
        for p in c.iter() {
            locs.push(p.location);
            widths.push(p.width);
            weights.push(p.weight);
        }
    }
    let probs = prior_count_pmf(lambda, cfg.k_max, poisson);
    let ig = InverseGamma::new(hyper.a_w, hyper.b_w).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(PriorRecovery {
        samples: kept.len(),
        count_p: chi_square_p_value(&counts, &probs),
        location_p: ks_p_value(locs, |x| (x - hyper.l_min) / hyper.delta_l()),
        width_p: ks_p_value(widths, |x| ig.cdf(x)),
        weight_p: ks_p_value(weights, |x| (x - hyper.rho_min) / hyper.delta_rho()),
    })
}
