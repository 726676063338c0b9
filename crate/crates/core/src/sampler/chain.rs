use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit::{Fit, Problem};
use super::gibbs::{gibbs_update_beta, gibbs_update_g, gibbs_update_ln_lambda, gibbs_update_sigma2};
use super::proposals::{propose, ProposalScales, RatioTerms};
use super::ratios::RatioContext;
use super::schedule::anneal_schedule;
use super::{ChainState, ChainTrace, IterationRecord, MoveKind, MoveStats};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, PriorHyper};
use crate::spectral::{PeakParams, PeakSet, SplineBasis, Spectrum, WavenumberGrid};

fn scales(config: &ModelConfig) -> ProposalScales {
    ProposalScales { within: config.within_step, delta_l: config.split_delta_l, delta_w: config.split_delta_w }
}

fn context(config: &ModelConfig, hyper: &PriorHyper, n: usize, g: f64, ln_lambda: f64) -> RatioContext {
    RatioContext {
        n,
        ln_g1: g.ln_1p(),
        ln_lambda,
        hyper: *hyper,
        delta_l: config.split_delta_l,
        delta_w: config.split_delta_w,
        poisson_count_prior: config.poisson_count_prior,
        marginal_lambda: config.marginal_lambda && config.fix_lambda.is_none(),
    }
}

fn freeze_iteration(config: &ModelConfig) -> usize {
    (config.freeze_fraction * config.iterations as f64).ceil() as usize
}

/// Run the sampler on `y`. With `target` the chain is the mixture stage: the
/// target signal becomes a fixed, unconstrained design column and the peaks
/// model the interferents.
pub fn run_chain(y: &Spectrum, config: &ModelConfig, target: Option<&[f64]>, seed: u64) -> Result<ChainTrace> {
    let hyper = config.hyper(y.grid())?;
    let grid = y.grid();
    let basis = SplineBasis::for_window(grid.first(), grid.last(), config.k_b, config.degree)?;
    let problem = Problem::new(y, &basis, target)?;
    let n = problem.n();
    let kf = problem.fixed_count();
    let offset = usize::from(problem.has_target);
    let scales = scales(config);
    let i_freeze = freeze_iteration(config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut fit = Fit::initial(&problem)?;
    let mut g = config.fix_g.unwrap_or(n as f64);
    let mut ln_lambda = config.fix_lambda.map_or(0.0, f64::ln);

    let mut stats = MoveStats::default();
    let retained = config.iterations.div_ceil(config.thin);
    let mut records = Vec::with_capacity(retained);
    let mut states = Vec::with_capacity(retained);

    for i in 0..config.iterations {
        let schedule = anneal_schedule(i, i_freeze, config.initial_move_prob, config.anneal);
        let ctx = context(config, &hyper, n, g, ln_lambda);
        let b_current = fit.b_tilde(g);
        let mut attempts = 0usize;
        loop {
            let kind = schedule.pick(rng.gen());
            let proposal = propose(kind, &fit.peaks, &mut rng, &hyper, &scales);
            let u: f64 = rng.gen();
            let mut candidate = None;
            if proposal.terms != RatioTerms::Rejected && proposal.terms.ln_accept(&ctx, 1.0, 1.0) > f64::NEG_INFINITY {
                match fit.propose(&problem, proposal.peaks) {
                    Ok(next) => {
                        let ln_a = proposal.terms.ln_accept(&ctx, b_current, next.b_tilde(g));
                        if u.ln() < ln_a {
                            candidate = Some(next);
                        }
                    }
                    // a collinear configuration has no marginal likelihood
                    Err(Error::SingularDesign { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            let accepted = candidate.is_some();
            let current = candidate.as_ref().unwrap_or(&fit);

            let sigma2 = gibbs_update_sigma2(&mut rng, n, current.b_tilde(g))?;
            let draw = gibbs_update_beta(&mut rng, &current.beta_hat(), &current.factor, g, sigma2, kf..current.k());
            if !draw.feasible {
                attempts += 1;
                stats.restarts += 1;
                if attempts > config.max_restarts {
                    return Err(Error::StalledChain { iteration: i, restarts: attempts - 1 });
                }
                continue;
            }
            stats.max_restarts_in_iteration = stats.max_restarts_in_iteration.max(attempts);
            stats.proposed[kind.index()] += 1;
            stats.accepted[kind.index()] += u64::from(accepted);

            let new_g = match config.fix_g {
                Some(v) => v,
                None => gibbs_update_g(&mut rng, &draw.beta, &current.factor, sigma2, &hyper),
            };
            let new_ln_lambda = match config.fix_lambda {
                Some(v) => v.ln(),
                None => gibbs_update_ln_lambda(&mut rng, current.peak_count(), &hyper),
            };
            if let Some(next) = candidate {
                fit = next;
            }
            g = new_g;
            ln_lambda = new_ln_lambda;

            if i % config.thin == 0 {
                let beta = draw.beta;
                let peaks = PeakSet::new(fit.peaks.clone(), beta[kf..].to_vec())?;
                let state = ChainState {
                    iteration: i,
                    peaks,
                    beta_baseline: beta[offset..kf].to_vec(),
                    c_mix: problem.has_target.then(|| beta[0]),
                    g,
                    lambda: ln_lambda.exp(),
                    sigma2,
                };
                records.push(IterationRecord {
                    i,
                    k_p: state.k_p(),
                    sigma2,
                    g,
                    lambda: state.lambda,
                    move_kind: kind,
                    accepted,
                    seed,
                });
                states.push(state);
            }
            break;
        }
    }
    log::debug!(
        "chain seed {seed}: final k_P {}, {} restarts, acceptance {:?}",
        fit.peak_count(),
        stats.restarts,
        MoveKind::ALL.map(|k| stats.acceptance_rate(k))
    );
    Ok(ChainTrace { seed, iterations: config.iterations, thin: config.thin, records, states, stats })
}

/// The peak moves alone with the likelihood switched off: b̃ is held
/// constant, the g-prior factor removed and Λ fixed (at `fix_lambda`, default
/// 1). The chain then samples the prior over sorted peak configurations.
/// Returns the configuration after every iteration.
pub fn run_prior_chain(grid: &WavenumberGrid, config: &ModelConfig, seed: u64) -> Result<Vec<Vec<PeakParams>>> {
    let hyper = config.hyper(grid)?;
    let scales = scales(config);
    let mut ctx = context(config, &hyper, grid.len(), 0.0, config.fix_lambda.map_or(0.0, f64::ln));
    ctx.ln_g1 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut peaks: Vec<PeakParams> = Vec::new();
    let mut out = Vec::with_capacity(config.iterations);
    let schedule = anneal_schedule(0, 1, config.initial_move_prob, false);
    for _ in 0..config.iterations {
        let kind = schedule.pick(rng.gen());
        let proposal = propose(kind, &peaks, &mut rng, &hyper, &scales);
        let u: f64 = rng.gen();
        if u.ln() < proposal.terms.ln_accept(&ctx, 1.0, 1.0) {
            peaks = proposal.peaks;
        }
        out.push(peaks.clone());
    }
    Ok(out)
}
