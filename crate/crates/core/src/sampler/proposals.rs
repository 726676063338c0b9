//! Proposal generators for the five move types, acting on peak lists kept
//! sorted by location.

use rand::Rng;
use rand_distr::StandardNormal;

use super::gibbs::draw_inv_gamma;
use super::ratios::{
    ln_accept_birth, ln_accept_death, ln_accept_merge, ln_accept_split, ln_accept_within, merge_map,
    split_map, RatioContext,
};
use super::schedule::MoveKind;
use crate::model::PriorHyper;
use crate::spectral::PeakParams;

/// What a proposal needs, besides the two b̃ values, to score itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RatioTerms {
    Within { old: PeakParams, new: PeakParams },
    Birth { k_new: usize, born: PeakParams },
    Death { k_old: usize, killed: PeakParams },
    Split { k_new: usize, parent: PeakParams, plus: PeakParams, minus: PeakParams },
    Merge { k_old: usize, merged: PeakParams, plus: PeakParams, minus: PeakParams },
    /// Infeasible at this state, or discarded to keep the move pair reversible.
    Rejected,
}

impl RatioTerms {
    pub fn ln_accept(&self, ctx: &RatioContext, b_old: f64, b_new: f64) -> f64 {
        match self {
            RatioTerms::Within { old, new } => ln_accept_within(ctx, b_old, b_new, old, new),
            RatioTerms::Birth { k_new, born } => ln_accept_birth(ctx, b_old, b_new, *k_new, born),
            RatioTerms::Death { k_old, killed } => ln_accept_death(ctx, b_old, b_new, *k_old, killed),
            RatioTerms::Split { k_new, parent, plus, minus } => {
                ln_accept_split(ctx, b_old, b_new, *k_new, parent, plus, minus)
            }
            RatioTerms::Merge { k_old, merged, plus, minus } => {
                ln_accept_merge(ctx, b_old, b_new, *k_old, merged, plus, minus)
            }
            RatioTerms::Rejected => f64::NEG_INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub kind: MoveKind,
    /// Proposed configuration, sorted by location; empty when rejected outright.
    pub peaks: Vec<PeakParams>,
    pub terms: RatioTerms,
}

impl Proposal {
    fn rejected(kind: MoveKind) -> Self {
        Self { kind, peaks: Vec::new(), terms: RatioTerms::Rejected }
    }
}

/// Tunables of the proposal distributions.
#[derive(Clone, Copy, Debug)]
pub struct ProposalScales {
    pub within: [f64; 3],
    pub delta_l: f64,
    pub delta_w: f64,
}

pub fn insert_sorted(peaks: &mut Vec<PeakParams>, p: PeakParams) {
    let at = peaks.partition_point(|q| q.location < p.location);
    peaks.insert(at, p);
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    // a few reflections suffice for any step smaller than the interval
    for _ in 0..64 {
        if x < lo {
            x = 2.0 * lo - x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
    x.clamp(lo, hi)
}

/// Symmetric random walk on one uniformly chosen peak.
pub fn propose_within<R: Rng + ?Sized>(
    peaks: &[PeakParams],
    rng: &mut R,
    hyper: &PriorHyper,
    scales: &ProposalScales,
) -> Proposal {
    if peaks.is_empty() {
        return Proposal::rejected(MoveKind::Within);
    }
    let j = rng.gen_range(0..peaks.len());
    let old = peaks[j];
    let [sl, sw, sr] = scales.within;
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    let n3: f64 = rng.sample(StandardNormal);
    let new = PeakParams::new(
        old.location + sl * n1,
        old.width + sw * n2,
        reflect(old.weight + sr * n3, hyper.rho_min, hyper.rho_max),
    );
    let terms = RatioTerms::Within { old, new };
    if !hyper.in_support(&new) {
        return Proposal { kind: MoveKind::Within, peaks: Vec::new(), terms };
    }
    let mut next = peaks.to_vec();
    next.remove(j);
    insert_sorted(&mut next, new);
    Proposal { kind: MoveKind::Within, peaks: next, terms }
}

/// New peak with location and weight uniform over their supports and a width
/// drawn from the sampling distribution.
pub fn propose_birth<R: Rng + ?Sized>(peaks: &[PeakParams], rng: &mut R, hyper: &PriorHyper) -> Proposal {
    if peaks.len() >= hyper.k_max {
        return Proposal::rejected(MoveKind::Birth);
    }
    let born = PeakParams::new(
        rng.gen_range(hyper.l_min..=hyper.l_max),
        draw_inv_gamma(rng, hyper.sampling.shape, hyper.sampling.scale),
        rng.gen_range(hyper.rho_min..=hyper.rho_max),
    );
    let mut next = peaks.to_vec();
    insert_sorted(&mut next, born);
    Proposal { kind: MoveKind::Birth, peaks: next, terms: RatioTerms::Birth { k_new: peaks.len() + 1, born } }
}

/// Remove a uniformly chosen peak.
pub fn propose_death<R: Rng + ?Sized>(peaks: &[PeakParams], rng: &mut R) -> Proposal {
    if peaks.is_empty() {
        return Proposal::rejected(MoveKind::Death);
    }
    let j = rng.gen_range(0..peaks.len());
    let mut next = peaks.to_vec();
    let killed = next.remove(j);
    Proposal { kind: MoveKind::Death, peaks: next, terms: RatioTerms::Death { k_old: peaks.len(), killed } }
}

/// Split a uniformly chosen peak into two neighbours.
pub fn propose_split<R: Rng + ?Sized>(
    peaks: &[PeakParams],
    rng: &mut R,
    hyper: &PriorHyper,
    scales: &ProposalScales,
) -> Proposal {
    if peaks.is_empty() || peaks.len() >= hyper.k_max {
        return Proposal::rejected(MoveKind::Split);
    }
    let j = rng.gen_range(0..peaks.len());
    let parent = peaks[j];
    let u_l: f64 = rng.gen();
    let u_w: f64 = rng.gen_range(-1.0..1.0);
    let [lp, lm, wp, wm] = split_map(parent.location, parent.width, u_l, u_w, scales.delta_l, scales.delta_w);
    let plus = PeakParams::new(lp, wp, rng.gen_range(hyper.rho_min..=hyper.rho_max));
    let minus = PeakParams::new(lm, wm, rng.gen_range(hyper.rho_min..=hyper.rho_max));
    if !(wm > 0.0) || !(wp > 0.0) {
        return Proposal::rejected(MoveKind::Split);
    }
    // children must end up adjacent, or the merge could not undo the split
    let crowded = peaks
        .iter()
        .enumerate()
        .any(|(m, q)| m != j && q.location >= lm && q.location <= lp);
    if crowded {
        return Proposal::rejected(MoveKind::Split);
    }
    let mut next = peaks.to_vec();
    next.remove(j);
    insert_sorted(&mut next, minus);
    insert_sorted(&mut next, plus);
    Proposal {
        kind: MoveKind::Split,
        peaks: next,
        terms: RatioTerms::Split { k_new: peaks.len() + 1, parent, plus, minus },
    }
}

/// Merge a uniformly chosen pair of location-adjacent peaks.
pub fn propose_merge<R: Rng + ?Sized>(
    peaks: &[PeakParams],
    rng: &mut R,
    hyper: &PriorHyper,
    scales: &ProposalScales,
) -> Proposal {
    if peaks.len() < 2 {
        return Proposal::rejected(MoveKind::Merge);
    }
    let j = rng.gen_range(0..peaks.len() - 1);
    let (minus, plus) = (peaks[j], peaks[j + 1]);
    let [l, w, _, u_w] = merge_map(plus.location, minus.location, plus.width, minus.width, scales.delta_l, scales.delta_w);
    let rho = rng.gen_range(hyper.rho_min..=hyper.rho_max);
    // the pair must be reachable by a split
    if plus.location - minus.location > 2.0 * scales.delta_l || u_w.abs() > 1.0 {
        return Proposal::rejected(MoveKind::Merge);
    }
    let merged = PeakParams::new(l, w, rho);
    let mut next = peaks.to_vec();
    next.remove(j + 1);
    next[j] = merged;
    Proposal {
        kind: MoveKind::Merge,
        peaks: next,
        terms: RatioTerms::Merge { k_old: peaks.len(), merged, plus, minus },
    }
}

/// Dispatch on the move type.
pub fn propose<R: Rng + ?Sized>(
    kind: MoveKind,
    peaks: &[PeakParams],
    rng: &mut R,
    hyper: &PriorHyper,
    scales: &ProposalScales,
) -> Proposal {
    match kind {
        MoveKind::Within => propose_within(peaks, rng, hyper, scales),
        MoveKind::Birth => propose_birth(peaks, rng, hyper),
        MoveKind::Death => propose_death(peaks, rng),
        MoveKind::Split => propose_split(peaks, rng, hyper, scales),
        MoveKind::Merge => propose_merge(peaks, rng, hyper, scales),
    }
}
