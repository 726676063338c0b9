//! Hybrid Gibbs / reversible-jump sampler over peak configurations.
//!
//! Each iteration proposes one move (within, birth, death, split or merge)
//! scored on the collapsed posterior of the peak parameters, then refreshes
//! σ², β, g and Λ from their conditionals. An iteration whose amplitude draw
//! has a negative constrained entry is discarded and rerun.

mod chain;
mod estimate;
mod fit;
mod gibbs;
mod proposals;
mod ratios;
mod schedule;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::PeakSet;

pub use chain::{run_chain, run_prior_chain};
pub use estimate::{select_and_estimate, FitResult};
pub use gibbs::{
    draw_inv_gamma, draw_ln_gamma, gibbs_update_beta, gibbs_update_g, gibbs_update_lambda, gibbs_update_ln_lambda,
    gibbs_update_sigma2, BetaDraw,
};
pub use proposals::{
    insert_sorted, propose, propose_birth, propose_death, propose_merge, propose_split, propose_within, Proposal,
    ProposalScales, RatioTerms,
};
pub use ratios::{
    ln_accept_birth, ln_accept_death, ln_accept_merge, ln_accept_split, ln_accept_within, merge_map, split_map,
    RatioContext,
};
pub use schedule::{anneal_schedule, MoveKind, MoveSchedule};

/// Sampler state after a completed iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub iteration: usize,
    /// Peaks sorted by location, with their amplitudes.
    pub peaks: PeakSet,
    pub beta_baseline: Vec<f64>,
    /// Target amplitude; present in the mixture stage only.
    pub c_mix: Option<f64>,
    pub g: f64,
    pub lambda: f64,
    pub sigma2: f64,
}

impl ChainState {
    pub fn k_p(&self) -> usize {
        self.peaks.len()
    }
}

/// One line of the exported trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub i: usize,
    #[serde(rename = "k_P")]
    pub k_p: usize,
    pub sigma2: f64,
    pub g: f64,
    pub lambda: f64,
    #[serde(rename = "move")]
    pub move_kind: MoveKind,
    pub accepted: bool,
    pub seed: u64,
}

/// Proposal and acceptance counts per move type, indexed by [`MoveKind::index`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: [u64; 5],
    pub accepted: [u64; 5],
    /// Iterations rerun because of a negative amplitude draw.
    pub restarts: u64,
    pub max_restarts_in_iteration: usize,
}

impl MoveStats {
    pub fn acceptance_rate(&self, kind: MoveKind) -> Option<f64> {
        let p = self.proposed[kind.index()];
        (p > 0).then(|| self.accepted[kind.index()] as f64 / p as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub seed: u64,
    pub iterations: usize,
    pub thin: usize,
    pub records: Vec<IterationRecord>,
    pub states: Vec<ChainState>,
    pub stats: MoveStats,
}

impl ChainTrace {
    /// JSON lines, one record per retained iteration.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
