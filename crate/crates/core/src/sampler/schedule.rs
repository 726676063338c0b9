use serde::{Deserialize, Serialize};

/// The five move types of the hybrid sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Within,
    Birth,
    Death,
    Split,
    Merge,
}

impl MoveKind {
    pub const ALL: [MoveKind; 5] = [
        MoveKind::Within,
        MoveKind::Birth,
        MoveKind::Death,
        MoveKind::Split,
        MoveKind::Merge,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Within => "within",
            MoveKind::Birth => "birth",
            MoveKind::Death => "death",
            MoveKind::Split => "split",
            MoveKind::Merge => "merge",
        }
    }

    pub fn is_trans_dimensional(self) -> bool {
        self != MoveKind::Within
    }
}

/// Move probabilities at one iteration, indexed by [`MoveKind::index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveSchedule {
    pub probs: [f64; 5],
    pub temperature: f64,
}

impl MoveSchedule {
    pub fn prob(&self, kind: MoveKind) -> f64 {
        self.probs[kind.index()]
    }

    /// Map a uniform draw in [0, 1) to a move type.
    pub fn pick(&self, u: f64) -> MoveKind {
        let mut acc = 0.0;
        for kind in MoveKind::ALL.iter().skip(1) {
            acc += self.probs[kind.index()];
            if u < acc {
                return *kind;
            }
        }
        MoveKind::Within
    }
}

/// Probabilities at iteration `i`: each trans-dimensional move starts at `p0`
/// and is raised to `1/T`, with `T` falling linearly from 1 at `i = 0` to 0 at
/// `i_freeze`. Birth/death and split/merge stay pairwise equal; the within
/// move takes the remainder. Without annealing the initial values are kept.
pub fn anneal_schedule(i: usize, i_freeze: usize, p0: f64, anneal: bool) -> MoveSchedule {
    let temperature = if !anneal {
        1.0
    } else if i_freeze == 0 {
        0.0
    } else {
        (1.0 - i as f64 / i_freeze as f64).max(0.0)
    };
    let p = if temperature > 0.0 { p0.powf(1.0 / temperature) } else { 0.0 };
    MoveSchedule { probs: [1.0 - 4.0 * p, p, p, p, p], temperature }
}
