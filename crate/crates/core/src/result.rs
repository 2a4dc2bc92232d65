use bitflags::bitflags;

use crate::channel::{Beamformer, PhaseVector, Rates};

bitflags! {
    /// Diagnostics attached to a result. An empty set means every recorded
    /// constraint residual is within tolerance.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct Flags: u32 {
        /// Rank-one extraction fell back to Gaussian randomization.
        const RANDOMIZED = 1 << 0;
        /// A zero combined-vector entry was resolved to phase 0.
        const DEGENERATE_PHASE = 1 << 1;
        /// A conic solve stopped before reaching its tolerance.
        const SOLVER_INACCURATE = 1 << 2;
        /// The problem (or the QoS target) is infeasible.
        const INFEASIBLE = 1 << 3;
        /// An outer loop hit its iteration cap.
        const MAX_ITERATIONS = 1 << 4;
        /// m ≤ 2: no null space left for artificial noise.
        const NO_AN_SPACE = 1 << 5;
        /// The run aborted with an error; numeric fields are partial.
        const FAILED = 1 << 6;
        /// A subproblem returned a worse point and the previous one was kept.
        const STEP_REJECTED = 1 << 7;
    }
}

impl Flags {
    /// `|`-separated names, empty for no flags.
    pub fn to_label(self) -> String {
        self.iter_names().map(|(n, _)| n.to_ascii_lowercase()).collect::<Vec<_>>().join("|")
    }

    /// Flags that mark a run as failed under `--strict`.
    pub fn is_failure(self) -> bool {
        self.intersects(Flags::FAILED | Flags::SOLVER_INACCURATE)
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub w: Beamformer,
    pub s: PhaseVector,
    pub rates: Rates,
    /// `‖w‖²`, watts.
    pub power: f64,
    /// Selected worst-case Eve power (robust mode).
    pub tau_opt: Option<f64>,
    /// Signal power for the QoS target (no-CSI mode), watts.
    pub p_s: Option<f64>,
    /// (iteration, objective) pairs.
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub wall_ms: f64,
    pub flags: Flags,
}

impl RunResult {
    /// Secrecy rate as reported: `max(0, C_s)`.
    pub fn secrecy_rate(&self) -> f64 {
        self.rates.c_s.max(0.0)
    }
}
