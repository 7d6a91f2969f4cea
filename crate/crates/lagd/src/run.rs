//! Shared run bookkeeping: per-run results and traces, final/best reporting,
//! stable seed derivation, and the multistart wrapper every solver goes
//! through in comparisons.

use serde::{Deserialize, Serialize};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::model::Precoder;

/// Which iterate a run reports as its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportMode {
    /// The last iterate, V_K.
    #[default]
    Final,
    /// The iterate with the highest recorded sum rate.
    Best,
}

impl std::str::FromStr for ReportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Self::Final),
            "best" => Ok(Self::Best),
            other => Err(Error::Usage(format!("unknown report mode `{other}`"))),
        }
    }
}

/// Outcome of one solver run on one channel realization.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_precoder: Precoder,
    pub final_wsr: f64,
    pub best_wsr: f64,
    /// Sum rate after 0, 1, ..., K iterations (length K+1).
    pub wsr_trace: Vec<f64>,
    /// Surrogate-objective trace for solvers that minimize one (WMMSE);
    /// aligned with `wsr_trace`.
    pub objective_trace: Option<Vec<f64>>,
    pub wall_time: Duration,
    /// Seed the run was derived from (0 when the caller supplied V_0 itself).
    pub seed: u64,
}

impl RunResult {
    pub fn reported_wsr(&self, mode: ReportMode) -> f64 {
        match mode {
            ReportMode::Final => self.final_wsr,
            ReportMode::Best => self.best_wsr,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one seed. Stable across platforms and runs,
/// so experiment outputs are reproducible under any execution order.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3; // arbitrary non-zero start
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}

/// Domain tags so distinct random streams never collide.
pub mod seed_tag {
    pub const CHANNEL: u64 = 0xC4A1;
    pub const SOLVER: u64 = 0x501E;
    pub const RESTART: u64 = 0x5EED;
    pub const INIT_PRECODER: u64 = 0xF0;
    pub const INIT_THETA: u64 = 0x7E7A;
}

/// Seed for restart `idx` of a solve rooted at `base_seed`. Restart 0 of a
/// multistart therefore reproduces the single-start run bit for bit.
pub fn restart_seed(base_seed: u64, idx: usize) -> u64 {
    derive_seed(&[seed_tag::RESTART, base_seed, idx as u64])
}

/// Stream seed for the initial precoder of one restart. Shared by every
/// algorithm so paired comparisons start from identical V_0.
pub fn precoder_seed(restart_seed: u64) -> u64 {
    derive_seed(&[seed_tag::INIT_PRECODER, restart_seed])
}

/// Stream seed for the network parameters of one restart.
pub fn theta_seed(restart_seed: u64) -> u64 {
    derive_seed(&[seed_tag::INIT_THETA, restart_seed])
}

/// Runs `solve` once per restart on independently derived seeds and keeps
/// the run whose reported sum rate is largest (first such run on ties).
pub fn multistart<F>(
    restarts: usize,
    base_seed: u64,
    mode: ReportMode,
    solve: F,
) -> Result<(RunResult, usize)>
where
    F: Fn(u64) -> Result<RunResult>,
{
    if restarts == 0 {
        return Err(Error::Config(
            "multistart needs at least one restart".into(),
        ));
    }
    let mut best: Option<(RunResult, usize)> = None;
    for idx in 0..restarts {
        let run = solve(restart_seed(base_seed, idx))?;
        let better = match &best {
            None => true,
            Some((cur, _)) => run.reported_wsr(mode) > cur.reported_wsr(mode),
        };
        if better {
            best = Some((run, idx));
        }
    }
    Ok(best.expect("restarts >= 1"))
}
