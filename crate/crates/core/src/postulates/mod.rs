//! Postulate checks, the reconstruction pipeline and the interaction scan.

pub mod all_effects;
pub mod interaction;
pub mod nse;
pub mod pipeline;
pub mod report;
pub mod scan;
pub mod structure;

use std::fmt;
use std::str::FromStr;

use crate::convex::StateSpace;
use crate::error::{Error, Result};
use crate::theories::Theory;

pub use all_effects::{check_all_effects, DENSITY_TOLERANCE};
pub use interaction::{check_interaction, verify_quantum_generators};
pub use nse::{check_nse_geometric, check_nse_operational};
pub use pipeline::{reconstruct_pipeline, PipelineReport};
pub use report::{overall, CheckReport, Replay, Status, Witness};
pub use scan::{interaction_scan, InteractionScanResult};
pub use structure::{check_continuous_reversibility, check_tomographic_locality};

pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub samples: usize,
    /// Overrides the space tolerance when set.
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub density_tolerance: f64,
    /// Initial pair count for the interaction scan; 0 picks the minimum
    /// that over-determines the system.
    pub scan_samples: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            tolerance: None,
            seed: 0,
            density_tolerance: DENSITY_TOLERANCE,
            scan_samples: 0,
        }
    }
}

impl CheckOptions {
    pub fn tolerance_for(&self, space: &StateSpace) -> f64 {
        self.tolerance.unwrap_or(space.tolerance())
    }

    /// The theory with the tolerance override applied to its space.
    pub fn apply(&self, theory: &Theory) -> Theory {
        let mut t = theory.clone();
        if let Some(tol) = self.tolerance {
            t.space = t.space.with_tolerance(tol);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PostulateId {
    ContinuousReversibility,
    TomographicLocality,
    NoSimultaneousEncoding,
    AllEffects,
    Interaction,
}

impl PostulateId {
    pub const ALL: [PostulateId; 5] = [
        PostulateId::ContinuousReversibility,
        PostulateId::TomographicLocality,
        PostulateId::NoSimultaneousEncoding,
        PostulateId::AllEffects,
        PostulateId::Interaction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PostulateId::ContinuousReversibility => "cr",
            PostulateId::TomographicLocality => "tl",
            PostulateId::NoSimultaneousEncoding => "nse",
            PostulateId::AllEffects => "all-effects",
            PostulateId::Interaction => "interact",
        }
    }
}

impl fmt::Display for PostulateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PostulateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cr" => Ok(PostulateId::ContinuousReversibility),
            "tl" => Ok(PostulateId::TomographicLocality),
            "nse" => Ok(PostulateId::NoSimultaneousEncoding),
            "all-effects" | "all_effects" | "ae" => Ok(PostulateId::AllEffects),
            "interact" | "interaction" => Ok(PostulateId::Interaction),
            other => Err(Error::InvalidInput(format!("unknown postulate '{other}'"))),
        }
    }
}

pub fn run_check(theory: &Theory, id: PostulateId, opts: &CheckOptions) -> Result<CheckReport> {
    let theory = opts.apply(theory);
    match id {
        PostulateId::ContinuousReversibility => check_continuous_reversibility(&theory, opts),
        PostulateId::TomographicLocality => check_tomographic_locality(&theory, opts),
        PostulateId::NoSimultaneousEncoding => check_nse_operational(&theory, opts),
        PostulateId::AllEffects => check_all_effects(&theory, opts),
        PostulateId::Interaction => check_interaction(&theory, opts),
    }
}

pub fn run_checks(theory: &Theory, ids: &[PostulateId], opts: &CheckOptions) -> Result<Vec<CheckReport>> {
    ids.iter().map(|&id| run_check(theory, id, opts)).collect()
}
