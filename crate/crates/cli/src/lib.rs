//! Front end for the postulate checkers: theory documents in, report
//! documents and exit codes out.

pub mod document;
pub mod error;
pub mod report;

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use gptw_core::postulates::{self, CheckOptions, PostulateId, Status};

pub use document::TheoryDocument;
pub use error::{CliError, Result};
pub use report::{render_markdown, ReportDocument};

use report::{Budgets, CheckEntry, Reconstruction, SCHEMA_VERSION};

/// Environment variable that replaces the default seed.
pub const SEED_ENV: &str = "GPTW_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass,
    Fail,
    Inconclusive,
    InputError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::Fail => 1,
            ExitStatus::Inconclusive => 2,
            ExitStatus::InputError => 3,
        }
    }
}

impl From<Status> for ExitStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Pass => ExitStatus::Pass,
            Status::Fail => ExitStatus::Fail,
            Status::Inconclusive => ExitStatus::Inconclusive,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub samples: usize,
    pub tolerance: Option<f64>,
    /// Explicit seed; falls back to the document seed, then 0.
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            samples: postulates::DEFAULT_SAMPLES,
            tolerance: None,
            seed: None,
        }
    }
}

impl RunOptions {
    fn check_options(&self, doc: &TheoryDocument) -> CheckOptions {
        CheckOptions {
            samples: self.samples,
            tolerance: self.tolerance,
            seed: self.seed.or(doc.seed).unwrap_or(0),
            ..CheckOptions::default()
        }
    }
}

fn budgets(opts: &CheckOptions) -> Budgets {
    Budgets {
        samples: opts.samples,
        tolerance: opts.tolerance,
        seed: opts.seed,
    }
}

/// Runs the selected checks in the given order.
pub fn check_document(doc: &TheoryDocument, ids: &[PostulateId], run: &RunOptions) -> Result<ReportDocument> {
    let start = Instant::now();
    let theory = doc.to_theory()?;
    let opts = run.check_options(doc);
    let mut checks = Vec::with_capacity(ids.len());
    for &id in ids {
        let t0 = Instant::now();
        let report = postulates::run_check(&theory, id, &opts)?;
        checks.push(CheckEntry {
            report,
            duration: Some(t0.elapsed().as_secs_f64()),
        });
    }
    let reports: Vec<_> = checks.iter().map(|c| c.report.clone()).collect();
    let status = postulates::overall(&reports);
    Ok(ReportDocument {
        schema_version: SCHEMA_VERSION.into(),
        command: "check".into(),
        theory: doc.name.clone(),
        status,
        exit_code: ExitStatus::from(status).code(),
        budgets: budgets(&opts),
        checks,
        reconstruction: None,
        duration: start.elapsed().as_secs_f64(),
    })
}

/// Runs the single-gbit reconstruction pipeline.
pub fn reconstruct_document(doc: &TheoryDocument, run: &RunOptions) -> Result<ReportDocument> {
    let start = Instant::now();
    let theory = doc.to_theory()?;
    let opts = run.check_options(doc);
    let pipeline = postulates::reconstruct_pipeline(&theory, &opts)?;
    let status = pipeline.status();
    let elapsed = start.elapsed().as_secs_f64();
    let checks = pipeline
        .stages
        .iter()
        .map(|s| CheckEntry {
            report: s.clone(),
            duration: None,
        })
        .collect();
    Ok(ReportDocument {
        schema_version: SCHEMA_VERSION.into(),
        command: "reconstruct".into(),
        theory: doc.name.clone(),
        status,
        exit_code: ExitStatus::from(status).code(),
        budgets: budgets(&opts),
        checks,
        reconstruction: Some(Reconstruction {
            passed: pipeline.passed,
            equivalent_to: pipeline.passed.then(|| "qubit".to_string()),
            frame_map: pipeline.frame_map,
            frame_condition: pipeline.frame_condition,
        }),
        duration: elapsed,
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.flush().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// Seed from [`SEED_ENV`], if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Core(gptw_core::Error::InvalidInput(format!("{SEED_ENV}='{v}' is not an unsigned integer")))
        }),
        Err(_) => Ok(None),
    }
}
