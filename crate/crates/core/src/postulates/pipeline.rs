//! Single-gbit reconstruction: from a candidate (space, group) to the qubit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::groups;
use crate::theories::{FrameMap, Theory};

use super::interaction::{scan_report, verify_quantum_generators};
use super::nse::check_nse_geometric;
use super::report::{matrix_rows, CheckReport, Status, Witness};
use super::scan;
use super::structure::check_continuous_reversibility;
use super::CheckOptions;

/// Stage identifiers in execution order.
pub const STAGES: [&str; 7] = [
    "finiteness",
    "nse",
    "continuity",
    "ellipsoid",
    "bloch_form",
    "dimension_gate",
    "quantum_generators",
];

/// Largest departure of |ω̂| from 1 accepted in the Bloch form.
pub const NORM_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<CheckReport>,
    pub passed: bool,
    /// Frame change to Bloch coordinates `(u, u ω̂)`, which coincide with the
    /// qubit Pauli coefficients. Present only on a full pass.
    pub frame_map: Option<Vec<Vec<f64>>>,
    pub frame_condition: Option<f64>,
}

impl PipelineReport {
    pub fn status(&self) -> Status {
        super::report::overall(&self.stages)
    }

    pub fn frame_matrix(&self) -> Option<DMatrix<f64>> {
        self.frame_map.as_ref().map(|rows| {
            DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
        })
    }
}

fn stage_error(id: &str, postulate: &str, opts: &CheckOptions, tol: f64, message: String) -> CheckReport {
    CheckReport::new(id, postulate, tol, opts.samples, opts.seed)
        .fail(message.clone(), Witness::StageError { message })
}

/// Runs the stages in order and stops at the first stage that does not pass.
pub fn reconstruct_pipeline(theory: &Theory, opts: &CheckOptions) -> Result<PipelineReport> {
    let space = &theory.space;
    let tol = space.tolerance();
    let mut stages = Vec::new();
    let finish = |stages: Vec<CheckReport>| PipelineReport {
        stages,
        passed: false,
        frame_map: None,
        frame_condition: None,
    };

    let validation = opts.samples.min(2000);
    let escaped = theory.validate(validation, opts.seed)?;
    let stage = CheckReport::new("finiteness", "finite dimension", tol, validation, opts.seed).detail("k", space.k());
    let stage = match escaped {
        None => stage.pass("finite k and the group keeps sampled states inside the space"),
        Some(s) => stage.fail(
            "a group element maps a state outside the space",
            Witness::StageError {
                message: format!("escaping state {:?}", s.coords.as_slice()),
            },
        ),
    };
    stages.push(stage);
    if stages.last().map(|s| s.status) != Some(Status::Pass) {
        return Ok(finish(stages));
    }

    let mut stage = check_nse_geometric(space, opts)?;
    stage.id = "nse".into();
    stages.push(stage);
    if !stages.last().expect("pushed").passed() {
        return Ok(finish(stages));
    }

    let mut stage = check_continuous_reversibility(theory, opts)?;
    stage.id = "continuity".into();
    stages.push(stage);
    if !stages.last().expect("pushed").passed() {
        return Ok(finish(stages));
    }

    let metric = groups::invariant_metric(&theory.group, space, opts.seed);
    let stage = match &metric {
        Ok(m) => CheckReport::new("ellipsoid", "invariant metric", 1e-8, 0, opts.seed)
            .residual("pure_norm", m.r)
            .residual("pure_norm_spread", m.spread)
            .pass("pure states have equal invariant norm, so N is an ellipsoid"),
        Err(e) => stage_error("ellipsoid", "invariant metric", opts, 1e-8, e.to_string()),
    };
    stages.push(stage);
    if metric.is_err() {
        return Ok(finish(stages));
    }

    let bloch = groups::bloch_form(space, &theory.group, opts.seed);
    let stage = match &bloch {
        Ok(b) if b.max_norm_deviation < NORM_TOLERANCE => {
            CheckReport::new("bloch_form", "bloch form", NORM_TOLERANCE, 0, opts.seed)
                .detail("d", b.space.k() - 1)
                .residual("max_norm_deviation", b.max_norm_deviation)
                .residual("block_residual", b.block_residual)
                .pass("states read (u, u ω̂) with |ω̂| = 1 on pure states")
        }
        Ok(b) => stage_error(
            "bloch_form",
            "bloch form",
            opts,
            NORM_TOLERANCE,
            format!("pure-state norm deviation {:.3e}", b.max_norm_deviation),
        ),
        Err(e) => stage_error("bloch_form", "bloch form", opts, NORM_TOLERANCE, e.to_string()),
    };
    let passed = stage.passed();
    stages.push(stage);
    let bloch = match (passed, bloch) {
        (true, Ok(b)) => b,
        _ => return Ok(finish(stages)),
    };

    let d = bloch.space.k() - 1;
    let r = scan::interaction_scan(d, opts.scan_samples, opts.seed)?;
    let stage = scan_report(
        CheckReport::new("dimension_gate", "interaction", scan::SVD_THRESHOLD, opts.scan_samples, opts.seed),
        &r,
    );
    let stage = if !r.stable {
        stage.inconclusive("null-space dimension did not stabilize")
    } else if d == 3 && r.has_interaction() && r.contains_quantum == Some(true) {
        stage.pass("d = 3 admits interacting generators, including all two-qubit ones")
    } else if !r.has_interaction() {
        stage.fail(
            format!("d = {d} admits only local generators"),
            Witness::NoInteraction {
                d,
                samples: opts.scan_samples,
                seed: opts.seed,
                local_dim: r.local_dim,
                solution_dim: r.solution_dim,
            },
        )
    } else {
        stage.inconclusive(format!("d = {d} leaves non-local candidates the scan cannot exclude"))
    };
    let passed = stage.passed();
    stages.push(stage);
    if !passed {
        return Ok(finish(stages));
    }

    let mut stage = verify_quantum_generators(opts.samples, opts.seed, tol)?;
    stage.id = "quantum_generators".into();
    // Map sampled pure states through the recovered frame to density
    // matrices: eigenvalues must be {0, 1}.
    let fm = FrameMap::new(1)?;
    let mut eig_residual: f64 = 0.0;
    for s in space.sample_pure(64, opts.seed) {
        let y = &bloch.frame_map * &s.coords;
        let rho = fm.forward(&y)?;
        let ev = crate::pauli::hermitian_eigenvalues(&rho);
        eig_residual = eig_residual.max(ev[0].abs()).max((ev[1] - 1.0).abs());
    }
    stage = stage.residual("density_eigenvalue_residual", eig_residual);
    let passed = stage.passed();
    stages.push(stage);
    if !passed {
        return Ok(finish(stages));
    }
    Ok(PipelineReport {
        stages,
        passed: true,
        frame_map: Some(matrix_rows(&bloch.frame_map)),
        frame_condition: Some(crate::linalg::condition_number(&bloch.frame_map)),
    })
}
