//! Interaction checks for pairs of gbits: the scan-backed gate and the
//! positive check that two-qubit dynamics keep product probabilities valid.

use nalgebra::DVector;
use rand::Rng;

use crate::error::Result;
use crate::linalg::{expm, kron_vec};
use crate::pauli;
use crate::sampling;
use crate::theories::Theory;

use super::report::{matrix_rows, CheckReport, Witness};
use super::scan::{self, InteractionScanResult};
use super::CheckOptions;

/// Group elements are redrawn after this many evaluations.
pub const REFRESH_EVERY: usize = 100;

pub(crate) fn scan_report(report: CheckReport, r: &InteractionScanResult) -> CheckReport {
    let mut report = report
        .detail("d", r.d)
        .detail("local_dim", r.local_dim)
        .detail("first_order_dim", r.first_order_dim)
        .detail("solution_dim", r.solution_dim)
        .detail("dims_by_level", format!("{:?}", r.dims_by_level))
        .detail("samples_by_level", format!("{:?}", r.samples_by_level))
        .detail("stable", r.stable)
        .detail("bound", "necessary-condition scan; solution_dim is an upper bound")
        .residual("local_constraint_residual", r.local_residual);
    if let Some(c) = r.contains_quantum {
        report = report.detail("contains_quantum", c);
    }
    if let Some(q) = r.quantum_constraint_residual {
        report = report.residual("quantum_constraint_residual", q);
    }
    if let Some(q) = r.quantum_span_residual {
        report = report.residual("quantum_span_residual", q);
    }
    report
}

/// Runs the interaction scan for a ball-like gbit. Passes iff some
/// non-product generator survives; inconclusive for other geometries or an
/// unstable rank.
pub fn check_interaction(theory: &Theory, opts: &CheckOptions) -> Result<CheckReport> {
    let report = CheckReport::new("interact", "interaction", scan::SVD_THRESHOLD, opts.scan_samples, opts.seed);
    let Some((d, _)) = theory.space.ball_view() else {
        return Ok(report
            .detail("geometry", theory.space.geometry().kind())
            .inconclusive("the interaction scan covers ball-like gbits only"));
    };
    let r = scan::interaction_scan(d, opts.scan_samples, opts.seed)?;
    let report = scan_report(report, &r);
    Ok(if !r.stable {
        report.inconclusive("null-space dimension did not stabilize")
    } else if r.has_interaction() {
        report.pass(format!(
            "{} generators beyond the {} local ones survive",
            r.solution_dim - r.local_dim,
            r.local_dim
        ))
    } else {
        report.fail(
            "only local generators satisfy the constraints",
            Witness::NoInteraction {
                d,
                samples: opts.scan_samples,
                seed: opts.seed,
                local_dim: r.local_dim,
                solution_dim: r.solution_dim,
            },
        )
    })
}

fn bloch_pure<R: Rng>(rng: &mut R) -> DVector<f64> {
    let v = sampling::unit_vector(rng, 3);
    DVector::from_vec(vec![1.0, v[0], v[1], v[2]])
}

fn pure_effect(dir: &DVector<f64>) -> DVector<f64> {
    let n = dir.norm();
    let mut e = DVector::from_element(4, 0.0);
    e[0] = 0.5;
    if n > 0.0 {
        e.rows_mut(1, 3).copy_from(&(dir * (0.5 / n)));
    }
    e
}

/// Exponentiates random two-qubit adjoint generators and checks that every
/// product of pure effects assigns a probability in [-tol, 1 + tol] to the
/// evolved product of pure states. Half of the effect pairs are aligned with
/// the evolved marginals, where values sit closest to 1.
pub fn verify_quantum_generators(samples: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let gens = pauli::adjoint_generators(2);
    let mut rng = sampling::substream(seed, 0x5B4);
    let mut h = nalgebra::DMatrix::zeros(16, 16);
    let mut g = nalgebra::DMatrix::identity(16, 16);
    let mut violations = 0usize;
    let mut lowest = f64::INFINITY;
    let mut highest = f64::NEG_INFINITY;
    let mut witness = None;
    for i in 0..samples {
        if i % REFRESH_EVERY == 0 {
            h = nalgebra::DMatrix::zeros(16, 16);
            for gen in &gens {
                h += gen * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            g = expm(&h);
        }
        let wa = bloch_pure(&mut rng);
        let wb = bloch_pure(&mut rng);
        let out = &g * kron_vec(&wa, &wb);
        let (da, db) = if i % 2 == 0 {
            let alpha = DVector::from_fn(3, |j, _| out[(j + 1) * 4]);
            let beta = DVector::from_fn(3, |j, _| out[j + 1]);
            let sa = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let sb = if rng.random::<bool>() { 1.0 } else { -1.0 };
            (alpha * sa, beta * sb)
        } else {
            (sampling::unit_vector(&mut rng, 3), sampling::unit_vector(&mut rng, 3))
        };
        let ea = pure_effect(&da);
        let eb = pure_effect(&db);
        let v = kron_vec(&ea, &eb).dot(&out);
        lowest = lowest.min(v);
        highest = highest.max(v);
        if v < -tol || v > 1.0 + tol {
            violations += 1;
            if witness.is_none() {
                witness = Some(Witness::ProbabilityViolation {
                    generator: matrix_rows(&h),
                    state_a: wa.iter().copied().collect(),
                    state_b: wb.iter().copied().collect(),
                    effect_a: ea.iter().copied().collect(),
                    effect_b: eb.iter().copied().collect(),
                    value: v,
                });
            }
        }
    }
    let report = CheckReport::new("quantum-generators", "interaction consistency", tol, samples, seed)
        .detail("violations", violations)
        .detail("refresh_every", REFRESH_EVERY)
        .residual("min_value", lowest)
        .residual("max_value", highest);
    Ok(match witness {
        Some(w) => report.fail(format!("{violations} product probabilities left [0, 1]"), w),
        None => report.pass("all sampled product probabilities stay in [0, 1]"),
    })
}
