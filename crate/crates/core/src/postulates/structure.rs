//! Continuous reversibility and tomographic locality.

use crate::composites::{self, CompositeRule};
use crate::convex::{ExtremePoints, StateVector};
use crate::error::Result;
use crate::groups::{self, GroupKind};
use crate::linalg;
use crate::theories::Theory;

use super::report::{CheckReport, Witness};
use super::CheckOptions;

/// Largest composite dimension whose span is checked on explicit product
/// states; larger composites use rank(A)·rank(B).
pub const DIRECT_SPAN_MAX: usize = 256;

/// Passes iff the group is connected and acts transitively on pure states.
pub fn check_continuous_reversibility(theory: &Theory, opts: &CheckOptions) -> Result<CheckReport> {
    let space = &theory.space;
    let report = CheckReport::new("cr", "continuous reversibility", space.tolerance(), opts.samples, opts.seed);
    if !theory.group.connected() {
        let elements = match theory.group.kind() {
            GroupKind::Finite(el) => el.len(),
            _ => 0,
        };
        return Ok(report
            .detail("group", format!("finite({elements})"))
            .fail("disconnected", Witness::Disconnected { elements }));
    }
    let verdict = groups::orbit_transitive(&theory.group, space, opts.seed, opts.samples)?;
    let report = report
        .detail("method", verdict.method)
        .detail("pairs_checked", verdict.pairs_checked)
        .residual("max_reach_residual", verdict.max_residual);
    Ok(match verdict.witness {
        Some((a, b)) => report.fail(
            "group does not act transitively on pure states",
            Witness::Unreachable {
                from: a.coords.iter().copied().collect(),
                to: b.coords.iter().copied().collect(),
                residual: verdict.max_residual,
            },
        ),
        None => report.pass("connected and transitive on pure states"),
    })
}

fn pure_pool(theory: &Theory, count: usize, seed: u64) -> Vec<StateVector> {
    match theory.space.extreme_points() {
        ExtremePoints::Finite(v) => v,
        _ => theory.space.sample_pure(count, seed),
    }
}

/// Passes iff `k_AB = k_A k_B` and product states span the composite.
pub fn check_tomographic_locality(theory: &Theory, opts: &CheckOptions) -> Result<CheckReport> {
    let composite = theory.composite_space()?;
    let k_a = theory.space.k();
    let k_b = k_a;
    let k_ab = composite.k;
    let report = CheckReport::new("tl", "tomographic locality", theory.space.tolerance(), opts.samples, opts.seed)
        .detail("composite", composite.rule.name())
        .detail("k_a", k_a)
        .detail("k_b", k_b)
        .detail("k_ab", k_ab);
    if k_ab != k_a * k_b {
        return Ok(report.fail(
            format!("composite dimension {k_ab} differs from {k_a} x {k_b}"),
            Witness::DimensionMismatch { k_a, k_b, k_ab },
        ));
    }
    if let CompositeRule::Declared { .. } = composite.rule {
        return Ok(report.pass("declared composite has the product dimension"));
    }
    let pool_a = pure_pool(theory, (2 * k_a).max(8), opts.seed);
    let pool_b = pure_pool(theory, (2 * k_b).max(8), opts.seed ^ 0xB);
    let (rank, method) = if k_ab <= DIRECT_SPAN_MAX {
        let products: Vec<StateVector> = pool_a
            .iter()
            .flat_map(|a| pool_b.iter().map(move |b| composites::tensor_state(a, b)))
            .collect();
        (composites::span_rank(&products), "product-span")
    } else {
        let cols = |p: &[StateVector]| {
            nalgebra::DMatrix::from_columns(&p.iter().map(|s| s.coords.clone()).collect::<Vec<_>>())
        };
        (
            linalg::rank(&cols(&pool_a), 1e-7) * linalg::rank(&cols(&pool_b), 1e-7),
            "local-rank-product",
        )
    };
    let report = report.detail("method", method).detail("span_rank", rank);
    Ok(if rank == k_ab {
        report.pass("product states span the composite")
    } else {
        report.fail(
            format!("product states span only {rank} of {k_ab} dimensions"),
            Witness::SpanDeficit { rank, expected: k_ab },
        )
    })
}
