//! No simultaneous encoding: a gbit holding one bit perfectly holds nothing
//! about a second. Geometrically, no face of N reached by an effect that also
//! attains 0 may contain two distinct pure states.

use nalgebra::{DVector, Complex};

use crate::convex::{Effect, ExtremePoints, Geometry, StateSpace, StateVector};
use crate::error::Result;
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::pauli::{CMatrix, C64};
use crate::sampling;
use crate::theories::{EffectDeclaration, Theory};

use super::all_effects::valid_support;
use super::report::{CheckReport, Witness};
use super::CheckOptions;

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn split_row(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().chain(v.iter().map(|x| -x)).collect()
}

/// Effect valid on the vertex list satisfying the equalities, maximizing
/// `E · c` when an objective is given.
fn effect_with(vertices: &[DVector<f64>], equal: &[(usize, f64)], objective: Option<&DVector<f64>>) -> Option<Effect> {
    let k = vertices[0].len();
    let mut lp = LinearProgram::new(2 * k);
    if let Some(c) = objective {
        lp.objective = split_row(&-c);
    }
    for v in vertices {
        lp.push(split_row(v), Relation::Le, 1.0);
        lp.push(split_row(v), Relation::Ge, 0.0);
    }
    for &(i, val) in equal {
        lp.push(split_row(&vertices[i]), Relation::Eq, val);
    }
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return None;
    }
    Some(Effect::new(DVector::from_fn(k, |i, _| sol.x[i] - sol.x[k + i])))
}

fn polytope_witness(space: &StateSpace) -> Option<Witness> {
    let ExtremePoints::Finite(states) = space.extreme_points() else {
        return None;
    };
    let verts: Vec<DVector<f64>> = states.into_iter().map(|s| s.coords).collect();
    let n = verts.len();
    let tol = space.tolerance();
    for i in 0..n {
        for j in i + 1..n {
            for m in (0..n).filter(|&m| m != i && m != j) {
                let Some(e) = effect_with(&verts, &[(i, 1.0), (j, 1.0), (m, 0.0)], None) else {
                    continue;
                };
                let zero: Vec<&DVector<f64>> = verts
                    .iter()
                    .filter(|v| e.coeffs.dot(v).abs() <= 10.0 * tol)
                    .collect();
                let omega_prime = zero.iter().fold(DVector::zeros(verts[0].len()), |acc, v| acc + *v)
                    / zero.len() as f64;
                let diff = &verts[i] - &verts[j];
                let ep = effect_with(&verts, &[], Some(&diff))?;
                return Some(Witness::SimultaneousEncoding {
                    omega1: vec_of(&verts[i]),
                    omega2: vec_of(&verts[j]),
                    omega_prime: vec_of(&omega_prime),
                    effect: vec_of(&e.coeffs),
                    effect_prime: vec_of(&ep.coeffs),
                });
            }
        }
    }
    None
}

fn basis_state(dim: usize, i: usize) -> DVector<C64> {
    DVector::from_fn(dim, |r, _| if r == i { Complex::new(1.0, 0.0) } else { Complex::new(0.0, 0.0) })
}

/// For two or more qubits the projector `|0⟩⟨0| ⊗ I` has a face containing
/// the orthogonal pure states `|0…00⟩` and `|0…01⟩`.
fn quantum_witness(space: &StateSpace) -> Option<Witness> {
    let basis = space.pauli()?;
    let dim = basis.dim();
    let half = dim / 2;
    let w1 = basis.pure_coefficients(&basis_state(dim, 0));
    let w2 = basis.pure_coefficients(&basis_state(dim, 1));
    let wp = basis.pure_coefficients(&basis_state(dim, half));
    let mut p = CMatrix::zeros(dim, dim);
    for i in 0..half {
        p[(i, i)] = Complex::new(1.0, 0.0);
    }
    let mut p1 = CMatrix::zeros(dim, dim);
    p1[(0, 0)] = Complex::new(1.0, 0.0);
    let e = basis.coefficients(&p) / dim as f64;
    let ep = basis.coefficients(&p1) / dim as f64;
    Some(Witness::SimultaneousEncoding {
        omega1: vec_of(&w1),
        omega2: vec_of(&w2),
        omega_prime: vec_of(&wp),
        effect: vec_of(&e),
        effect_prime: vec_of(&ep),
    })
}

/// Exact geometric form of the check. Balls and ellipsoids are strictly
/// convex and pass outright; polytopes are searched by LP over vertex pairs.
pub fn check_nse_geometric(space: &StateSpace, opts: &CheckOptions) -> Result<CheckReport> {
    let report = CheckReport::new("nse-geometric", "no simultaneous encoding", space.tolerance(), 0, opts.seed)
        .detail("geometry", space.geometry().kind());
    Ok(match space.geometry() {
        Geometry::Ball { .. } | Geometry::Ellipsoid { .. } | Geometry::Quantum { qubits: 1 } => {
            report.detail("method", "strict convexity").pass("every face of the pure-state sphere is a single point")
        }
        Geometry::Quantum { .. } => match quantum_witness(space) {
            Some(w) => report
                .detail("method", "rank-two projector")
                .fail("a rank-two projector face holds two orthogonal pure states", w),
            None => report.inconclusive("quantum basis unavailable"),
        },
        Geometry::Simplex { .. } | Geometry::Polytope { .. } => match polytope_witness(space) {
            Some(w) => report
                .detail("method", "vertex-pair LP")
                .fail("an effect attaining 0 and 1 has a face with two pure states", w),
            None => report
                .detail("method", "vertex-pair LP")
                .pass("every face reached by an effect attaining 0 is a single vertex"),
        },
    })
}

/// Randomized search over effects rescaled to attain 0 and 1, looking for a
/// face with two distinct pure states. One-sided: a pass is evidence only.
/// Polytopes and multi-qubit spaces also run the exact geometric check.
pub fn check_nse_operational(theory: &Theory, opts: &CheckOptions) -> Result<CheckReport> {
    let space = &theory.space;
    let tol = space.tolerance();
    let mut report = CheckReport::new("nse", "no simultaneous encoding", tol, opts.samples, opts.seed);
    let exact = matches!(
        space.geometry(),
        Geometry::Simplex { .. } | Geometry::Polytope { .. } | Geometry::Quantum { .. }
    ) && !matches!(space.geometry(), Geometry::Quantum { qubits: 1 });
    let unit = space.unit_effect().coeffs.clone();
    let mut rng = sampling::substream(opts.seed, 0x45E);
    let listed: Option<&Vec<Effect>> = match &theory.effects {
        EffectDeclaration::FullDual => None,
        EffectDeclaration::Listed(l) => Some(l),
    };
    let budget = listed.map_or(opts.samples, |l| l.len());
    let mut tried = 0usize;
    for idx in 0..budget {
        let e = match listed {
            Some(l) => l[idx].clone(),
            None => {
                let f = crate::convex::Effect::new(sampling::gaussian_vector(&mut rng, space.k()));
                let (lo, hi) = space.effect_range(&f)?;
                if hi - lo < 1e-9 {
                    continue;
                }
                Effect::new((&f.coeffs - &unit * lo) / (hi - lo))
            }
        };
        let (lo, hi) = space.effect_range(&e)?;
        if lo.abs() > tol || (hi - 1.0).abs() > tol {
            continue;
        }
        tried += 1;
        let Ok(face) = space.face_of_effect(&e) else {
            continue;
        };
        let Some((w1, w2)) = distinct_pair(&face, tol) else {
            continue;
        };
        let complement = Effect::new(&unit - &e.coeffs);
        let Ok(zero_face) = space.face_of_effect(&complement) else {
            continue;
        };
        let Some(wp) = zero_face.first() else {
            continue;
        };
        let (_, ep) = valid_support(space, &(&w1.coords - &w2.coords))?;
        if (ep.eval(w1) - ep.eval(w2)).abs() > tol {
            return Ok(report.detail("method", "randomized search").detail("effects_tried", tried).fail(
                "found an effect whose face holds two distinguishable pure states",
                Witness::SimultaneousEncoding {
                    omega1: vec_of(&w1.coords),
                    omega2: vec_of(&w2.coords),
                    omega_prime: vec_of(&wp.coords),
                    effect: vec_of(&e.coeffs),
                    effect_prime: vec_of(&ep.coeffs),
                },
            ));
        }
    }
    report = report.detail("effects_tried", tried);
    if exact {
        let geo = check_nse_geometric(space, opts)?;
        if let Some(w) = geo.witness {
            return Ok(report
                .detail("method", "randomized search + exact geometric")
                .fail(geo.reason, w));
        }
        return Ok(report
            .detail("method", "randomized search + exact geometric")
            .pass(geo.reason));
    }
    Ok(report.detail("method", "randomized search").pass(format!(
        "no simultaneous encoding found over {tried} effects attaining 0 and 1 (sampling evidence)"
    )))
}

fn distinct_pair(face: &[StateVector], tol: f64) -> Option<(&StateVector, &StateVector)> {
    let first = face.first()?;
    face.iter()
        .skip(1)
        .find(|s| (&s.coords - &first.coords).amax() > 100.0 * tol)
        .map(|s| (first, s))
}
