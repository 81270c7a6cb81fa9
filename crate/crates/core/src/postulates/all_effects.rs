//! Observable effects versus the full set of valid effects, compared through
//! support functions `h(z) = max E · z`.

use nalgebra::DVector;

use crate::convex::{Effect, Geometry, StateSpace};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::pauli;
use crate::sampling;
use crate::theories::{EffectDeclaration, Theory};

use super::report::{CheckReport, Witness};
use super::CheckOptions;

/// Default largest support gap accepted for a listed effect set.
pub const DENSITY_TOLERANCE: f64 = 1e-2;

/// Maximum of `E · z` over all valid effects, with a maximizer.
pub fn valid_support(space: &StateSpace, z: &DVector<f64>) -> Result<(f64, Effect)> {
    let k = space.k();
    match space.geometry() {
        Geometry::Simplex { .. } => {
            let e = z.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
            Ok((e.dot(z), Effect::new(e)))
        }
        Geometry::Polytope { vertices } => {
            // Free variables split as E = p - q.
            let mut lp = LinearProgram::new(2 * k);
            lp.objective = z.iter().map(|v| -v).chain(z.iter().copied()).collect();
            for v in vertices {
                let row: Vec<f64> = v.iter().copied().chain(v.iter().map(|x| -x)).collect();
                lp.push(row.clone(), Relation::Le, 1.0);
                lp.push(row, Relation::Ge, 0.0);
            }
            let sol = lp.solve();
            if sol.status != LpStatus::Optimal {
                return Err(Error::InvalidInput(format!(
                    "support LP did not reach an optimum ({:?})",
                    sol.status
                )));
            }
            let e = DVector::from_fn(k, |i, _| sol.x[i] - sol.x[k + i]);
            Ok((e.dot(z), Effect::new(e)))
        }
        Geometry::Ball { .. } | Geometry::Ellipsoid { .. } | Geometry::Quantum { qubits: 1 } => {
            // E · z = b · y with b the Bloch-frame effect and y the Bloch image
            // of the direction, so maximize over (e, t ê).
            let frame_dir = match space.geometry() {
                Geometry::Ellipsoid { frame, .. } => frame.transpose() * z,
                _ => z.clone(),
            };
            let y0 = frame_dir[0];
            let yh = frame_dir.rows(1, k - 1).into_owned();
            let r = yh.norm();
            let candidates = [(0.0, 0.0), (1.0, 0.0), (0.5, 0.5)];
            let (e, t) = candidates
                .into_iter()
                .max_by(|a, b| (a.0 * y0 + a.1 * r).total_cmp(&(b.0 * y0 + b.1 * r)))
                .expect("non-empty");
            let mut b = DVector::zeros(k);
            b[0] = e;
            if r > 0.0 {
                b.rows_mut(1, k - 1).copy_from(&(&yh * (t / r)));
            }
            let eff = space.effect_from_ball(&b).expect("ball-like");
            Ok((eff.coeffs.dot(z), eff))
        }
        Geometry::Quantum { .. } => {
            let basis = space.pauli().expect("quantum basis");
            let zop = basis.effect_operator(z);
            let (vals, vecs) = pauli::hermitian_eigen(&zop);
            let dim = basis.dim();
            let mut m = pauli::CMatrix::zeros(dim, dim);
            for (i, &l) in vals.iter().enumerate() {
                if l > 0.0 {
                    let v = vecs.column(i);
                    m += &v * v.adjoint();
                }
            }
            let e = basis.coefficients(&m) / dim as f64;
            Ok((e.dot(z), Effect::new(e)))
        }
    }
}

/// Maximum of `E · z` over the observable effects of the theory: the listed
/// effects together with 0 and U.
pub fn observable_support(theory: &Theory, z: &DVector<f64>) -> Result<f64> {
    match &theory.effects {
        EffectDeclaration::FullDual => Ok(valid_support(&theory.space, z)?.0),
        EffectDeclaration::Listed(list) => {
            let u = theory.space.unit_effect().coeffs.dot(z);
            Ok(list
                .iter()
                .map(|e| e.coeffs.dot(z))
                .fold(u.max(0.0), f64::max))
        }
    }
}

/// All valid effects observable: immediate for a full-dual declaration,
/// otherwise the listed set must match the valid-effect support function in
/// sampled directions within the density tolerance.
pub fn check_all_effects(theory: &Theory, opts: &CheckOptions) -> Result<CheckReport> {
    let space = &theory.space;
    let tol = opts.tolerance_for(space);
    let report = CheckReport::new("all-effects", "all effects observable", tol, opts.samples, opts.seed)
        .residual("density_tolerance", opts.density_tolerance);
    let list = match &theory.effects {
        EffectDeclaration::FullDual => {
            return Ok(report.detail("declaration", "full-dual").pass("every valid effect is declared observable"));
        }
        EffectDeclaration::Listed(list) => list,
    };
    for e in list {
        if !space.is_valid_effect(e)? {
            return Err(Error::InvalidInput("listed effect is not valid on the state space".into()));
        }
    }
    let mut rng = sampling::substream(opts.seed, 0xA11E);
    let directions = opts.samples.max(1);
    let mut worst = (f64::NEG_INFINITY, None);
    for _ in 0..directions {
        let z = sampling::unit_vector(&mut rng, space.k());
        let (h, e) = valid_support(space, &z)?;
        let gap = h - observable_support(theory, &z)?;
        if gap > worst.0 {
            worst = (gap, Some((z, e)));
        }
    }
    let report = report
        .detail("declaration", format!("listed({})", list.len()))
        .residual("max_support_gap", worst.0);
    match worst {
        (gap, Some((z, e))) if gap > opts.density_tolerance => Ok(report.fail(
            format!("listed effects miss a valid effect by {gap:.3e} in support"),
            Witness::MissingEffect {
                direction: z.iter().copied().collect(),
                effect: e.coeffs.iter().copied().collect(),
                gap,
            },
        )),
        _ => Ok(report.pass(format!(
            "listed effects match the valid-effect support within {:.1e} over {directions} directions",
            opts.density_tolerance
        ))),
    }
}
