//! Bipartite and n-partite composites under tomographic locality.
//!
//! Composite coordinates use Kronecker order: index `i * k_B + j` pairs the
//! A-coordinate `i` with the B-coordinate `j` (B fastest). The Bloch view
//! `(u, α, β, γ)` is a relabelling of the same numbers: `u` at (0, 0), `α` at
//! (i, 0), `β` at (0, j) and `γ` at (i, j) for i, j >= 1.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::convex::{Effect, StateSpace, StateVector};
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, kron_vec};
use crate::lp::{self, Relation};
use crate::sampling;

#[derive(Debug, Clone, PartialEq)]
pub enum CompositeRule {
    /// Convex hull of product states.
    SeparableHull,
    /// The multi-qubit quantum state space.
    Quantum,
    /// A composite of declared dimension (validated, never inferred).
    Declared { k: usize },
}

impl CompositeRule {
    pub fn name(&self) -> &'static str {
        match self {
            CompositeRule::SeparableHull => "separable-hull",
            CompositeRule::Quantum => "quantum",
            CompositeRule::Declared { .. } => "declared",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompositeSpace {
    pub factors: Vec<StateSpace>,
    pub k: usize,
    pub rule: CompositeRule,
}

impl CompositeSpace {
    pub fn new(factors: Vec<StateSpace>, rule: CompositeRule) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidInput("composite needs factors".into()));
        }
        let product: usize = factors.iter().map(|f| f.k()).product();
        let k = match rule {
            CompositeRule::Declared { k } => k,
            _ => product,
        };
        Ok(Self { factors, k, rule })
    }

    pub fn product_dimension(&self) -> usize {
        self.factors.iter().map(|f| f.k()).product()
    }
}

/// Kronecker product of two states.
pub fn tensor_state(a: &StateVector, b: &StateVector) -> StateVector {
    StateVector::new(kron_vec(&a.coords, &b.coords))
}

/// Left-to-right fold of [`tensor_state`].
pub fn tensor_states(states: &[StateVector]) -> Option<StateVector> {
    let (first, rest) = states.split_first()?;
    Some(rest.iter().fold(first.clone(), |acc, s| tensor_state(&acc, s)))
}

pub fn tensor_effect(a: &Effect, b: &Effect) -> Effect {
    Effect::new(kron_vec(&a.coeffs, &b.coeffs))
}

/// `(E_A ⊗ E_B)(ω)` without forming the product effect.
pub fn product_value(w: &StateVector, ea: &DVector<f64>, eb: &DVector<f64>) -> f64 {
    let kb = eb.len();
    let mut acc = 0.0;
    for (i, &a) in ea.iter().enumerate() {
        if a != 0.0 {
            acc += a * w.coords.rows(i * kb, kb).dot(eb);
        }
    }
    acc
}

/// Marginals `ω_A = (1 ⊗ U_B) ω` and `ω_B = (U_A ⊗ 1) ω`.
pub fn marginals(w: &StateVector, sa: &StateSpace, sb: &StateSpace) -> Result<(StateVector, StateVector)> {
    let (ka, kb) = (sa.k(), sb.k());
    check_len(ka * kb, w.len())?;
    let ua = &sa.unit_effect().coeffs;
    let ub = &sb.unit_effect().coeffs;
    let mut a = DVector::zeros(ka);
    let mut b = DVector::zeros(kb);
    for i in 0..ka {
        for j in 0..kb {
            let v = w.coords[i * kb + j];
            a[i] += v * ub[j];
            b[j] += v * ua[i];
        }
    }
    Ok((StateVector::new(a), StateVector::new(b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    pub u: f64,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub gamma: DMatrix<f64>,
}

impl BipartiteState {
    /// Reads a two-gbit state in Kronecker order.
    pub fn from_vector(w: &StateVector, d: usize) -> Result<Self> {
        let kb = d + 1;
        check_len(kb * kb, w.len())?;
        let c = &w.coords;
        Ok(Self {
            u: c[0],
            alpha: DVector::from_fn(d, |i, _| c[(i + 1) * kb]),
            beta: DVector::from_fn(d, |j, _| c[j + 1]),
            gamma: DMatrix::from_fn(d, d, |i, j| c[(i + 1) * kb + j + 1]),
        })
    }

    pub fn d(&self) -> usize {
        self.alpha.len()
    }

    /// Kronecker-order vector.
    pub fn to_vector(&self) -> StateVector {
        let d = self.d();
        let kb = d + 1;
        let mut c = DVector::zeros(kb * kb);
        c[0] = self.u;
        for i in 0..d {
            c[(i + 1) * kb] = self.alpha[i];
            c[i + 1] = self.beta[i];
            for j in 0..d {
                c[(i + 1) * kb + j + 1] = self.gamma[(i, j)];
            }
        }
        StateVector::new(c)
    }

    /// Block-order vector `(u, α, β, γ row-major)`.
    pub fn to_block_vector(&self) -> DVector<f64> {
        let d = self.d();
        let mut out = Vec::with_capacity((d + 1) * (d + 1));
        out.push(self.u);
        out.extend(self.alpha.iter());
        out.extend(self.beta.iter());
        for i in 0..d {
            out.extend(self.gamma.row(i).iter());
        }
        DVector::from_vec(out)
    }

    pub fn from_block_vector(v: &DVector<f64>, d: usize) -> Result<Self> {
        check_len((d + 1) * (d + 1), v.len())?;
        Ok(Self {
            u: v[0],
            alpha: v.rows(1, d).into_owned(),
            beta: v.rows(1 + d, d).into_owned(),
            gamma: DMatrix::from_fn(d, d, |i, j| v[1 + 2 * d + i * d + j]),
        })
    }

    /// Two-qubit singlet: u = 1, α = β = 0, γ = -I.
    pub fn singlet() -> Self {
        Self {
            u: 1.0,
            alpha: DVector::zeros(3),
            beta: DVector::zeros(3),
            gamma: -DMatrix::identity(3, 3),
        }
    }
}

/// True iff the states span a space of dimension `dim` (SVD rank with
/// relative threshold 1e-7).
pub fn span_check(states: &[StateVector], dim: usize) -> bool {
    span_rank(states) == dim
}

pub fn span_rank(states: &[StateVector]) -> usize {
    if states.is_empty() {
        return 0;
    }
    let m = DMatrix::from_columns(&states.iter().map(|s| s.coords.clone()).collect::<Vec<_>>());
    linalg::rank(&m, 1e-7)
}

#[derive(Debug, Clone)]
pub struct ConsistencyVerdict {
    pub passed: bool,
    pub min_value: f64,
    pub max_value: f64,
    /// Violating effect pair and the probability it assigns.
    pub witness: Option<(Effect, Effect, f64)>,
    pub evaluations: usize,
}

struct Extremes {
    min: (f64, Option<(Effect, Effect)>),
    max: (f64, Option<(Effect, Effect)>),
    evaluations: usize,
}

impl Extremes {
    fn new() -> Self {
        Self {
            min: (f64::INFINITY, None),
            max: (f64::NEG_INFINITY, None),
            evaluations: 0,
        }
    }

    fn record(&mut self, v: f64, ea: &Effect, eb: &Effect) {
        self.evaluations += 1;
        if v < self.min.0 {
            self.min = (v, Some((ea.clone(), eb.clone())));
        }
        if v > self.max.0 {
            self.max = (v, Some((ea.clone(), eb.clone())));
        }
    }
}

/// Number of alternating-optimization restarts over the sphere for ball
/// factors.
pub const SPHERE_RESTARTS: usize = 50;

/// Checks `(E_x ⊗ E_y)(ω) ∈ [-tol, 1 + tol]` for every listed pair and, for
/// ball-like factors, over all extremal effect pairs by alternating
/// optimization on the sphere.
pub fn product_effect_consistency(
    w: &StateVector,
    sa: &StateSpace,
    sb: &StateSpace,
    ea: &[Effect],
    eb: &[Effect],
    tol: f64,
    seed: u64,
) -> Result<ConsistencyVerdict> {
    check_len(sa.k() * sb.k(), w.len())?;
    let mut ext = Extremes::new();
    for x in ea {
        check_len(sa.k(), x.len())?;
        for y in eb {
            check_len(sb.k(), y.len())?;
            ext.record(product_value(w, &x.coeffs, &y.coeffs), x, y);
        }
    }
    if let (Some(_), Some(_)) = (sa.ball_view(), sb.ball_view()) {
        sphere_search(w, sa, sb, seed, &mut ext);
    }
    let passed = ext.min.0 >= -tol && ext.max.0 <= 1.0 + tol;
    let witness = if passed {
        None
    } else if ext.min.0 < -tol {
        ext.min.1.clone().map(|(a, b)| (a, b, ext.min.0))
    } else {
        ext.max.1.clone().map(|(a, b)| (a, b, ext.max.0))
    };
    Ok(ConsistencyVerdict {
        passed,
        min_value: ext.min.0,
        max_value: ext.max.0,
        witness,
        evaluations: ext.evaluations,
    })
}

fn ball_effect(space: &StateSpace, e: f64, dir: &DVector<f64>) -> Effect {
    // Bloch-frame coefficients pulled back to the space's frame.
    let mut b = DVector::zeros(dir.len() + 1);
    b[0] = e;
    b.rows_mut(1, dir.len()).copy_from(&(dir * e));
    let y = match space.ball_view() {
        Some((_, Some(frame))) => frame
            .clone()
            .try_inverse()
            .map(|inv| inv.transpose() * &b)
            .unwrap_or(b),
        _ => b,
    };
    Effect::new(y)
}

fn sphere_search(w: &StateVector, sa: &StateSpace, sb: &StateSpace, seed: u64, ext: &mut Extremes) {
    let (da, fa) = sa.ball_view().expect("ball-like");
    let (db, fb) = sb.ball_view().expect("ball-like");
    // Bring ω into Bloch ⊗ Bloch coordinates.
    let inv = |f: Option<&DMatrix<f64>>, k: usize| {
        f.map(|m| m.clone().try_inverse().expect("invertible frame"))
            .unwrap_or_else(|| DMatrix::identity(k, k))
    };
    let t = inv(fa, da + 1).kronecker(&inv(fb, db + 1));
    let y = &t * &w.coords;
    let kb = db + 1;
    let u = y[0];
    let alpha = DVector::from_fn(da, |i, _| y[(i + 1) * kb]);
    let beta = DVector::from_fn(db, |j, _| y[j + 1]);
    let gamma = DMatrix::from_fn(da, db, |i, j| y[(i + 1) * kb + j + 1]);
    let unit = |sp: &StateSpace| sp.unit_effect().clone();
    let unit_dir = |v: &DVector<f64>| {
        let n = v.norm();
        if n > 1e-15 {
            v / n
        } else {
            let mut e = DVector::zeros(v.len());
            e[0] = 1.0;
            e
        }
    };
    // U ⊗ U, U ⊗ pure, pure ⊗ U, with the partner at its extremes.
    ext.record(u, &unit(sa), &unit(sb));
    for s in [1.0, -1.0] {
        let b = unit_dir(&beta) * s;
        ext.record(0.5 * (u + beta.dot(&b)), &unit(sa), &ball_effect(sb, 0.5, &b));
        let a = unit_dir(&alpha) * s;
        ext.record(0.5 * (u + alpha.dot(&a)), &ball_effect(sa, 0.5, &a), &unit(sb));
    }
    // pure ⊗ pure: f(a, b) = ¼(u + a·α + β·b + aᵀγb), optimized both ways.
    let mut rng = sampling::substream(seed, 0x5EA4);
    let f = |a: &DVector<f64>, b: &DVector<f64>| 0.25 * (u + a.dot(&alpha) + beta.dot(b) + a.dot(&(&gamma * b)));
    let svd = gamma.clone().svd(true, true);
    for sign in [1.0, -1.0] {
        for restart in 0..SPHERE_RESTARTS {
            let mut a = if restart == 0 {
                svd.u.as_ref().map(|m| m.column(0).into_owned()).unwrap_or_else(|| sampling::unit_vector(&mut rng, da))
            } else if restart == 1 {
                unit_dir(&alpha)
            } else {
                sampling::unit_vector(&mut rng, da)
            };
            let mut b = unit_dir(&((gamma.transpose() * &a + &beta) * sign));
            for _ in 0..100 {
                let a_new = unit_dir(&((&gamma * &b + &alpha) * sign));
                let b_new = unit_dir(&((gamma.transpose() * &a_new + &beta) * sign));
                let moved = (&a_new - &a).norm() + (&b_new - &b).norm();
                a = a_new;
                b = b_new;
                if moved < 1e-14 {
                    break;
                }
            }
            ext.record(f(&a, &b), &ball_effect(sa, 0.5, &a), &ball_effect(sb, 0.5, &b));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separability {
    Separable,
    NotProvenSeparable,
}

#[derive(Debug, Clone)]
pub struct SeparabilityVerdict {
    pub verdict: Separability,
    /// L1 residual of the best inner-approximation fit.
    pub residual: f64,
    pub generators: usize,
    /// True when the generator set is the exact vertex-product set.
    pub exact: bool,
}

fn pure_generators(space: &StateSpace, samples: usize, seed: u64, dirs: &[DVector<f64>]) -> Vec<DVector<f64>> {
    if let Some(v) = space.vertex_list() {
        return v;
    }
    let mut out: Vec<DVector<f64>> = Vec::new();
    if let Some((d, _)) = space.ball_view() {
        let mut push_dir = |dir: &DVector<f64>| {
            let n = dir.norm();
            if n < 1e-12 {
                return;
            }
            for s in [1.0, -1.0] {
                let mut y = DVector::zeros(d + 1);
                y[0] = 1.0;
                y.rows_mut(1, d).copy_from(&(dir * (s / n)));
                out.push(space.from_ball_coords(&y).expect("ball-like"));
            }
        };
        for i in 0..d {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            push_dir(&e);
        }
        for dir in dirs {
            push_dir(dir);
        }
    }
    out.extend(space.sample_pure(samples, seed).into_iter().map(|s| s.coords));
    out
}

/// One-sided separability test: exact over vertex products for polytope
/// factors, an inner approximation by sampled product pure states otherwise.
pub fn separable_hull_membership(
    w: &StateVector,
    sa: &StateSpace,
    sb: &StateSpace,
    samples: usize,
    seed: u64,
) -> Result<SeparabilityVerdict> {
    check_len(sa.k() * sb.k(), w.len())?;
    let exact = sa.vertex_list().is_some() && sb.vertex_list().is_some();
    let (mut dirs_a, mut dirs_b) = (Vec::new(), Vec::new());
    if let (Some((da, fa)), Some((db, fb))) = (sa.ball_view(), sb.ball_view()) {
        let inv = |f: Option<&DMatrix<f64>>, k: usize| {
            f.map(|m| m.clone().try_inverse().expect("invertible frame"))
                .unwrap_or_else(|| DMatrix::identity(k, k))
        };
        let y = inv(fa, da + 1).kronecker(&inv(fb, db + 1)) * &w.coords;
        let kb = db + 1;
        dirs_a.push(DVector::from_fn(da, |i, _| y[(i + 1) * kb]));
        dirs_b.push(DVector::from_fn(db, |j, _| y[j + 1]));
        let gamma = DMatrix::from_fn(da, db, |i, j| y[(i + 1) * kb + j + 1]);
        let svd = gamma.svd(true, true);
        if let (Some(u), Some(vt)) = (svd.u, svd.v_t) {
            for c in 0..u.ncols() {
                dirs_a.push(u.column(c).into_owned());
                dirs_b.push(vt.row(c).transpose());
            }
        }
    }
    let per_factor = (samples as f64).sqrt().ceil() as usize;
    let ga = pure_generators(sa, if exact { 0 } else { per_factor }, seed, &dirs_a);
    let gb = pure_generators(sb, if exact { 0 } else { per_factor }, seed ^ 0xB, &dirs_b);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(ga.len() * gb.len());
    for a in &ga {
        for b in &gb {
            points.push(kron_vec(a, b).iter().copied().collect());
        }
    }
    let target: Vec<f64> = w.coords.iter().copied().collect();
    let (residual, _) = lp::l1_residual(&points, &target, Some(Relation::Le));
    let tol = sa.tolerance().max(sb.tolerance()) * w.len() as f64;
    Ok(SeparabilityVerdict {
        verdict: if residual <= tol {
            Separability::Separable
        } else {
            Separability::NotProvenSeparable
        },
        residual,
        generators: points.len(),
        exact,
    })
}

/// Random separable state: a mixture of a few random product states.
pub fn random_separable<R: Rng>(sa: &StateSpace, sb: &StateSpace, rng: &mut R) -> StateVector {
    let terms = 1 + rng.random_range(0..4);
    let weights: Vec<f64> = (0..terms).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = weights.iter().sum::<f64>() / rng.random::<f64>().max(1e-3);
    let mut acc = DVector::zeros(sa.k() * sb.k());
    for w in weights {
        let p = tensor_state(&sa.random_normalized(rng), &sb.random_normalized(rng));
        acc += p.coords * (w / total);
    }
    StateVector::new(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bipartite_round_trip() {
        let s = BipartiteState::singlet();
        let v = s.to_vector();
        assert_eq!(BipartiteState::from_vector(&v, 3).unwrap(), s);
        let b = s.to_block_vector();
        assert_eq!(BipartiteState::from_block_vector(&b, 3).unwrap(), s);
    }

    #[test]
    fn product_value_matches_effect_tensor() {
        let a = StateVector::from_slice(&[1.0, 0.2, -0.3, 0.5]);
        let b = StateVector::from_slice(&[0.7, 0.1, 0.0, -0.6]);
        let w = tensor_state(&a, &b);
        let ea = Effect::from_slice(&[0.5, 0.1, 0.2, 0.3]);
        let eb = Effect::from_slice(&[0.4, 0.0, -0.2, 0.1]);
        let direct = tensor_effect(&ea, &eb).eval(&w);
        assert!((product_value(&w, &ea.coeffs, &eb.coeffs) - direct).abs() < 1e-15);
        assert!((direct - ea.eval(&a) * eb.eval(&b)).abs() < 1e-15);
    }
}
