//! Reversible dynamics: transformation groups, orbit transitivity, the
//! invariant metric and the reparametrization to Bloch form.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::convex::{ExtremePoints, Geometry, StateSpace, StateVector};
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, expm, max_abs};
use crate::sampling;

#[derive(Debug, Clone, PartialEq)]
pub struct Transformation {
    pub matrix: DMatrix<f64>,
}

impl Transformation {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(k: usize) -> Self {
        Self::new(DMatrix::identity(k, k))
    }

    pub fn apply(&self, x: &StateVector) -> Result<StateVector> {
        check_len(self.matrix.ncols(), x.len())?;
        Ok(StateVector::new(&self.matrix * &x.coords))
    }

    /// Applies the map and asserts membership of the image in `target` in
    /// debug builds.
    pub fn apply_into(&self, x: &StateVector, target: &StateSpace) -> Result<StateVector> {
        let y = self.apply(x)?;
        debug_assert!(target.contains(&y).unwrap_or(false), "image left the target space");
        Ok(y)
    }
}

#[derive(Debug, Clone)]
pub enum GroupKind {
    Finite(Vec<DMatrix<f64>>),
    Lie(Vec<DMatrix<f64>>),
    /// block-diag(1, SO(d)) acting in the Bloch frame.
    NamedBall { d: usize },
}

#[derive(Debug, Clone)]
pub struct TransformationGroup {
    kind: GroupKind,
    k: usize,
}

impl TransformationGroup {
    /// Finite group from an explicit element list; closure is verified.
    pub fn finite(elements: Vec<DMatrix<f64>>, tol: f64) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidInput("finite group needs at least one element".into()));
        };
        let k = first.nrows();
        for g in &elements {
            if g.shape() != (k, k) {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: g.nrows(),
                });
            }
        }
        let find = |m: &DMatrix<f64>| elements.iter().any(|g| max_abs(&(g - m)) <= tol.max(1e-9));
        for (i, a) in elements.iter().enumerate() {
            for (j, b) in elements.iter().enumerate() {
                if !find(&(a * b)) {
                    return Err(Error::NotClosed(i, j));
                }
            }
        }
        Ok(Self {
            kind: GroupKind::Finite(elements),
            k,
        })
    }

    /// Finite group whose closure is guaranteed by construction.
    pub(crate) fn finite_trusted(elements: Vec<DMatrix<f64>>) -> Self {
        let k = elements[0].nrows();
        Self {
            kind: GroupKind::Finite(elements),
            k,
        }
    }

    pub fn lie(generators: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::InvalidInput("Lie group needs at least one generator".into()));
        };
        let k = first.nrows();
        for h in &generators {
            if h.shape() != (k, k) {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: h.nrows(),
                });
            }
        }
        Ok(Self {
            kind: GroupKind::Lie(generators),
            k,
        })
    }

    pub fn named_ball(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::OutOfRange("named ball group needs d >= 1".into()));
        }
        Ok(Self {
            kind: GroupKind::NamedBall { d },
            k: d + 1,
        })
    }

    pub fn trivial(k: usize) -> Self {
        Self {
            kind: GroupKind::Finite(vec![DMatrix::identity(k, k)]),
            k,
        }
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Declared by kind: finite groups are disconnected unless trivial.
    pub fn connected(&self) -> bool {
        match &self.kind {
            GroupKind::Finite(el) => {
                el.len() == 1 && max_abs(&(&el[0] - DMatrix::<f64>::identity(self.k, self.k))) == 0.0
            }
            GroupKind::Lie(_) | GroupKind::NamedBall { .. } => true,
        }
    }

    /// Lie-algebra basis for continuous kinds; empty for finite groups.
    pub fn generators(&self) -> Vec<DMatrix<f64>> {
        match &self.kind {
            GroupKind::Finite(_) => vec![],
            GroupKind::Lie(g) => g.clone(),
            GroupKind::NamedBall { d } => so_generators(*d)
                .into_iter()
                .map(|h| embed_generator(&h))
                .collect(),
        }
    }

    pub fn random_element<R: Rng>(&self, rng: &mut R) -> DMatrix<f64> {
        match &self.kind {
            GroupKind::Finite(el) => el[rng.random_range(0..el.len())].clone(),
            GroupKind::NamedBall { d } => embed_rotation(&sampling::random_rotation(rng, *d)),
            GroupKind::Lie(gens) => {
                let mut g = DMatrix::identity(self.k, self.k);
                for _ in 0..3 {
                    let mut a = DMatrix::zeros(self.k, self.k);
                    for h in gens {
                        let t: f64 = rng.sample(rand_distr::StandardNormal);
                        a += h * t;
                    }
                    g = expm(&a) * g;
                }
                g
            }
        }
    }

    /// The group `L G L⁻¹`, as seen after the frame change `x -> L x`.
    pub fn conjugated(&self, l: &DMatrix<f64>) -> Result<Self> {
        check_len(self.k, l.nrows())?;
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("conjugating matrix is singular".into()))?;
        let conj = |m: &DMatrix<f64>| l * m * &l_inv;
        Ok(match &self.kind {
            GroupKind::Finite(el) => Self {
                kind: GroupKind::Finite(el.iter().map(conj).collect()),
                k: self.k,
            },
            _ => Self {
                kind: GroupKind::Lie(self.generators().iter().map(conj).collect()),
                k: self.k,
            },
        })
    }

    /// Applies group elements to sampled states and returns the first state
    /// whose image leaves the space, if any.
    pub fn maps_into(&self, space: &StateSpace, samples: usize, seed: u64) -> Result<Option<StateVector>> {
        check_len(space.k(), self.k)?;
        let mut rng = sampling::substream(seed, 0x6A95);
        let mut states: Vec<StateVector> = match space.extreme_points() {
            ExtremePoints::Finite(v) => v,
            _ => vec![],
        };
        states.extend((0..samples).map(|_| space.random_state(&mut rng)));
        let elements: Vec<DMatrix<f64>> = match &self.kind {
            GroupKind::Finite(el) => el.clone(),
            _ => (0..16).map(|_| self.random_element(&mut rng)).collect(),
        };
        for (i, s) in states.iter().enumerate() {
            let g = &elements[i % elements.len()];
            let y = StateVector::new(g * &s.coords);
            if !space.contains(&y)? {
                return Ok(Some(s.clone()));
            }
            if let GroupKind::Finite(_) = self.kind {
                for g in &elements {
                    if !space.contains(&StateVector::new(g * &s.coords))? {
                        return Ok(Some(s.clone()));
                    }
                }
            }
        }
        Ok(None)
    }
}

/// Basis `E_ij - E_ji` (i < j) of so(d).
pub fn so_generators(d: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut h = DMatrix::zeros(d, d);
            h[(i, j)] = -1.0;
            h[(j, i)] = 1.0;
            out.push(h);
        }
    }
    out
}

/// block-diag(1, R) for a rotation R of the Bloch vector.
pub fn embed_rotation(r: &DMatrix<f64>) -> DMatrix<f64> {
    let d = r.nrows();
    let mut out = DMatrix::zeros(d + 1, d + 1);
    out[(0, 0)] = 1.0;
    out.view_mut((1, 1), (d, d)).copy_from(r);
    out
}

/// block-diag(0, H) for an so(d) generator H.
pub fn embed_generator(h: &DMatrix<f64>) -> DMatrix<f64> {
    let d = h.nrows();
    let mut out = DMatrix::zeros(d + 1, d + 1);
    out.view_mut((1, 1), (d, d)).copy_from(h);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone)]
pub struct ClauseResult {
    pub clause: u8,
    pub status: ClauseStatus,
    pub residual: f64,
    /// State (in the frame the clause is evaluated in) exhibiting the
    /// largest violation.
    pub witness: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct ReversiblePairReport {
    pub clauses: Vec<ClauseResult>,
    /// max |F∘T - I| on sampled states of S₁.
    pub encoding_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl ReversiblePairReport {
    pub fn passed(&self) -> bool {
        self.encoding_residual <= self.tolerance
            && self.clauses.iter().all(|c| c.status != ClauseStatus::Fail)
    }

    pub fn clause(&self, n: u8) -> &ClauseResult {
        &self.clauses[(n - 1) as usize]
    }

    /// Errors with not-an-encoding when `F∘T ≠ I` on S₁.
    pub fn require_encoding(&self) -> Result<()> {
        if self.encoding_residual > self.tolerance {
            Err(Error::NotAnEncoding {
                residual: self.encoding_residual,
            })
        } else {
            Ok(())
        }
    }
}

fn state_pool(space: &StateSpace, samples: usize, seed: u64) -> Vec<StateVector> {
    let mut rng = sampling::substream(seed, 0x1E11);
    let mut pool: Vec<StateVector> = match space.extreme_points() {
        ExtremePoints::Finite(v) => v,
        _ => space.sample_pure(samples.min(64), seed),
    };
    pool.extend((0..samples).map(|_| space.random_state(&mut rng)));
    pool
}

fn track(best: &mut (f64, Option<DVector<f64>>), residual: f64, x: &DVector<f64>) {
    if residual > best.0 {
        *best = (residual, Some(x.clone()));
    }
}

fn clause(n: u8, best: (f64, Option<DVector<f64>>), tol: f64) -> ClauseResult {
    let status = if best.0 <= tol { ClauseStatus::Pass } else { ClauseStatus::Fail };
    ClauseResult {
        clause: n,
        status,
        residual: best.0,
        witness: if status == ClauseStatus::Fail { best.1 } else { None },
    }
}

/// Checks the five properties of a reversible encoding pair
/// `T: S₁ → S₂`, `F: S₂ → S₁` numerically.
pub fn check_reversible_pair(
    t: &Transformation,
    f: &Transformation,
    s1: &StateSpace,
    s2: &StateSpace,
    samples: usize,
    seed: u64,
) -> Result<ReversiblePairReport> {
    let (k1, k2) = (s1.k(), s2.k());
    check_len(k1, t.matrix.ncols())?;
    check_len(k2, t.matrix.nrows())?;
    check_len(k2, f.matrix.ncols())?;
    check_len(k1, f.matrix.nrows())?;
    let tol = s1.tolerance().max(s2.tolerance());
    let pool = state_pool(s1, samples, seed);
    let u1 = &s1.unit_effect().coeffs;
    let u2 = &s2.unit_effect().coeffs;

    let mut enc = (0.0, None);
    let mut c2 = (0.0, None);
    let mut c3 = (0.0, None);
    let mut c4 = (0.0, None);
    for s in &pool {
        let x = &s.coords;
        let tx = &t.matrix * x;
        let ftx = &f.matrix * &tx;
        track(&mut enc, (&ftx - x).amax(), x);
        track(&mut c2, (u2.dot(&tx) - u1.dot(x)).abs(), x);
        track(&mut c3, (u1.dot(&ftx) - u2.dot(&tx)).abs(), &tx);
        track(&mut c4, ((&t.matrix * &ftx) - &tx).amax(), &tx);
    }
    // Clause 2 is also asserted literally on the functional U₂∘T - U₁.
    let functional = t.matrix.transpose() * u2 - u1;
    if functional.amax() > c2.0 {
        c2.0 = functional.amax();
    }

    let c1 = ClauseResult {
        clause: 1,
        status: if k1 <= k2 { ClauseStatus::Pass } else { ClauseStatus::Fail },
        residual: if k1 <= k2 { 0.0 } else { (k1 - k2) as f64 },
        witness: None,
    };
    let c5 = if k1 == k2 {
        let mut best = (0.0, None);
        for s in &pool {
            let tx = StateVector::new(&t.matrix * &s.coords);
            if !s2.contains(&tx)? {
                track(&mut best, 1.0, &s.coords);
            }
        }
        for s in state_pool(s2, samples, seed ^ 0xA5A5) {
            let fx = StateVector::new(&f.matrix * &s.coords);
            let back = &t.matrix * &fx.coords;
            let r = (&back - &s.coords).amax();
            let inside = s1.contains(&fx)?;
            let r = if inside { r } else { r.max(1.0) };
            track(&mut best, r, &s.coords);
        }
        clause(5, best, tol)
    } else {
        ClauseResult {
            clause: 5,
            status: ClauseStatus::NotApplicable,
            residual: 0.0,
            witness: None,
        }
    };
    Ok(ReversiblePairReport {
        clauses: vec![c1, clause(2, c2, tol), clause(3, c3, tol), clause(4, c4, tol), c5],
        encoding_residual: enc.0,
        tolerance: tol,
        samples: pool.len(),
    })
}

#[derive(Debug, Clone)]
pub struct OrbitVerdict {
    pub transitive: bool,
    pub connected: bool,
    pub pairs_checked: usize,
    pub max_residual: f64,
    pub witness: Option<(StateVector, StateVector)>,
    pub method: &'static str,
}

/// Pair budget for continuous groups; each pair needs an iterative solve.
pub const ORBIT_PAIR_CAP: usize = 200;
/// Reachability threshold for the Lie-kind least-squares search.
pub const ORBIT_RESIDUAL: f64 = 1e-7;

/// Tests transitivity of the group on the pure states of `space`.
pub fn orbit_transitive(
    group: &TransformationGroup,
    space: &StateSpace,
    seed: u64,
    samples: usize,
) -> Result<OrbitVerdict> {
    check_len(space.k(), group.k())?;
    let mut pairs: Vec<(StateVector, StateVector)> = Vec::new();
    match space.extreme_points() {
        ExtremePoints::Finite(v) => {
            for a in &v {
                for b in &v {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
        _ => {
            if let Some((d, _)) = space.ball_view() {
                let mut p = DVector::zeros(d + 1);
                p[0] = 1.0;
                p[d] = 1.0;
                let mut q = p.clone();
                q[d] = -1.0;
                let map = |y: DVector<f64>| StateVector::new(space.from_ball_coords(&y).expect("ball-like"));
                pairs.push((map(p), map(q)));
            }
            let budget = samples.min(ORBIT_PAIR_CAP).max(1);
            let pure = space.sample_pure(2 * budget, seed);
            for c in pure.chunks(2) {
                pairs.push((c[0].clone(), c[1].clone()));
            }
        }
    }
    let mut rng = sampling::substream(seed, 0x0B17);
    let (method, tol) = match group.kind() {
        GroupKind::Finite(_) => ("exhaustive", space.tolerance() * 10.0),
        GroupKind::NamedBall { .. } => ("constructive-rotation", space.tolerance() * 10.0),
        GroupKind::Lie(_) => ("tangent-least-squares", ORBIT_RESIDUAL),
    };
    let weight = match group.kind() {
        GroupKind::Lie(_) => lie_weight(group, seed),
        _ => DMatrix::identity(group.k(), group.k()),
    };
    let mut max_residual: f64 = 0.0;
    for (a, b) in &pairs {
        let r = match group.kind() {
            GroupKind::Finite(el) => el
                .iter()
                .map(|g| (g * &a.coords - &b.coords).amax())
                .fold(f64::INFINITY, f64::min),
            GroupKind::NamedBall { d } => named_reach(*d, space, a, b),
            GroupKind::Lie(gens) => lie_reach(gens, &weight, a, b, &mut rng),
        };
        max_residual = max_residual.max(r);
        if r > tol {
            return Ok(OrbitVerdict {
                transitive: false,
                connected: group.connected(),
                pairs_checked: pairs.len(),
                max_residual,
                witness: Some((a.clone(), b.clone())),
                method,
            });
        }
    }
    Ok(OrbitVerdict {
        transitive: true,
        connected: group.connected(),
        pairs_checked: pairs.len(),
        max_residual,
        witness: None,
        method,
    })
}

/// Smallest residual `|G a - b|∞` found for a single pair, by the same method
/// `orbit_transitive` uses for the group kind.
pub fn reach_residual(
    group: &TransformationGroup,
    space: &StateSpace,
    a: &StateVector,
    b: &StateVector,
    seed: u64,
) -> f64 {
    match group.kind() {
        GroupKind::Finite(el) => el
            .iter()
            .map(|g| (g * &a.coords - &b.coords).amax())
            .fold(f64::INFINITY, f64::min),
        GroupKind::NamedBall { d } => named_reach(*d, space, a, b),
        GroupKind::Lie(gens) => {
            let w = lie_weight(group, seed);
            lie_reach(gens, &w, a, b, &mut sampling::substream(seed, 0x0B17))
        }
    }
}

fn named_reach(d: usize, space: &StateSpace, a: &StateVector, b: &StateVector) -> f64 {
    if !matches!(space.geometry(), Geometry::Ball { .. } | Geometry::Quantum { qubits: 1 }) || space.k() != d + 1 {
        return f64::INFINITY;
    }
    let ua = a.coords[0];
    let ub = b.coords[0];
    if ua <= 0.0 || ub <= 0.0 {
        return f64::INFINITY;
    }
    let va = a.coords.rows(1, d).into_owned() / ua;
    let vb = b.coords.rows(1, d).into_owned() / ub;
    let (na, nb) = (va.norm(), vb.norm());
    if na < 1e-12 || nb < 1e-12 {
        return (&a.coords - &b.coords).amax();
    }
    let r = linalg::rotation_between(&(va / na), &(vb / nb));
    let g = embed_rotation(&r);
    (g * &a.coords - &b.coords).amax()
}

/// Least-squares weight for the reach search: the invariant form when one
/// exists, so that orbits are round spheres and the search has no spurious
/// local minima; the identity otherwise.
fn lie_weight(group: &TransformationGroup, seed: u64) -> DMatrix<f64> {
    commutant_metric(group, seed)
        .ok()
        .and_then(|w2| linalg::spd_sqrt(&w2))
        .unwrap_or_else(|| DMatrix::identity(group.k(), group.k()))
}

const LIE_START_POOL: usize = 64;
const LIE_RESTARTS: usize = 8;

/// Gauss-Newton search for `G = exp(ΣtH)` with `G a = b`, with restarts.
fn lie_reach<R: Rng>(
    gens: &[DMatrix<f64>],
    weight: &DMatrix<f64>,
    a: &StateVector,
    b: &StateVector,
    rng: &mut R,
) -> f64 {
    let k = a.len();
    let mut best = f64::INFINITY;
    // Starting points: the identity plus the random elements that land
    // closest to the target.
    let mut starts: Vec<(f64, DMatrix<f64>)> = vec![(0.0, DMatrix::identity(k, k))];
    let mut pool: Vec<(f64, DMatrix<f64>)> = (0..LIE_START_POOL)
        .map(|_| {
            let mut h = DMatrix::zeros(k, k);
            for gen in gens {
                h += gen * rng.sample::<f64, _>(rand_distr::StandardNormal);
            }
            let g = expm(&h);
            ((weight * (&b.coords - &g * &a.coords)).norm(), g)
        })
        .collect();
    pool.sort_by(|x, y| x.0.total_cmp(&y.0));
    starts.extend(pool.into_iter().take(LIE_RESTARTS - 1));
    for (_, start) in starts {
        let mut g = start;
        let mut x = &g * &a.coords;
        let mut res = (weight * (&b.coords - &x)).norm();
        for _ in 0..60 {
            if res < ORBIT_RESIDUAL * 1e-3 {
                break;
            }
            let j = DMatrix::from_columns(&gens.iter().map(|h| weight * (h * &x)).collect::<Vec<_>>());
            let r = weight * (&b.coords - &x);
            let Ok(delta) = j.clone().svd(true, true).solve(&r, 1e-12) else {
                break;
            };
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..20 {
                let mut h = DMatrix::zeros(k, k);
                for (gen, dt) in gens.iter().zip(delta.iter()) {
                    h += gen * (dt * step);
                }
                let g_new = expm(&h) * &g;
                let x_new = &g_new * &a.coords;
                let res_new = (weight * (&b.coords - &x_new)).norm();
                if res_new < res {
                    g = g_new;
                    x = x_new;
                    res = res_new;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let r = (&b.coords - &x).amax();
        best = best.min(r);
        if best < ORBIT_RESIDUAL {
            break;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct InvariantMetric {
    pub w: DMatrix<f64>,
    pub w_squared: DMatrix<f64>,
    /// Common norm |Wω| of pure states.
    pub r: f64,
    /// Relative spread of |Wω| over the sampled pure states.
    pub spread: f64,
}

/// Exact group average `(1/|G|) Σ GᵀG` for finite groups.
pub fn haar_average_metric(group: &TransformationGroup) -> Result<DMatrix<f64>> {
    let GroupKind::Finite(el) = group.kind() else {
        return Err(Error::InvalidInput("exact averaging needs a finite group".into()));
    };
    let mut acc = DMatrix::zeros(group.k(), group.k());
    for g in el {
        acc += g.transpose() * g;
    }
    Ok(acc / el.len() as f64)
}

/// Largest ambient dimension accepted by the dense commutant solver.
pub const COMMUTANT_MAX_K: usize = 32;

/// Group elements whose constraints are stacked before each reduction.
const COMMUTANT_BATCH: usize = 32;

/// `Σ Vᵀ` restricted to the numerically non-zero singular values.
fn row_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (s, v) = linalg::svd_right(m);
    let cut = 1e-13 * s.first().copied().unwrap_or(0.0);
    let r = s.iter().filter(|&&x| x > cut).count();
    DMatrix::from_fn(r, m.ncols(), |i, j| s[i] * v[(j, i)])
}

/// Orthonormal (Frobenius) basis of symmetric `X` with `HᵀX + XH = 0` for all
/// generators (continuous kinds) or `GᵀXG = X` for all elements (finite).
pub fn commutant_basis(group: &TransformationGroup) -> Result<Vec<DMatrix<f64>>> {
    let k = group.k();
    if k > COMMUTANT_MAX_K {
        return Err(Error::TooLarge(format!(
            "commutant solver supports k <= {COMMUTANT_MAX_K}, got {k}"
        )));
    }
    let mut basis = Vec::new();
    for a in 0..k {
        for b in a..k {
            let mut e = DMatrix::zeros(k, k);
            e[(a, b)] = 1.0;
            e[(b, a)] = 1.0;
            basis.push(e);
        }
    }
    let ops: Vec<Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64>>> = match group.kind() {
        GroupKind::Finite(el) => el
            .iter()
            .map(|g| {
                let g = g.clone();
                Box::new(move |x: &DMatrix<f64>| g.transpose() * x * &g - x) as Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64>>
            })
            .collect(),
        _ => group
            .generators()
            .into_iter()
            .map(|h| {
                Box::new(move |x: &DMatrix<f64>| h.transpose() * x + x * &h) as Box<dyn Fn(&DMatrix<f64>) -> DMatrix<f64>>
            })
            .collect(),
    };
    let nvar = basis.len();
    let rows_per = nvar;
    // Constraints are stacked a batch at a time and reduced to their row
    // space, so large finite groups never build the full system.
    let mut a = DMatrix::zeros(0, nvar);
    for batch in ops.chunks(COMMUTANT_BATCH) {
        let mut m = DMatrix::zeros(a.nrows() + batch.len() * rows_per, nvar);
        m.view_mut((0, 0), (a.nrows(), nvar)).copy_from(&a);
        let offset = a.nrows();
        for (col, e) in basis.iter().enumerate() {
            for (o, op) in batch.iter().enumerate() {
                let y = op(e);
                let mut r = 0;
                for i in 0..k {
                    for j in i..k {
                        m[(offset + o * rows_per + r, col)] = y[(i, j)];
                        r += 1;
                    }
                }
            }
        }
        a = if ops.len() <= COMMUTANT_BATCH { m } else { row_space(&m) };
    }
    let (null, _) = linalg::null_space(&a, 1e-10);
    let mats: Vec<DMatrix<f64>> = (0..null.ncols())
        .map(|c| {
            let mut x = DMatrix::zeros(k, k);
            for (v, e) in null.column(c).iter().zip(&basis) {
                x += e * *v;
            }
            x
        })
        .collect();
    // Frobenius orthonormalization.
    let flat = DMatrix::from_columns(
        &mats
            .iter()
            .map(|m| DVector::from_column_slice(m.as_slice()))
            .collect::<Vec<_>>(),
    );
    if flat.ncols() == 0 {
        return Ok(vec![]);
    }
    let q = linalg::orthonormal_columns(&flat, 1e-10);
    Ok((0..q.ncols())
        .map(|c| DMatrix::from_column_slice(k, k, q.column(c).as_slice()))
        .collect())
}

fn project(basis: &[DMatrix<f64>], target: &DMatrix<f64>) -> DMatrix<f64> {
    let k = target.nrows();
    let mut x = DMatrix::zeros(k, k);
    for b in basis {
        x += b * b.dot(target);
    }
    (&x + x.transpose()) * 0.5
}

fn is_pd(x: &DMatrix<f64>) -> bool {
    x.clone().symmetric_eigen().eigenvalues.min() > 1e-12 * max_abs(x).max(1e-300)
}

/// Invariant form from the commutant null space: the Frobenius projection of
/// the identity, or of a sampled group average when that projection is not
/// positive definite. The result is exactly invariant either way.
pub fn commutant_metric(group: &TransformationGroup, seed: u64) -> Result<DMatrix<f64>> {
    let basis = commutant_basis(group)?;
    if basis.is_empty() {
        return Err(Error::NoInvariantMetric);
    }
    let k = group.k();
    let x = project(&basis, &DMatrix::identity(k, k));
    if is_pd(&x) {
        return Ok(x);
    }
    let mut rng = sampling::substream(seed, 0xC0);
    let mut avg = DMatrix::zeros(k, k);
    for _ in 0..64 {
        let g = group.random_element(&mut rng);
        avg += g.transpose() * &g;
    }
    let x = project(&basis, &avg);
    if is_pd(&x) {
        Ok(x)
    } else {
        Err(Error::NoInvariantMetric)
    }
}

/// Invariant metric `W` (with `W²` invariant under the group) and the common
/// pure-state norm `r = |Wω|`.
pub fn invariant_metric(
    group: &TransformationGroup,
    space: &StateSpace,
    seed: u64,
) -> Result<InvariantMetric> {
    check_len(space.k(), group.k())?;
    let w2 = match group.kind() {
        GroupKind::Finite(_) => haar_average_metric(group)?,
        _ => commutant_metric(group, seed)?,
    };
    let w = linalg::spd_sqrt(&w2).ok_or(Error::NoInvariantMetric)?;
    let pure: Vec<StateVector> = match space.extreme_points() {
        ExtremePoints::Finite(v) => v,
        _ => space.sample_pure(256, seed),
    };
    let norms: Vec<f64> = pure.iter().map(|p| (&w * &p.coords).norm()).collect();
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    let spread = (max - min) / mean;
    if spread > 1e-8 {
        return Err(Error::UnequalPureNorms { spread });
    }
    Ok(InvariantMetric {
        w,
        w_squared: w2,
        r: mean,
        spread,
    })
}

/// Dimension of the common fixed space of the group.
pub fn trivial_multiplicity(group: &TransformationGroup) -> usize {
    let k = group.k();
    let blocks: Vec<DMatrix<f64>> = match group.kind() {
        GroupKind::Finite(el) => el.iter().map(|g| g - DMatrix::<f64>::identity(k, k)).collect(),
        _ => group.generators(),
    };
    let mut stacked = DMatrix::zeros(blocks.len() * k, k);
    for (i, b) in blocks.iter().enumerate() {
        stacked.view_mut((i * k, 0), (k, k)).copy_from(b);
    }
    if max_abs(&stacked) == 0.0 {
        return k;
    }
    let (null, _) = linalg::null_space(&stacked, 1e-9);
    null.ncols()
}

#[derive(Debug, Clone)]
pub struct BlochForm {
    pub space: StateSpace,
    pub group: TransformationGroup,
    /// Frame change `L`: new coordinates are `L x`.
    pub frame_map: DMatrix<f64>,
    pub metric: InvariantMetric,
    /// max | |ω̂| - 1 | over sampled pure states in the new frame.
    pub max_norm_deviation: f64,
    /// Largest departure of the new group from block-diag(1, orthogonal).
    pub block_residual: f64,
}

/// Reparametrizes `(space, group)` so that states read `(u, u ω̂)`, the unit
/// effect is `(1, 0)` and the group acts as block-diag(1, orthogonal).
pub fn bloch_form(space: &StateSpace, group: &TransformationGroup, seed: u64) -> Result<BlochForm> {
    let k = space.k();
    if k < 3 {
        return Err(Error::OutOfRange("Bloch form needs d = k - 1 >= 2".into()));
    }
    let metric = invariant_metric(group, space, seed)?;
    let mult = trivial_multiplicity(group);
    if mult != 1 {
        return Err(Error::TrivialMultiplicity(mult));
    }
    let w_inv = metric.w.clone().try_inverse().ok_or(Error::NoInvariantMetric)?;
    let u_row = w_inv.transpose() * &space.unit_effect().coeffs;
    let u_norm = u_row.norm();
    let q = linalg::rotation_to_e0(&u_row);
    let rho2 = metric.r * metric.r - 1.0 / (u_norm * u_norm);
    if rho2 <= 0.0 {
        return Err(Error::UnequalPureNorms { spread: rho2 });
    }
    let rho = rho2.sqrt();
    let mut scale = DMatrix::identity(k, k) / rho;
    scale[(0, 0)] = u_norm;
    let l = scale * q * &metric.w;
    let new_group = group.conjugated(&l)?;
    let block_residual = block_residual(&new_group);

    let pure: Vec<StateVector> = match space.extreme_points() {
        ExtremePoints::Finite(v) => v,
        _ => space.sample_pure(512, seed ^ 0xB10C),
    };
    let mapped: Vec<DVector<f64>> = pure.iter().map(|p| &l * &p.coords).collect();
    let max_norm_deviation = mapped
        .iter()
        .map(|y| (y.rows(1, k - 1).norm() / y[0] - 1.0).abs())
        .fold(0.0, f64::max);
    if max_norm_deviation > 1e-7 {
        return Err(Error::UnequalPureNorms {
            spread: max_norm_deviation,
        });
    }
    let new_space = match space.geometry() {
        Geometry::Ball { .. } | Geometry::Ellipsoid { .. } | Geometry::Quantum { qubits: 1 } => {
            StateSpace::ball(k - 1)?
        }
        Geometry::Simplex { .. } | Geometry::Polytope { .. } => {
            let mut unit = DVector::zeros(k);
            unit[0] = 1.0;
            StateSpace::polytope(mapped, crate::convex::Effect::new(unit))?
        }
        Geometry::Quantum { .. } => {
            return Err(Error::UnsupportedGeometry(
                "Bloch form of multi-qubit spaces is not a ball".into(),
            ))
        }
    }
    .with_tolerance(space.tolerance());
    Ok(BlochForm {
        space: new_space,
        group: new_group,
        frame_map: l,
        metric,
        max_norm_deviation,
        block_residual,
    })
}

fn block_residual(group: &TransformationGroup) -> f64 {
    let k = group.k();
    match group.kind() {
        GroupKind::Finite(el) => el
            .iter()
            .map(|g| {
                let mut m = g.clone();
                m[(0, 0)] -= 1.0;
                let corner = m.row(0).amax().max(m.column(0).amax());
                let b = g.view((1, 1), (k - 1, k - 1));
                let orth = (b.transpose() * b - DMatrix::<f64>::identity(k - 1, k - 1)).amax();
                corner.max(orth)
            })
            .fold(0.0, f64::max),
        _ => group
            .generators()
            .iter()
            .map(|h| {
                let scale = max_abs(h).max(1e-300);
                let corner = h.row(0).amax().max(h.column(0).amax());
                let anti = max_abs(&(h + h.transpose()));
                corner.max(anti) / scale
            })
            .fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so3_embedding_is_block() {
        let g = TransformationGroup::named_ball(3).unwrap();
        for h in g.generators() {
            assert_eq!(h.row(0).amax(), 0.0);
            assert_eq!(max_abs(&(&h + h.transpose())), 0.0);
        }
        assert_eq!(trivial_multiplicity(&g), 1);
    }

    #[test]
    fn trivial_group_has_full_fixed_space() {
        assert_eq!(trivial_multiplicity(&TransformationGroup::trivial(4)), 4);
        assert!(TransformationGroup::trivial(4).connected());
    }
}
