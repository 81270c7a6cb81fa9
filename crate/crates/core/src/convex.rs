//! Convex state spaces, states, effects and measurements.
//!
//! A state space is stored as its set of normalized states `N` together with
//! the unit effect `U`; the unnormalized states are `conv({0} ∪ N)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::lp::{self, LinearProgram, Relation};
use crate::pauli::{self, PauliBasis, C64};
use crate::sampling;
use crate::DEFAULT_TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// Coordinates are outcome probabilities of fiducial measurements.
    Fiducial,
    /// Any invertible linear recombination of fiducial coordinates.
    Reparametrized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coords: DVector<f64>,
    pub frame: Frame,
}

impl StateVector {
    pub fn new(coords: DVector<f64>) -> Self {
        Self {
            coords,
            frame: Frame::Reparametrized,
        }
    }

    pub fn fiducial(coords: DVector<f64>) -> Self {
        Self {
            coords,
            frame: Frame::Fiducial,
        }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(v))
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(DVector::zeros(k))
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coords: &self.coords * s,
            frame: self.frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub coeffs: DVector<f64>,
}

impl Effect {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(v))
    }

    /// Bloch-frame effect `(e, Ê)`.
    pub fn bloch(e: f64, e_hat: &[f64]) -> Self {
        let mut c = vec![e];
        c.extend_from_slice(e_hat);
        Self::from_slice(&c)
    }

    pub fn zero(k: usize) -> Self {
        Self::new(DVector::zeros(k))
    }

    pub fn eval(&self, x: &StateVector) -> f64 {
        self.coeffs.dot(&x.coords)
    }

    /// Scalar part `e` in the Bloch frame.
    pub fn e(&self) -> f64 {
        self.coeffs[0]
    }

    /// Vector part `Ê` in the Bloch frame.
    pub fn e_hat(&self) -> DVector<f64> {
        self.coeffs.rows(1, self.coeffs.len() - 1).into_owned()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub effects: Vec<Effect>,
}

impl Measurement {
    /// Builds a measurement, checking that the effects sum to `unit`.
    pub fn new(effects: Vec<Effect>, unit: &Effect, tol: f64) -> Result<Self> {
        let mut sum = DVector::zeros(unit.len());
        for e in &effects {
            check_len(unit.len(), e.len())?;
            sum += &e.coeffs;
        }
        let dev = (sum - &unit.coeffs).amax();
        if dev > tol {
            return Err(Error::InvalidInput(format!(
                "effects sum to U only up to {dev:e}"
            )));
        }
        Ok(Self { effects })
    }
}

#[derive(Debug, Clone)]
pub enum Geometry {
    Simplex { n: usize },
    /// Normalized extreme points given explicitly (V-representation).
    Polytope { vertices: Vec<DVector<f64>> },
    /// Unit ball in the Bloch frame: states `(u, u ω̂)` with `|ω̂| <= 1`.
    Ball { d: usize },
    /// Image of the Bloch ball under an invertible frame change.
    Ellipsoid {
        d: usize,
        frame: DMatrix<f64>,
        frame_inv: DMatrix<f64>,
    },
    /// n-qubit states in the real Pauli-word coefficient frame.
    Quantum { qubits: usize },
}

impl Geometry {
    pub fn kind(&self) -> &'static str {
        match self {
            Geometry::Simplex { .. } => "simplex",
            Geometry::Polytope { .. } => "polytope",
            Geometry::Ball { .. } => "ball",
            Geometry::Ellipsoid { .. } => "ellipsoid",
            Geometry::Quantum { .. } => "quantum",
        }
    }
}

/// Extreme points of `N`: listed for polytopes, symbolic otherwise.
#[derive(Debug, Clone)]
pub enum ExtremePoints {
    Finite(Vec<StateVector>),
    /// Unit sphere `S^{d-1}` of Bloch vectors, mapped through `frame` if any.
    Sphere { d: usize },
    RankOneProjectors { qubits: usize },
}

#[derive(Debug, Clone)]
pub struct Distinguishability {
    pub c: usize,
    /// Indices into the candidate list of the distinguished subset.
    pub subset: Vec<usize>,
    pub witness: Option<Measurement>,
    /// True when the greedy search was used, so `c` is only a lower bound.
    pub lower_bound: bool,
}

pub const EXHAUSTIVE_CUTOFF: usize = 12;

#[derive(Debug, Clone)]
pub struct StateSpace {
    k: usize,
    geometry: Geometry,
    unit: Effect,
    tol: f64,
    frame: Frame,
    pauli: Option<Arc<PauliBasis>>,
}

fn unit_e0(k: usize) -> Effect {
    let mut u = DVector::zeros(k);
    u[0] = 1.0;
    Effect::new(u)
}

impl StateSpace {
    pub fn simplex(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange("simplex needs n >= 1".into()));
        }
        Ok(Self {
            k: n,
            geometry: Geometry::Simplex { n },
            unit: Effect::new(DVector::from_element(n, 1.0)),
            tol: DEFAULT_TOLERANCE,
            frame: Frame::Fiducial,
            pauli: None,
        })
    }

    pub fn ball(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::OutOfRange("ball needs d >= 1".into()));
        }
        Ok(Self {
            k: d + 1,
            geometry: Geometry::Ball { d },
            unit: unit_e0(d + 1),
            tol: DEFAULT_TOLERANCE,
            frame: Frame::Reparametrized,
            pauli: None,
        })
    }

    /// Ball image under `frame`: a state `x` belongs iff `frame⁻¹ x` lies in
    /// the Bloch ball.
    pub fn ellipsoid(frame: DMatrix<f64>) -> Result<Self> {
        let k = frame.nrows();
        if frame.ncols() != k || k < 2 {
            return Err(Error::InvalidInput("ellipsoid frame must be square, k >= 2".into()));
        }
        let frame_inv = frame
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("ellipsoid frame is singular".into()))?;
        let unit = Effect::new(frame_inv.row(0).transpose());
        Ok(Self {
            k,
            geometry: Geometry::Ellipsoid {
                d: k - 1,
                frame,
                frame_inv,
            },
            unit,
            tol: DEFAULT_TOLERANCE,
            frame: Frame::Reparametrized,
            pauli: None,
        })
    }

    /// Fiducial-frame qubit: coordinates are the probabilities of the
    /// outcomes σx = +1, σy = +1, σz = +1, σz = -1.
    pub fn qubit_fiducial() -> Self {
        let mut s = Self::ellipsoid(qubit_fiducial_frame()).expect("invertible frame");
        s.frame = Frame::Fiducial;
        s
    }

    pub fn quantum(qubits: usize) -> Result<Self> {
        if qubits == 0 || qubits > 3 {
            return Err(Error::OutOfRange(format!(
                "quantum space supports 1..=3 qubits, got {qubits}"
            )));
        }
        let k = 1 << (2 * qubits);
        Ok(Self {
            k,
            geometry: Geometry::Quantum { qubits },
            unit: unit_e0(k),
            tol: DEFAULT_TOLERANCE,
            frame: Frame::Reparametrized,
            pauli: Some(Arc::new(PauliBasis::new(qubits))),
        })
    }

    /// Polytope from normalized vertices and the unit effect. Vertices must
    /// span the ambient space and satisfy `U(v) = 1`.
    pub fn polytope(vertices: Vec<DVector<f64>>, unit: Effect) -> Result<Self> {
        let k = unit.len();
        if vertices.is_empty() {
            return Err(Error::InvalidInput("polytope needs at least one vertex".into()));
        }
        for v in &vertices {
            check_len(k, v.len())?;
            let uv = unit.coeffs.dot(v);
            if (uv - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "vertex is not normalized: U(v) = {uv}"
                )));
            }
        }
        let m = DMatrix::from_columns(&vertices);
        let r = crate::linalg::rank(&m, 1e-10);
        if r != k {
            return Err(Error::InvalidInput(format!(
                "vertices span dimension {r}, ambient dimension is {k}"
            )));
        }
        Ok(Self {
            k,
            geometry: Geometry::Polytope { vertices },
            unit,
            tol: DEFAULT_TOLERANCE,
            frame: Frame::Reparametrized,
            pauli: None,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn unit_effect(&self) -> &Effect {
        &self.unit
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn pauli(&self) -> Option<&PauliBasis> {
        self.pauli.as_deref()
    }

    /// Bloch-ball view: `(d, frame)` for spaces that are (images of) a ball.
    /// The single-qubit Pauli frame is literally the Bloch frame.
    pub fn ball_view(&self) -> Option<(usize, Option<&DMatrix<f64>>)> {
        match &self.geometry {
            Geometry::Ball { d } => Some((*d, None)),
            Geometry::Quantum { qubits: 1 } => Some((3, None)),
            Geometry::Ellipsoid { d, frame, .. } => Some((*d, Some(frame))),
            _ => None,
        }
    }

    /// Maps coordinates of a ball-like space into the Bloch frame.
    pub fn to_ball_coords(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.geometry {
            Geometry::Ball { .. } | Geometry::Quantum { qubits: 1 } => Some(x.clone()),
            Geometry::Ellipsoid { frame_inv, .. } => Some(frame_inv * x),
            _ => None,
        }
    }

    pub fn from_ball_coords(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.geometry {
            Geometry::Ball { .. } | Geometry::Quantum { qubits: 1 } => Some(y.clone()),
            Geometry::Ellipsoid { frame, .. } => Some(frame * y),
            _ => None,
        }
    }

    /// Effect coefficients in the Bloch frame for a ball-like space.
    pub fn effect_to_ball(&self, e: &Effect) -> Option<DVector<f64>> {
        match &self.geometry {
            Geometry::Ball { .. } | Geometry::Quantum { qubits: 1 } => Some(e.coeffs.clone()),
            Geometry::Ellipsoid { frame, .. } => Some(frame.transpose() * &e.coeffs),
            _ => None,
        }
    }

    pub fn effect_from_ball(&self, b: &DVector<f64>) -> Option<Effect> {
        match &self.geometry {
            Geometry::Ball { .. } | Geometry::Quantum { qubits: 1 } => Some(Effect::new(b.clone())),
            Geometry::Ellipsoid { frame_inv, .. } => {
                Some(Effect::new(frame_inv.transpose() * b))
            }
            _ => None,
        }
    }

    /// Vertices of N for polytope-like geometries (simplex included).
    pub fn vertex_list(&self) -> Option<Vec<DVector<f64>>> {
        match &self.geometry {
            Geometry::Simplex { n } => Some(
                (0..*n)
                    .map(|i| {
                        let mut v = DVector::zeros(*n);
                        v[i] = 1.0;
                        v
                    })
                    .collect(),
            ),
            Geometry::Polytope { vertices } => Some(vertices.clone()),
            _ => None,
        }
    }

    fn state(&self, coords: DVector<f64>) -> StateVector {
        StateVector {
            coords,
            frame: self.frame,
        }
    }

    /// Decides `x ∈ conv({0} ∪ N)` within the space tolerance.
    pub fn contains(&self, x: &StateVector) -> Result<bool> {
        check_len(self.k, x.len())?;
        let tol = self.tol;
        let c = &x.coords;
        Ok(match &self.geometry {
            Geometry::Simplex { .. } => c.iter().all(|&v| v >= -tol) && c.sum() <= 1.0 + tol,
            Geometry::Polytope { vertices } => {
                let pts: Vec<Vec<f64>> = vertices.iter().map(|v| v.iter().copied().collect()).collect();
                let b: Vec<f64> = c.iter().copied().collect();
                let (res, _) = lp::l1_residual(&pts, &b, Some(Relation::Le));
                res <= tol * self.k as f64
            }
            Geometry::Ball { .. } => ball_contains(c, tol),
            Geometry::Ellipsoid { frame_inv, .. } => ball_contains(&(frame_inv * c), tol),
            Geometry::Quantum { .. } => {
                let basis = self.pauli.as_ref().expect("quantum basis");
                let ev = pauli::hermitian_eigenvalues(&basis.density(c));
                ev[0] >= -tol && c[0] <= 1.0 + tol
            }
        })
    }

    /// `(u, ν)` with `u = U(x)` and `ν = x / u`, `ν` absent when `u = 0`.
    pub fn decompose(&self, x: &StateVector) -> Result<(f64, Option<StateVector>)> {
        if !self.contains(x)? {
            return Err(Error::InvalidState("not a member of the state space".into()));
        }
        let u = self.unit.eval(x);
        if u <= self.tol {
            Ok((u.max(0.0), None))
        } else {
            Ok((u, Some(x.scaled(1.0 / u))))
        }
    }

    /// Minimum and maximum of a linear functional over the normalized states.
    pub fn effect_range(&self, e: &Effect) -> Result<(f64, f64)> {
        check_len(self.k, e.len())?;
        Ok(match &self.geometry {
            Geometry::Simplex { .. } => (e.coeffs.min(), e.coeffs.max()),
            Geometry::Polytope { vertices } => vertices.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| {
                    let x = e.coeffs.dot(v);
                    (lo.min(x), hi.max(x))
                },
            ),
            Geometry::Ball { .. } | Geometry::Ellipsoid { .. } | Geometry::Quantum { qubits: 1 } => {
                let b = self.effect_to_ball(e).expect("ball-like");
                let r = b.rows(1, b.len() - 1).norm();
                (b[0] - r, b[0] + r)
            }
            Geometry::Quantum { .. } => {
                let basis = self.pauli.as_ref().expect("quantum basis");
                let ev = pauli::hermitian_eigenvalues(&basis.effect_operator(&e.coeffs));
                (ev[0], ev[ev.len() - 1])
            }
        })
    }

    /// True iff `E(S) ⊆ [0, 1]` within tolerance.
    pub fn is_valid_effect(&self, e: &Effect) -> Result<bool> {
        let (lo, hi) = self.effect_range(e)?;
        Ok(lo >= -self.tol && hi <= 1.0 + self.tol)
    }

    /// Extreme points of N; polytope vertex lists are reduced to a minimal
    /// set by LP redundancy removal.
    pub fn extreme_points(&self) -> ExtremePoints {
        match &self.geometry {
            Geometry::Simplex { .. } | Geometry::Polytope { .. } => {
                let verts = self.vertex_list().expect("polytope-like");
                ExtremePoints::Finite(
                    remove_redundant(&verts, self.tol)
                        .into_iter()
                        .map(|v| self.state(v))
                        .collect(),
                )
            }
            Geometry::Ball { d } | Geometry::Ellipsoid { d, .. } => ExtremePoints::Sphere { d: *d },
            Geometry::Quantum { qubits: 1 } => ExtremePoints::Sphere { d: 3 },
            Geometry::Quantum { qubits } => ExtremePoints::RankOneProjectors { qubits: *qubits },
        }
    }

    /// Deterministic pure-state samples. For polytopes the vertices are
    /// drawn uniformly with replacement.
    pub fn sample_pure(&self, count: usize, seed: u64) -> Vec<StateVector> {
        let mut rng = sampling::substream(seed, 0x70E5);
        (0..count).map(|_| self.random_pure(&mut rng)).collect()
    }

    pub fn random_pure<R: Rng>(&self, rng: &mut R) -> StateVector {
        match &self.geometry {
            Geometry::Simplex { .. } | Geometry::Polytope { .. } => {
                let verts = self.vertex_list().expect("polytope-like");
                let i = rng.random_range(0..verts.len());
                self.state(verts[i].clone())
            }
            Geometry::Ball { d } | Geometry::Ellipsoid { d, .. } => {
                let w = sampling::unit_vector(rng, *d);
                let mut y = DVector::zeros(d + 1);
                y[0] = 1.0;
                y.rows_mut(1, *d).copy_from(&w);
                self.state(self.from_ball_coords(&y).expect("ball-like"))
            }
            Geometry::Quantum { qubits } => {
                let basis = self.pauli.as_ref().expect("quantum basis");
                let psi = sampling::complex_unit_vector(rng, 1 << qubits);
                self.state(basis.pure_coefficients(&psi))
            }
        }
    }

    /// Random normalized state spread over the whole of N.
    pub fn random_normalized<R: Rng>(&self, rng: &mut R) -> StateVector {
        match &self.geometry {
            Geometry::Simplex { .. } | Geometry::Polytope { .. } => {
                let verts = self.vertex_list().expect("polytope-like");
                let w: Vec<f64> = (0..verts.len())
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let total: f64 = w.iter().sum();
                let mut x = DVector::zeros(self.k);
                for (v, wi) in verts.iter().zip(&w) {
                    x += v * (wi / total);
                }
                self.state(x)
            }
            Geometry::Ball { d } | Geometry::Ellipsoid { d, .. } => {
                let w = sampling::ball_point(rng, *d);
                let mut y = DVector::zeros(d + 1);
                y[0] = 1.0;
                y.rows_mut(1, *d).copy_from(&w);
                self.state(self.from_ball_coords(&y).expect("ball-like"))
            }
            Geometry::Quantum { qubits } => {
                let basis = self.pauli.as_ref().expect("quantum basis");
                let dim = 1 << qubits;
                let g = pauli::CMatrix::from_fn(dim, dim, |_, _| {
                    C64::new(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
                });
                let rho = &g * g.adjoint();
                let tr = rho.trace().re;
                self.state(basis.coefficients(&(rho / C64::new(tr, 0.0))))
            }
        }
    }

    /// Random (generally unnormalized) state `u ν` with `u` uniform in [0, 1].
    pub fn random_state<R: Rng>(&self, rng: &mut R) -> StateVector {
        let u: f64 = rng.random();
        self.random_normalized(rng).scaled(u)
    }

    pub fn sample_states(&self, count: usize, seed: u64) -> Vec<StateVector> {
        let mut rng = sampling::substream(seed, 0x57A7);
        (0..count).map(|_| self.random_state(&mut rng)).collect()
    }

    /// Random valid effect: a random functional rescaled into [0, 1] on N and
    /// mixed with U.
    pub fn random_effect<R: Rng>(&self, rng: &mut R) -> Effect {
        let f = Effect::new(sampling::gaussian_vector(rng, self.k));
        let (lo, hi) = self.effect_range(&f).expect("dimension matches");
        let s: f64 = rng.random();
        let t: f64 = rng.random::<f64>() * (1.0 - s);
        if hi - lo < 1e-12 {
            return Effect::new(&self.unit.coeffs * t);
        }
        let coeffs = (&f.coeffs - &self.unit.coeffs * lo) * (s / (hi - lo)) + &self.unit.coeffs * t;
        Effect::new(coeffs)
    }

    /// Extreme points of N on which `E` equals one.
    pub fn face_of_effect(&self, e: &Effect) -> Result<Vec<StateVector>> {
        let (_, hi) = self.effect_range(e)?;
        if (hi - 1.0).abs() > self.tol {
            return Err(Error::EmptyFace { max: hi });
        }
        match &self.geometry {
            Geometry::Simplex { .. } | Geometry::Polytope { .. } => {
                let ExtremePoints::Finite(verts) = self.extreme_points() else {
                    unreachable!()
                };
                Ok(verts
                    .into_iter()
                    .filter(|v| e.eval(v) >= 1.0 - self.tol)
                    .collect())
            }
            Geometry::Ball { .. } | Geometry::Ellipsoid { .. } | Geometry::Quantum { qubits: 1 } => {
                let b = self.effect_to_ball(e).expect("ball-like");
                let eh = b.rows(1, b.len() - 1).into_owned();
                let r = eh.norm();
                if r <= self.tol {
                    return Err(Error::InvalidInput(
                        "face is the whole sphere of pure states".into(),
                    ));
                }
                let mut y = DVector::zeros(self.k);
                y[0] = 1.0;
                y.rows_mut(1, self.k - 1).copy_from(&(eh / r));
                Ok(vec![self.state(self.from_ball_coords(&y).expect("ball-like"))])
            }
            Geometry::Quantum { .. } => {
                let basis = self.pauli.as_ref().expect("quantum basis");
                let (vals, vecs) = pauli::hermitian_eigen(&basis.effect_operator(&e.coeffs));
                Ok(vals
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l >= 1.0 - self.tol.max(1e-9))
                    .map(|(i, _)| {
                        let psi = vecs.column(i).into_owned();
                        self.state(basis.pure_coefficients(&psi))
                    })
                    .collect())
            }
        }
    }

    /// Largest perfectly distinguishable subset of `candidates` (normalized
    /// states), with a witnessing measurement.
    pub fn max_distinguishable(&self, candidates: &[StateVector]) -> Result<Distinguishability> {
        for c in candidates {
            check_len(self.k, c.len())?;
        }
        let n = candidates.len();
        if n == 0 {
            return Ok(Distinguishability {
                c: 0,
                subset: vec![],
                witness: None,
                lower_bound: false,
            });
        }
        if n > EXHAUSTIVE_CUTOFF {
            let mut chosen: Vec<usize> = vec![0];
            let mut witness = self.distinguishing_measurement(&[&candidates[0]]);
            for i in 1..n {
                let mut trial: Vec<&StateVector> = chosen.iter().map(|&j| &candidates[j]).collect();
                trial.push(&candidates[i]);
                if let Some(m) = self.distinguishing_measurement(&trial) {
                    chosen.push(i);
                    witness = Some(m);
                }
            }
            return Ok(Distinguishability {
                c: chosen.len(),
                subset: chosen,
                witness,
                lower_bound: true,
            });
        }
        let cap = n.min(self.k);
        for size in (1..=cap).rev() {
            for subset in combinations(n, size) {
                let states: Vec<&StateVector> = subset.iter().map(|&i| &candidates[i]).collect();
                if let Some(m) = self.distinguishing_measurement(&states) {
                    return Ok(Distinguishability {
                        c: size,
                        subset,
                        witness: Some(m),
                        lower_bound: false,
                    });
                }
            }
        }
        Ok(Distinguishability {
            c: 0,
            subset: vec![],
            witness: None,
            lower_bound: false,
        })
    }

    /// A measurement with `E_i(ω_j) = δ_ij` summing to U, if one exists. The
    /// result is always re-verified before it is returned.
    pub fn distinguishing_measurement(&self, states: &[&StateVector]) -> Option<Measurement> {
        let c = states.len();
        if c == 0 {
            return None;
        }
        let candidate = if c == 1 {
            Some(vec![self.unit.clone()])
        } else {
            match &self.geometry {
                Geometry::Simplex { .. } | Geometry::Polytope { .. } => self.polytope_distinguish(states),
                Geometry::Ball { .. } | Geometry::Ellipsoid { .. } | Geometry::Quantum { qubits: 1 } => {
                    self.ball_distinguish(states)
                }
                Geometry::Quantum { .. } => self.quantum_distinguish(states),
            }
        }?;
        let tol = self.tol * 10.0;
        for (i, e) in candidate.iter().enumerate() {
            if !self.is_valid_effect(e).ok()? {
                return None;
            }
            for (j, s) in states.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (e.eval(s) - want).abs() > tol {
                    return None;
                }
            }
        }
        Measurement::new(candidate, &self.unit, tol).ok()
    }

    fn polytope_distinguish(&self, states: &[&StateVector]) -> Option<Vec<Effect>> {
        let verts = self.vertex_list()?;
        let c = states.len();
        let k = self.k;
        let nv = 2 * c * k;
        let var = |i: usize, r: usize| 2 * (i * k + r);
        let mut lp = LinearProgram::new(nv);
        let row_for = |i: usize, x: &DVector<f64>| {
            let mut coeffs = vec![0.0; nv];
            for r in 0..k {
                coeffs[var(i, r)] = x[r];
                coeffs[var(i, r) + 1] = -x[r];
            }
            coeffs
        };
        for i in 0..c {
            for (j, s) in states.iter().enumerate() {
                lp.push(row_for(i, &s.coords), Relation::Eq, if i == j { 1.0 } else { 0.0 });
            }
        }
        for r in 0..k {
            let mut coeffs = vec![0.0; nv];
            for i in 0..c {
                coeffs[var(i, r)] = 1.0;
                coeffs[var(i, r) + 1] = -1.0;
            }
            lp.push(coeffs, Relation::Eq, self.unit.coeffs[r]);
        }
        for i in 0..c {
            for v in &verts {
                lp.push(row_for(i, v), Relation::Ge, 0.0);
                lp.push(row_for(i, v), Relation::Le, 1.0);
            }
        }
        let sol = lp.solve();
        if sol.status != lp::LpStatus::Optimal {
            return None;
        }
        Some(
            (0..c)
                .map(|i| Effect::new(DVector::from_fn(k, |r, _| sol.x[var(i, r)] - sol.x[var(i, r) + 1])))
                .collect(),
        )
    }

    fn ball_distinguish(&self, states: &[&StateVector]) -> Option<Vec<Effect>> {
        // Strict convexity: only antipodal pure pairs are distinguishable,
        // witnessed by the pure effects ω/2.
        if states.len() != 2 {
            return None;
        }
        let y: Vec<DVector<f64>> = states
            .iter()
            .map(|s| self.to_ball_coords(&s.coords))
            .collect::<Option<_>>()?;
        let d = self.k - 1;
        let a = y[0].rows(1, d).into_owned() / y[0][0];
        let b = y[1].rows(1, d).into_owned() / y[1][0];
        if (a.norm() - 1.0).abs() > self.tol || (&a + &b).norm() > self.tol * 10.0 {
            return None;
        }
        let mk = |w: &DVector<f64>| {
            let mut e = DVector::zeros(d + 1);
            e[0] = 0.5;
            e.rows_mut(1, d).copy_from(&(w * 0.5));
            e
        };
        let e1 = self.effect_from_ball(&mk(&a))?;
        let e2 = Effect::new(&self.unit.coeffs - &e1.coeffs);
        Some(vec![e1, e2])
    }

    fn quantum_distinguish(&self, states: &[&StateVector]) -> Option<Vec<Effect>> {
        let basis = self.pauli.as_ref()?;
        let dim = basis.dim();
        let rhos: Vec<pauli::CMatrix> = states.iter().map(|s| basis.density(&s.coords)).collect();
        for i in 0..rhos.len() {
            for j in (i + 1)..rhos.len() {
                if (&rhos[i] * &rhos[j]).trace().norm() > self.tol {
                    return None;
                }
            }
        }
        let mut projectors = Vec::with_capacity(rhos.len());
        for rho in &rhos {
            let (vals, vecs) = pauli::hermitian_eigen(rho);
            let mut p = pauli::CMatrix::zeros(dim, dim);
            for (i, &l) in vals.iter().enumerate() {
                if l > 1e-7 {
                    let v = vecs.column(i);
                    p += &v * v.adjoint();
                }
            }
            projectors.push(p);
        }
        let mut rest = pauli::CMatrix::identity(dim, dim);
        for p in &projectors {
            rest -= p;
        }
        let last = projectors.len() - 1;
        projectors[last] += rest;
        Some(
            projectors
                .iter()
                .map(|p| Effect::new(basis.coefficients(p) / dim as f64))
                .collect(),
        )
    }
}

fn ball_contains(c: &DVector<f64>, tol: f64) -> bool {
    let u = c[0];
    let r = c.rows(1, c.len() - 1).norm();
    u >= -tol && u <= 1.0 + tol && r <= u + tol
}

/// The qubit fiducial frame: Bloch coordinates to outcome probabilities.
pub fn qubit_fiducial_frame() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            0.5, 0.5, 0.0, 0.0, //
            0.5, 0.0, 0.5, 0.0, //
            0.5, 0.0, 0.0, 0.5, //
            0.5, 0.0, 0.0, -0.5,
        ],
    )
}

/// Removes points that are convex combinations of the others.
pub fn remove_redundant(points: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut kept: Vec<DVector<f64>> = points.to_vec();
    let mut i = 0;
    while i < kept.len() {
        if kept.len() == 1 {
            break;
        }
        let others: Vec<Vec<f64>> = kept
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v.iter().copied().collect())
            .collect();
        let b: Vec<f64> = kept[i].iter().copied().collect();
        let (res, _) = lp::l1_residual(&others, &b, Some(Relation::Eq));
        if res <= tol * b.len() as f64 {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept
}

/// Convex (or subnormalized) combination of states.
pub fn mix(states: &[StateVector], weights: &[f64]) -> Result<StateVector> {
    check_len(states.len(), weights.len())?;
    let Some(first) = states.first() else {
        return Err(Error::InvalidInput("mix of no states".into()));
    };
    if weights.iter().any(|&w| w < 0.0) || weights.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Err(Error::InvalidInput("weights must be nonnegative with sum <= 1".into()));
    }
    let mut x = DVector::zeros(first.len());
    for (s, &w) in states.iter().zip(weights) {
        check_len(first.len(), s.len())?;
        x += &s.coords * w;
    }
    Ok(StateVector {
        coords: x,
        frame: first.frame,
    })
}

/// All `size`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.clone());
        let mut i = size;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - size {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(5, 1).len(), 5);
    }

    #[test]
    fn fiducial_qubit_unit_effect() {
        let s = StateSpace::qubit_fiducial();
        let u = s.unit_effect().coeffs.clone();
        assert!((u - DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0])).amax() < 1e-15);
    }
}
