//! Built-in reference theories, the Bloch-to-density map and canonical
//! encoding pairs.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::composites::{CompositeRule, CompositeSpace};
use crate::convex::{self, Effect, StateSpace, StateVector};
use crate::error::{check_len, Error, Result};
use crate::groups::{Transformation, TransformationGroup};
use crate::pauli::{self, CMatrix, PauliBasis};

#[derive(Debug, Clone, PartialEq)]
pub enum EffectDeclaration {
    /// Every valid effect is a measurement outcome.
    FullDual,
    /// Only the listed effects (and their mixtures with 0 and U) are
    /// observable.
    Listed(Vec<Effect>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Classical(usize),
    Ball(usize),
    SquareGbit,
    Qubit,
    Quantum(usize),
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Classical(n) => write!(f, "classical({n})"),
            Builtin::Ball(d) => write!(f, "ball({d})"),
            Builtin::SquareGbit => write!(f, "square_gbit"),
            Builtin::Qubit => write!(f, "qubit"),
            Builtin::Quantum(n) => write!(f, "quantum({n})"),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// Accepts `qubit`, `square_gbit`, `classical(2)`, `classical2`,
    /// `ball(3)`, `ball3`, `quantum(2)`, `quantum2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "qubit" => return Ok(Builtin::Qubit),
            "square_gbit" | "square-gbit" | "square" => return Ok(Builtin::SquareGbit),
            _ => {}
        }
        let split = s.find(|c: char| c.is_ascii_digit() || c == '(');
        let Some(pos) = split else {
            return Err(Error::InvalidInput(format!("unknown builtin '{s}'")));
        };
        let (head, tail) = s.split_at(pos);
        let num: usize = tail
            .trim_start_matches('(')
            .trim_end_matches(')')
            .parse()
            .map_err(|_| Error::InvalidInput(format!("unknown builtin '{s}'")))?;
        match head {
            "classical" => Ok(Builtin::Classical(num)),
            "ball" => Ok(Builtin::Ball(num)),
            "quantum" => Ok(Builtin::Quantum(num)),
            _ => Err(Error::InvalidInput(format!("unknown builtin '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Theory {
    pub name: String,
    pub space: StateSpace,
    pub group: TransformationGroup,
    pub effects: EffectDeclaration,
    pub composite: CompositeRule,
    pub builtin: Option<Builtin>,
}

impl Theory {
    pub fn new(
        name: impl Into<String>,
        space: StateSpace,
        group: TransformationGroup,
        effects: EffectDeclaration,
        composite: CompositeRule,
    ) -> Result<Self> {
        check_len(space.k(), group.k())?;
        if let EffectDeclaration::Listed(list) = &effects {
            for e in list {
                check_len(space.k(), e.len())?;
            }
        }
        Ok(Self {
            name: name.into(),
            space,
            group,
            effects,
            composite,
            builtin: None,
        })
    }

    pub fn composite_space(&self) -> Result<CompositeSpace> {
        CompositeSpace::new(vec![self.space.clone(), self.space.clone()], self.composite.clone())
    }

    /// Checks that sampled group elements keep sampled states inside the
    /// space. Returns the first offending state if any.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<Option<StateVector>> {
        self.group.maps_into(&self.space, samples, seed)
    }
}

pub const CLASSICAL_MAX: usize = 8;
pub const BALL_MAX: usize = 8;
pub const QUBITS_MAX: usize = 3;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn permutation_group(n: usize) -> Result<TransformationGroup> {
    let elements: Vec<DMatrix<f64>> = permutations(n)
        .into_iter()
        .map(|p| {
            let mut m = DMatrix::zeros(n, n);
            for (i, &j) in p.iter().enumerate() {
                m[(j, i)] = 1.0;
            }
            m
        })
        .collect();
    if n <= 4 {
        TransformationGroup::finite(elements, 0.0)
    } else {
        // Closure of the full symmetric group holds by construction; the
        // quadratic check is skipped for large n.
        Ok(TransformationGroup::finite_trusted(elements))
    }
}

/// Square-gbit vertices in the Bloch frame `(u, x, y)`.
pub fn square_vertices() -> Vec<DVector<f64>> {
    [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, -1.0], [1.0, -1.0, 1.0]]
        .iter()
        .map(|v| DVector::from_column_slice(v))
        .collect()
}

/// The eight symmetries of the square, as block-diag(1, R).
pub fn dihedral_group() -> TransformationGroup {
    let r90 = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let flip = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let mut elements = Vec::new();
    let mut r = DMatrix::<f64>::identity(2, 2);
    for _ in 0..4 {
        for m in [r.clone(), &r * &flip] {
            elements.push(crate::groups::embed_rotation(&m));
        }
        r = &r90 * r;
    }
    TransformationGroup::finite(elements, 0.0).expect("dihedral group is closed")
}

pub fn builtin(which: Builtin) -> Result<Theory> {
    let mut theory = match which {
        Builtin::Classical(n) => {
            if !(2..=CLASSICAL_MAX).contains(&n) {
                return Err(Error::OutOfRange(format!("classical(n) needs 2 <= n <= {CLASSICAL_MAX}")));
            }
            Theory::new(
                which.to_string(),
                StateSpace::simplex(n)?,
                permutation_group(n)?,
                EffectDeclaration::FullDual,
                CompositeRule::SeparableHull,
            )?
        }
        Builtin::Ball(d) => {
            if !(2..=BALL_MAX).contains(&d) {
                return Err(Error::OutOfRange(format!("ball(d) needs 2 <= d <= {BALL_MAX}")));
            }
            Theory::new(
                which.to_string(),
                StateSpace::ball(d)?,
                TransformationGroup::named_ball(d)?,
                EffectDeclaration::FullDual,
                CompositeRule::SeparableHull,
            )?
        }
        Builtin::SquareGbit => {
            let mut unit = DVector::zeros(3);
            unit[0] = 1.0;
            Theory::new(
                which.to_string(),
                StateSpace::polytope(square_vertices(), Effect::new(unit))?,
                dihedral_group(),
                EffectDeclaration::FullDual,
                CompositeRule::SeparableHull,
            )?
        }
        Builtin::Qubit => Theory::new(
            which.to_string(),
            StateSpace::quantum(1)?,
            TransformationGroup::named_ball(3)?,
            EffectDeclaration::FullDual,
            CompositeRule::Quantum,
        )?,
        Builtin::Quantum(n) => {
            if !(1..=QUBITS_MAX).contains(&n) {
                return Err(Error::OutOfRange(format!("quantum(n) needs 1 <= n <= {QUBITS_MAX}")));
            }
            Theory::new(
                which.to_string(),
                StateSpace::quantum(n)?,
                TransformationGroup::lie(pauli::adjoint_generators(n))?,
                EffectDeclaration::FullDual,
                CompositeRule::Quantum,
            )?
        }
    };
    theory.builtin = Some(which);
    Ok(theory)
}

/// The map between the (tensor) Bloch frame and density matrices:
/// `ω ↦ 2^-n Σ_w ω_w P_w` and back through `c_w = tr(ρ P_w)`.
#[derive(Debug, Clone)]
pub struct FrameMap {
    basis: PauliBasis,
}

impl FrameMap {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > QUBITS_MAX {
            return Err(Error::OutOfRange(format!("frame map arity 1..={QUBITS_MAX}")));
        }
        Ok(Self {
            basis: PauliBasis::new(n),
        })
    }

    pub fn arity(&self) -> usize {
        self.basis.qubits()
    }

    pub fn forward(&self, w: &DVector<f64>) -> Result<CMatrix> {
        check_len(self.basis.len(), w.len())?;
        Ok(self.basis.density(w))
    }

    pub fn inverse(&self, rho: &CMatrix) -> Result<DVector<f64>> {
        check_len(self.basis.dim(), rho.nrows())?;
        Ok(self.basis.coefficients(rho))
    }
}

#[derive(Debug, Clone)]
pub struct DensityRecord {
    pub matrix: CMatrix,
    pub trace: f64,
    pub eigenvalues: Vec<f64>,
    pub psd: bool,
    pub hermitian_residual: f64,
}

/// Applies the Bloch-to-density map; positivity is reported, not enforced.
pub fn bloch_to_density(w: &StateVector, n: usize) -> Result<DensityRecord> {
    let map = FrameMap::new(n)?;
    let m = map.forward(&w.coords)?;
    let eigenvalues = pauli::hermitian_eigenvalues(&m);
    Ok(DensityRecord {
        trace: m.trace().re,
        psd: eigenvalues[0] >= -crate::DEFAULT_TOLERANCE,
        hermitian_residual: (&m - m.adjoint()).camax(),
        eigenvalues,
        matrix: m,
    })
}

#[derive(Debug, Clone)]
pub struct Encoding {
    pub t: Transformation,
    pub f: Transformation,
    pub source: StateSpace,
    pub target: StateSpace,
    /// Description of the image T(S₁).
    pub image: String,
}

fn qubits_for(n: usize) -> usize {
    let mut q = 0;
    while (1usize << q) < n {
        q += 1;
    }
    q.max(1)
}

/// Canonical encoding pair for the supported source/target combinations.
pub fn canonical_encoding(source: &Theory, target: &Theory) -> Result<Encoding> {
    let unsupported = || Error::UnsupportedPair {
        source_name: source.name.clone(),
        target_name: target.name.clone(),
    };
    let (Some(src), Some(tgt)) = (source.builtin, target.builtin) else {
        return Err(unsupported());
    };
    match (src, tgt) {
        (Builtin::Classical(n), Builtin::Qubit | Builtin::Quantum(_)) => {
            let q = match tgt {
                Builtin::Qubit => 1,
                Builtin::Quantum(q) => q,
                _ => unreachable!(),
            };
            if q != qubits_for(n) {
                return Err(unsupported());
            }
            let basis = PauliBasis::new(q);
            let k2 = basis.len();
            let dim = basis.dim();
            // T: p ↦ coefficients of diag(p); F: reads the first n diagonal entries.
            let mut t = DMatrix::zeros(k2, n);
            let mut f = DMatrix::zeros(n, k2);
            for w in 0..k2 {
                let p = basis.word(w);
                for i in 0..n {
                    let diag = p[(i, i)].re;
                    t[(w, i)] = diag;
                    f[(i, w)] = diag / dim as f64;
                }
            }
            Ok(Encoding {
                t: Transformation::new(t),
                f: Transformation::new(f),
                source: source.space.clone(),
                target: target.space.clone(),
                image: format!("diagonal states supported on the first {n} basis vectors"),
            })
        }
        (Builtin::Ball(3), Builtin::Qubit) => {
            let t = convex::qubit_fiducial_frame();
            let f = t.clone().try_inverse().expect("invertible frame");
            Ok(Encoding {
                t: Transformation::new(t),
                f: Transformation::new(f),
                source: source.space.clone(),
                target: StateSpace::qubit_fiducial(),
                image: "all qubit states (fiducial frame)".into(),
            })
        }
        _ => Err(unsupported()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_builtin_names() {
        assert_eq!("qubit".parse::<Builtin>().unwrap(), Builtin::Qubit);
        assert_eq!("classical(3)".parse::<Builtin>().unwrap(), Builtin::Classical(3));
        assert_eq!("quantum2".parse::<Builtin>().unwrap(), Builtin::Quantum(2));
        assert_eq!("ball(5)".parse::<Builtin>().unwrap(), Builtin::Ball(5));
        assert!("nonsense".parse::<Builtin>().is_err());
        for b in [Builtin::Classical(2), Builtin::Ball(4), Builtin::SquareGbit, Builtin::Quantum(3)] {
            assert_eq!(b.to_string().parse::<Builtin>().unwrap(), b);
        }
    }

    #[test]
    fn permutation_counts() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(dihedral_group().connected(), false);
    }
}
