//! Theory documents: the JSON form of a theory read by `check` and
//! `reconstruct` and written by `builtin`.

use gptw_core::composites::CompositeRule;
use gptw_core::convex::{Effect, StateSpace};
use gptw_core::groups::{GroupKind, TransformationGroup};
use gptw_core::pauli;
use gptw_core::theories::{self, Builtin, EffectDeclaration, Theory};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Row-major dense matrix with rows of equal, non-zero length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix(Vec<Vec<f64>>);

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<f64>>) -> std::result::Result<Self, String> {
        let Some(first) = rows.first() else {
            return Err("matrix has no rows".into());
        };
        if first.is_empty() {
            return Err("matrix has empty rows".into());
        }
        if let Some(i) = rows.iter().position(|r| r.len() != first.len()) {
            return Err(format!(
                "matrix is not rectangular: row {i} has {} entries, row 0 has {}",
                rows[i].len(),
                first.len()
            ));
        }
        Ok(Matrix(rows))
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.0
    }
}

impl Matrix {
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Matrix((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.len()
    }

    pub fn ncols(&self) -> usize {
        self.0[0].len()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| self.0[i][j])
    }

    fn row_vectors(&self) -> Vec<DVector<f64>> {
        self.0.iter().map(|r| DVector::from_column_slice(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryDoc {
    Simplex { n: usize },
    /// Normalized extreme points, one per row.
    Polytope { vertices: Matrix },
    Ball { d: usize },
    /// Bloch ball seen through an invertible frame change.
    Ellipsoid { frame: Matrix },
    Quantum { qubits: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupDoc {
    /// `so(d)`, `sym(n)` or `dihedral(4)`.
    Named { name: String },
    Finite { elements: Vec<Matrix> },
    Lie { generators: Vec<Matrix> },
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "declaration", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectsDoc {
    #[default]
    FullDual,
    Listed { effects: Matrix },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompositeDoc {
    #[default]
    SeparableHull,
    Quantum,
    Declared { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheory {
    name: String,
    k: usize,
    geometry: GeometryDoc,
    unit_effect: Vec<f64>,
    group: GroupDoc,
    #[serde(default)]
    effects: EffectsDoc,
    #[serde(default)]
    composite: CompositeDoc,
    #[serde(default)]
    tolerance: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTheory")]
pub struct TheoryDocument {
    pub name: String,
    pub k: usize,
    pub geometry: GeometryDoc,
    pub unit_effect: Vec<f64>,
    pub group: GroupDoc,
    pub effects: EffectsDoc,
    pub composite: CompositeDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TryFrom<RawTheory> for TheoryDocument {
    type Error = String;

    fn try_from(raw: RawTheory) -> std::result::Result<Self, String> {
        let doc = TheoryDocument {
            name: raw.name,
            k: raw.k,
            geometry: raw.geometry,
            unit_effect: raw.unit_effect,
            group: raw.group,
            effects: raw.effects,
            composite: raw.composite,
            tolerance: raw.tolerance,
            seed: raw.seed,
        };
        doc.to_theory().map_err(|e| e.to_string())?;
        Ok(doc)
    }
}

fn parse_named(name: &str) -> Option<(&str, usize)> {
    let name = name.trim();
    let open = name.find('(')?;
    let arg = name[open + 1..].strip_suffix(')')?.trim().parse().ok()?;
    Some((&name[..open], arg))
}

fn invalid(msg: impl Into<String>) -> gptw_core::Error {
    gptw_core::Error::InvalidInput(msg.into())
}

fn build_space(geometry: &GeometryDoc, unit: &[f64]) -> gptw_core::Result<StateSpace> {
    match geometry {
        GeometryDoc::Simplex { n } => StateSpace::simplex(*n),
        GeometryDoc::Ball { d } => StateSpace::ball(*d),
        GeometryDoc::Quantum { qubits } => StateSpace::quantum(*qubits),
        GeometryDoc::Ellipsoid { frame } => StateSpace::ellipsoid(frame.to_dmatrix()),
        GeometryDoc::Polytope { vertices } => {
            StateSpace::polytope(vertices.row_vectors(), Effect::from_slice(unit))
        }
    }
}

fn build_group(group: &GroupDoc, k: usize) -> gptw_core::Result<TransformationGroup> {
    let square = |m: &Matrix| {
        if m.nrows() == k && m.ncols() == k {
            Ok(m.to_dmatrix())
        } else {
            Err(invalid(format!("group matrix is {}x{}, expected {k}x{k}", m.nrows(), m.ncols())))
        }
    };
    match group {
        GroupDoc::Trivial => Ok(TransformationGroup::trivial(k)),
        GroupDoc::Finite { elements } => {
            TransformationGroup::finite(elements.iter().map(square).collect::<gptw_core::Result<_>>()?, 1e-9)
        }
        GroupDoc::Lie { generators } => {
            TransformationGroup::lie(generators.iter().map(square).collect::<gptw_core::Result<_>>()?)
        }
        GroupDoc::Named { name } => match parse_named(name) {
            Some(("so", d)) => TransformationGroup::named_ball(d),
            Some(("sym", n)) => Ok(theories::builtin(Builtin::Classical(n))?.group),
            Some(("dihedral", 4)) => Ok(theories::dihedral_group()),
            _ => Err(invalid(format!(
                "unknown named group '{name}' (expected so(d), sym(n) or dihedral(4))"
            ))),
        },
    }
}

impl TheoryDocument {
    /// Parses and validates a document; errors carry line and column.
    pub fn parse(path: &str, text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::schema(path, &e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&path.display().to_string(), &text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_theory(&self) -> gptw_core::Result<Theory> {
        if self.unit_effect.len() != self.k {
            return Err(invalid(format!(
                "unit_effect has {} entries, k = {}",
                self.unit_effect.len(),
                self.k
            )));
        }
        if let GeometryDoc::Polytope { vertices } = &self.geometry {
            if vertices.ncols() != self.k {
                return Err(invalid(format!("vertex rows have length {}, k = {}", vertices.ncols(), self.k)));
            }
        }
        let mut space = build_space(&self.geometry, &self.unit_effect)?;
        if space.k() != self.k {
            return Err(invalid(format!("geometry has dimension {}, document declares k = {}", space.k(), self.k)));
        }
        let implied = &space.unit_effect().coeffs;
        let declared = DVector::from_column_slice(&self.unit_effect);
        if (implied - &declared).amax() > 1e-9 {
            return Err(invalid(format!(
                "unit_effect {:?} does not match the geometry's unit effect {:?}",
                self.unit_effect,
                implied.as_slice()
            )));
        }
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(invalid("tolerance must be positive and finite"));
            }
            space = space.with_tolerance(tol);
        }
        let group = build_group(&self.group, self.k)?;
        let effects = match &self.effects {
            EffectsDoc::FullDual => EffectDeclaration::FullDual,
            EffectsDoc::Listed { effects } => {
                if effects.ncols() != self.k {
                    return Err(invalid(format!("effect rows have length {}, k = {}", effects.ncols(), self.k)));
                }
                EffectDeclaration::Listed(effects.row_vectors().into_iter().map(Effect::new).collect())
            }
        };
        let composite = match self.composite {
            CompositeDoc::SeparableHull => CompositeRule::SeparableHull,
            CompositeDoc::Quantum => CompositeRule::Quantum,
            CompositeDoc::Declared { k } => CompositeRule::Declared { k },
        };
        Theory::new(self.name.clone(), space, group, effects, composite)
    }

    /// Canonical document for a builtin theory.
    pub fn builtin(which: Builtin) -> Result<Self> {
        let theory = theories::builtin(which)?;
        let k = theory.space.k();
        let unit_effect = theory.space.unit_effect().coeffs.iter().copied().collect();
        let (geometry, group, composite) = match which {
            Builtin::Classical(n) => (
                GeometryDoc::Simplex { n },
                GroupDoc::Named { name: format!("sym({n})") },
                CompositeDoc::SeparableHull,
            ),
            Builtin::Ball(d) => (
                GeometryDoc::Ball { d },
                GroupDoc::Named { name: format!("so({d})") },
                CompositeDoc::SeparableHull,
            ),
            Builtin::SquareGbit => {
                let GroupKind::Finite(el) = theory.group.kind() else {
                    unreachable!("the square's group is finite")
                };
                (
                    GeometryDoc::Polytope {
                        vertices: Matrix(theories::square_vertices().iter().map(|v| v.iter().copied().collect()).collect()),
                    },
                    GroupDoc::Finite {
                        elements: el.iter().map(Matrix::from_dmatrix).collect(),
                    },
                    CompositeDoc::SeparableHull,
                )
            }
            Builtin::Qubit => (
                GeometryDoc::Quantum { qubits: 1 },
                GroupDoc::Named { name: "so(3)".into() },
                CompositeDoc::Quantum,
            ),
            Builtin::Quantum(n) => (
                GeometryDoc::Quantum { qubits: n },
                GroupDoc::Lie {
                    generators: pauli::adjoint_generators(n).iter().map(Matrix::from_dmatrix).collect(),
                },
                CompositeDoc::Quantum,
            ),
        };
        Ok(TheoryDocument {
            name: which.to_string(),
            k,
            geometry,
            unit_effect,
            group,
            effects: EffectsDoc::FullDual,
            composite,
            tolerance: None,
            seed: None,
        })
    }
}

pub fn parse_builtin(name: &str) -> Result<Builtin> {
    let b: Builtin = name.parse().map_err(|_| CliError::UnknownBuiltin(name.to_string()))?;
    theories::builtin(b).map_err(|_| CliError::UnknownBuiltin(name.to_string()))?;
    Ok(b)
}
