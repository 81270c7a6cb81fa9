//! Check verdicts and replayable witnesses.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::composites::CompositeRule;
use crate::convex::{Effect, StateVector};
use crate::error::Result;
use crate::groups::{self, GroupKind};
use crate::linalg::expm;
use crate::theories::Theory;

use super::{all_effects, scan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

/// Evidence attached to a failing verdict. Vectors are plain coordinates in
/// the frame of the theory being checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A finite group with more than one element.
    Disconnected { elements: usize },
    /// No group element found that maps `from` to `to`.
    Unreachable {
        from: Vec<f64>,
        to: Vec<f64>,
        residual: f64,
    },
    /// Composite dimension differs from the product of local dimensions.
    DimensionMismatch { k_a: usize, k_b: usize, k_ab: usize },
    /// Product states fail to span the composite.
    SpanDeficit { rank: usize, expected: usize },
    /// Two distinct pure states share a face that a second effect separates:
    /// `E(ω₁) = E(ω₂) = 1`, `E(ω′) = 0` and `E′(ω₁) ≠ E′(ω₂)`.
    SimultaneousEncoding {
        omega1: Vec<f64>,
        omega2: Vec<f64>,
        omega_prime: Vec<f64>,
        effect: Vec<f64>,
        effect_prime: Vec<f64>,
    },
    /// A valid effect whose value in `direction` exceeds every observable
    /// effect by `gap`.
    MissingEffect {
        direction: Vec<f64>,
        effect: Vec<f64>,
        gap: f64,
    },
    /// `(E_A ⊗ E_B)(exp(H) (ω_A ⊗ ω_B))` outside [0, 1].
    ProbabilityViolation {
        generator: Vec<Vec<f64>>,
        state_a: Vec<f64>,
        state_b: Vec<f64>,
        effect_a: Vec<f64>,
        effect_b: Vec<f64>,
        value: f64,
    },
    /// The interaction scan found nothing beyond local generators.
    NoInteraction {
        d: usize,
        samples: usize,
        seed: u64,
        local_dim: usize,
        solution_dim: usize,
    },
    /// A pipeline stage could not be carried out.
    StageError { message: String },
}

/// Outcome of re-running a witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replay {
    pub reproduced: bool,
    /// Size of the violation found on replay.
    pub margin: f64,
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Witness {
    /// Feeds the witness back through the operation that produced it. A
    /// numeric violation counts as reproduced when it exceeds `tol`.
    pub fn replay(&self, theory: &Theory, tol: f64) -> Result<Replay> {
        let space = &theory.space;
        Ok(match self {
            Witness::Disconnected { elements } => {
                let reproduced = match theory.group.kind() {
                    GroupKind::Finite(el) => el.len() == *elements && el.len() > 1,
                    _ => false,
                };
                Replay {
                    reproduced,
                    margin: *elements as f64,
                }
            }
            Witness::Unreachable { from, to, .. } => {
                let a = StateVector::from_slice(from);
                let b = StateVector::from_slice(to);
                let r = groups::reach_residual(&theory.group, space, &a, &b, 0);
                let limit = match theory.group.kind() {
                    GroupKind::Lie(_) => groups::ORBIT_RESIDUAL,
                    _ => 10.0 * space.tolerance(),
                };
                Replay {
                    reproduced: r > limit,
                    margin: r,
                }
            }
            Witness::DimensionMismatch { k_a, k_b, k_ab } => {
                let c = theory.composite_space()?;
                let reproduced = c.k == *k_ab && k_a * k_b != *k_ab;
                Replay {
                    reproduced,
                    margin: (*k_ab as f64 - (*k_a * *k_b) as f64).abs(),
                }
            }
            Witness::SpanDeficit { rank, expected } => Replay {
                reproduced: rank < expected && !matches!(theory.composite, CompositeRule::Declared { .. }),
                margin: (*expected - *rank) as f64,
            },
            Witness::SimultaneousEncoding {
                omega1,
                omega2,
                omega_prime,
                effect,
                effect_prime,
            } => {
                let (w1, w2, wp) = (
                    StateVector::from_slice(omega1),
                    StateVector::from_slice(omega2),
                    StateVector::from_slice(omega_prime),
                );
                let e = Effect::from_slice(effect);
                let ep = Effect::from_slice(effect_prime);
                let t2 = 2.0 * tol;
                let members = space.contains(&w1)? && space.contains(&w2)? && space.contains(&wp)?;
                let valid = space.is_valid_effect(&e)? && space.is_valid_effect(&ep)?;
                let normalized = [&w1, &w2, &wp]
                    .iter()
                    .all(|w| (space.unit_effect().eval(w) - 1.0).abs() <= t2);
                let encodes = (e.eval(&w1) - 1.0).abs() <= t2
                    && (e.eval(&w2) - 1.0).abs() <= t2
                    && e.eval(&wp).abs() <= t2;
                let margin = (ep.eval(&w1) - ep.eval(&w2)).abs();
                Replay {
                    reproduced: members && valid && normalized && encodes && margin > tol,
                    margin,
                }
            }
            Witness::MissingEffect { direction, effect, .. } => {
                let e = Effect::from_slice(effect);
                let z = dv(direction);
                let valid = space.is_valid_effect(&e)?;
                let observable = all_effects::observable_support(theory, &z)?;
                let margin = e.coeffs.dot(&z) - observable;
                Replay {
                    reproduced: valid && margin > tol,
                    margin,
                }
            }
            Witness::ProbabilityViolation {
                generator,
                state_a,
                state_b,
                effect_a,
                effect_b,
                ..
            } => {
                let g = expm(&rows_to_matrix(generator));
                let w = crate::linalg::kron_vec(&dv(state_a), &dv(state_b));
                let e = crate::linalg::kron_vec(&dv(effect_a), &dv(effect_b));
                let v = e.dot(&(g * w));
                let margin = (-v).max(v - 1.0);
                Replay {
                    reproduced: margin > tol,
                    margin,
                }
            }
            Witness::NoInteraction {
                d,
                samples,
                seed,
                solution_dim,
                ..
            } => {
                let r = scan::interaction_scan(*d, *samples, *seed)?;
                Replay {
                    reproduced: r.stable && r.solution_dim == *solution_dim && !r.has_interaction(),
                    margin: (r.solution_dim as f64) - (r.local_dim as f64),
                }
            }
            Witness::StageError { .. } => Replay {
                reproduced: true,
                margin: 0.0,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: String,
    pub postulate: String,
    pub status: Status,
    pub reason: String,
    pub witness: Option<Witness>,
    pub residuals: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
    pub details: BTreeMap<String, String>,
}

impl CheckReport {
    pub fn new(id: &str, postulate: &str, tolerance: f64, samples: usize, seed: u64) -> Self {
        Self {
            id: id.to_string(),
            postulate: postulate.to_string(),
            status: Status::Inconclusive,
            reason: String::new(),
            witness: None,
            residuals: BTreeMap::new(),
            tolerance,
            samples,
            seed,
            details: BTreeMap::new(),
        }
    }

    pub fn pass(mut self, reason: impl Into<String>) -> Self {
        self.status = Status::Pass;
        self.reason = reason.into();
        self
    }

    pub fn fail(mut self, reason: impl Into<String>, witness: Witness) -> Self {
        self.status = Status::Fail;
        self.reason = reason.into();
        self.witness = Some(witness);
        self
    }

    pub fn inconclusive(mut self, reason: impl Into<String>) -> Self {
        self.status = Status::Inconclusive;
        self.reason = reason.into();
        self
    }

    pub fn residual(mut self, key: &str, value: f64) -> Self {
        self.residuals.insert(key.to_string(), value);
        self
    }

    pub fn detail(mut self, key: &str, value: impl ToString) -> Self {
        self.details.insert(key.to_string(), value.to_string());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Worst status of a report list: any fail, else any inconclusive, else pass.
pub fn overall(reports: &[CheckReport]) -> Status {
    if reports.iter().any(|r| r.status == Status::Fail) {
        Status::Fail
    } else if reports.iter().any(|r| r.status == Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    }
}
