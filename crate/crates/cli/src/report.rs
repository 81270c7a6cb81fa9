//! Report documents, their rounded JSON form and the markdown rendering.

use std::fmt::Write as _;

use gptw_core::postulates::{CheckReport, Status, Witness};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;

pub const SCHEMA_VERSION: &str = "gptw-report/1";
/// Significant digits kept for every non-integer number in a report.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    #[serde(flatten)]
    pub report: CheckReport,
    /// Wall-clock seconds; the only field that differs between reruns.
    /// Null for pipeline stages, which are timed as a whole.
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub samples: usize,
    /// Tolerance override; absent means each space keeps its own.
    pub tolerance: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub passed: bool,
    /// Frame change `L` to Bloch coordinates, row-major.
    pub frame_map: Option<Vec<Vec<f64>>>,
    pub frame_condition: Option<f64>,
    /// `"qubit"` when every stage passed.
    pub equivalent_to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub command: String,
    pub theory: String,
    pub status: Status,
    pub exit_code: i32,
    pub budgets: Budgets,
    /// In execution order; for `reconstruct` these are the pipeline stages.
    pub checks: Vec<CheckEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reconstruction: Option<Reconstruction>,
    pub duration: f64,
}

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

impl ReportDocument {
    /// Pretty JSON with every float rounded to 12 significant digits.
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        round_value(&mut v);
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-3 && x.abs() < 1e6 {
        format!("{}", round_sig(x))
    } else {
        format!("{x:.3e}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_num(x)).collect();
    format!("({})", parts.join(", "))
}

fn witness_lines(w: &Witness) -> Vec<String> {
    match w {
        Witness::Disconnected { elements } => vec![format!("finite group with {elements} elements")],
        Witness::Unreachable { from, to, residual } => vec![
            format!("from {}", fmt_vec(from)),
            format!("to {}", fmt_vec(to)),
            format!("best residual {}", fmt_num(*residual)),
        ],
        Witness::DimensionMismatch { k_a, k_b, k_ab } => vec![format!("k_A = {k_a}, k_B = {k_b}, k_AB = {k_ab}")],
        Witness::SpanDeficit { rank, expected } => vec![format!("span rank {rank} of {expected}")],
        Witness::SimultaneousEncoding {
            omega1,
            omega2,
            omega_prime,
            effect,
            effect_prime,
        } => vec![
            format!("ω₁ = {}", fmt_vec(omega1)),
            format!("ω₂ = {}", fmt_vec(omega2)),
            format!("ω′ = {}", fmt_vec(omega_prime)),
            format!("E = {}", fmt_vec(effect)),
            format!("E′ = {}", fmt_vec(effect_prime)),
        ],
        Witness::MissingEffect { direction, effect, gap } => vec![
            format!("direction {}", fmt_vec(direction)),
            format!("effect {}", fmt_vec(effect)),
            format!("support gap {}", fmt_num(*gap)),
        ],
        Witness::ProbabilityViolation {
            state_a,
            state_b,
            effect_a,
            effect_b,
            value,
            ..
        } => vec![
            format!("ω_A = {}, ω_B = {}", fmt_vec(state_a), fmt_vec(state_b)),
            format!("E_A = {}, E_B = {}", fmt_vec(effect_a), fmt_vec(effect_b)),
            format!("value {}", fmt_num(*value)),
        ],
        Witness::NoInteraction {
            d,
            samples,
            seed,
            local_dim,
            solution_dim,
        } => vec![format!(
            "d = {d}: solution_dim {solution_dim} = local_dim {local_dim} (samples {samples}, seed {seed})"
        )],
        Witness::StageError { message } => vec![message.clone()],
    }
}

/// Markdown view of a report. Depends on nothing but the report.
pub fn render_markdown(doc: &ReportDocument) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} report: {}\n", doc.command, doc.theory);
    let _ = writeln!(s, "- status: **{}** (exit {})", doc.status.as_str(), doc.exit_code);
    let tol = doc.budgets.tolerance.map_or("space default".to_string(), fmt_num);
    let _ = writeln!(
        s,
        "- samples {}, tolerance {}, seed {}",
        doc.budgets.samples, tol, doc.budgets.seed
    );
    let _ = writeln!(s, "- schema {}\n", doc.schema_version);
    let _ = writeln!(s, "| check | status | reason |");
    let _ = writeln!(s, "|---|---|---|");
    for c in &doc.checks {
        let _ = writeln!(
            s,
            "| {} | {} | {} |",
            c.report.id,
            c.report.status.as_str(),
            c.report.reason.replace('|', "\\|")
        );
    }
    for c in &doc.checks {
        if c.report.residuals.is_empty() && c.report.witness.is_none() {
            continue;
        }
        let _ = writeln!(s, "\n## {}\n", c.report.id);
        for (k, v) in &c.report.residuals {
            let _ = writeln!(s, "- {k}: {}", fmt_num(*v));
        }
        if let Some(w) = &c.report.witness {
            let sep = if c.report.residuals.is_empty() { "" } else { "\n" };
            let _ = writeln!(s, "{sep}Witness:\n");
            for line in witness_lines(w) {
                let _ = writeln!(s, "- {line}");
            }
        }
    }
    if let Some(r) = &doc.reconstruction {
        let _ = writeln!(s, "\n## reconstruction\n");
        match &r.equivalent_to {
            Some(t) => {
                let _ = writeln!(s, "Equivalent to the {t}.\n");
            }
            None => {
                let _ = writeln!(s, "Not reconstructed.\n");
            }
        }
        if let Some(rows) = &r.frame_map {
            let _ = writeln!(s, "Frame map L:\n\n```");
            for row in rows {
                let _ = writeln!(s, "{}", fmt_vec(row));
            }
            let _ = writeln!(s, "```");
        }
        if let Some(c) = r.frame_condition {
            let _ = writeln!(s, "\ncondition number {}", fmt_num(c));
        }
    }
    s
}
