//! Machine-readable outputs: versioned JSON reports and CSV dumps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conditions::ConditionVerdicts;
use crate::estimates::EstimateVerdicts;
use crate::solver::{FailureDiagnosis, GraphField, HomotopyStep, SolveReport};
use crate::weights::ValidationReport;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema: u32,
    pub all_required_pass: bool,
    pub nonexistence_triggered: bool,
    pub verdicts: ConditionVerdicts,
}

impl CheckReport {
    pub fn new(verdicts: ConditionVerdicts) -> Self {
        Self {
            schema: SCHEMA,
            all_required_pass: verdicts.all_required_pass(),
            nonexistence_triggered: verdicts.nonexistence.triggered,
            verdicts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLevel {
    pub h: f64,
    pub converged: bool,
    #[serde(with = "crate::serde_float")]
    pub error_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub exact: String,
    /// Error of the main solve.
    #[serde(with = "crate::serde_float")]
    pub error_inf: f64,
    pub levels: Vec<OracleLevel>,
    /// Least-squares slope of `log error` against `log h`.
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub schema: u32,
    pub converged: bool,
    pub t_reached: f64,
    pub failure_diagnosis: FailureDiagnosis,
    pub grid_h: f64,
    pub unknowns: usize,
    #[serde(with = "crate::serde_float")]
    pub sup_u: f64,
    #[serde(with = "crate::serde_float")]
    pub sup_boundary_u: f64,
    #[serde(with = "crate::serde_float")]
    pub sup_grad_interior: f64,
    #[serde(with = "crate::serde_float")]
    pub sup_grad_boundary: f64,
    #[serde(with = "crate::serde_float")]
    pub max_boundary_gradient_seen: f64,
    pub residual_history: Vec<HomotopyStep>,
    pub condition_verdicts: Option<ConditionVerdicts>,
    pub estimates: Option<EstimateVerdicts>,
    pub oracle: Option<OracleReport>,
    pub warnings: Vec<String>,
}

impl SolveSummary {
    pub fn new(report: &SolveReport, estimates: Option<EstimateVerdicts>, oracle: Option<OracleReport>) -> Self {
        Self {
            schema: SCHEMA,
            converged: report.converged,
            t_reached: report.t_reached,
            failure_diagnosis: report.failure_diagnosis,
            grid_h: report.solution.grid.h(),
            unknowns: report.solution.values.iter().flatten().count(),
            sup_u: report.sup_u,
            sup_boundary_u: report.sup_boundary_u,
            sup_grad_interior: report.sup_grad_interior,
            sup_grad_boundary: report.sup_grad_boundary,
            max_boundary_gradient_seen: report.max_boundary_gradient_seen,
            residual_history: report.residual_history.clone(),
            condition_verdicts: report.condition_verdicts.clone(),
            estimates,
            oracle,
            warnings: report.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub schema: u32,
    pub weight: String,
    pub passed: bool,
    pub validation: ValidationReport,
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    // Only non-string map keys can make this fail, and the report types have none.
    serde_json::to_string_pretty(v).expect("report types serialise")
}

fn push_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// `x1,…,xn,u` with one row per node carrying a value.
pub fn field_csv(field: &GraphField) -> String {
    let n = field.grid.dim();
    let mut out = header(&(1..=n).map(|i| format!("x{i}")).chain(["u".into()]).collect::<Vec<_>>());
    for (x, u) in field.rows() {
        push_row(&mut out, x.into_iter().chain([u]));
    }
    out
}

/// `y1,…,yn,H` over a parameter grid.
pub fn curvature_csv(params: &[Vec<f64>], values: &[f64]) -> String {
    let n = params.first().map_or(0, |p| p.len());
    let mut out = header(&(1..=n).map(|i| format!("y{i}")).chain(["H".into()]).collect::<Vec<_>>());
    for (y, h) in params.iter().zip(values) {
        push_row(&mut out, y.iter().copied().chain([*h]));
    }
    out
}

fn header(cols: &[String]) -> String {
    let mut s = cols.join(",");
    s.push('\n');
    s
}

/// Least-squares slope of `log e` against `log h` over positive finite errors.
pub fn observed_order(levels: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    (den > 0.0).then(|| num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_pure_power_law() {
        let lv: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h: &f64| (h, 3.0 * h.powi(2))).collect();
        assert!((observed_order(&lv).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(observed_order(&lv[..1]), None);
    }

    #[test]
    fn csv_uses_seventeen_significant_digits() {
        let s = curvature_csv(&[vec![0.1, 0.2]], &[1.0 / 3.0]);
        assert_eq!(s, "y1,y2,H\n1.0000000000000001e-1,2.0000000000000001e-1,3.3333333333333331e-1\n");
    }
}
