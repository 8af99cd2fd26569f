//! Machine-readable comparison reports (schema version 1) with JSON and CSV
//! emitters. Output is deterministic: no timestamps, optional wall-clock
//! fields default to absent, floats print in shortest round-trip form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub outcome: String,
    pub total_energy: f64,
    pub total_distance: f64,
    pub switch_count: usize,
    pub final_soc: f64,
    pub soc_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub with_bas: PlanStats,
    pub without_bas: PlanStats,
    /// `1 - optimized/unoptimized` total energy.
    pub savings_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: String,
    pub evaluations: usize,
    pub best_f: f64,
    pub best_e: f64,
    pub best_r: f64,
    pub mean_r: f64,
    pub mean_f: f64,
    pub point_col: usize,
    pub point_row: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodComparisonReport {
    pub scenario: String,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub initial_col: usize,
    pub initial_row: usize,
    pub methods: Vec<MethodStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub scenarios: Vec<ScenarioReport>,
    pub comparisons: Vec<MethodComparisonReport>,
}

impl ComparisonReport {
    pub fn new() -> Self {
        ComparisonReport {
            schema_version: 1,
            scenarios: Vec::new(),
            comparisons: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat CSV with one record per scenario run and per method entry.
    /// SOC traces are semicolon-joined in a single field.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("record,scenario,variant,outcome,total_energy,total_distance,switch_count,final_soc,savings_fraction,soc_trace\n");
        for sc in &self.scenarios {
            for (variant, stats) in [("with_bas", &sc.with_bas), ("without_bas", &sc.without_bas)] {
                let trace: Vec<String> = stats.soc_trace.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!(
                    "scenario,{},{},{},{},{},{},{},{},{}\n",
                    sc.scenario,
                    variant,
                    stats.outcome.replace(',', ";"),
                    stats.total_energy,
                    stats.total_distance,
                    stats.switch_count,
                    stats.final_soc,
                    sc.savings_fraction,
                    trace.join(";"),
                ));
            }
        }
        out.push_str("record,scenario,method,budget,evaluations,best_f,best_e,best_r,mean_r,mean_f,point_col,point_row,path_energy,wall_time_ms\n");
        for cmp in &self.comparisons {
            for m in &cmp.methods {
                out.push_str(&format!(
                    "method,{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    cmp.scenario,
                    m.method,
                    cmp.budget,
                    m.evaluations,
                    m.best_f,
                    m.best_e,
                    m.best_r,
                    m.mean_r,
                    m.mean_f,
                    m.point_col,
                    m.point_row,
                    m.path_energy.map(|v| v.to_string()).unwrap_or_default(),
                    m.wall_time_ms.map(|v| v.to_string()).unwrap_or_default(),
                ));
            }
        }
        out
    }
}

impl Default for ComparisonReport {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComparisonReport {
        ComparisonReport {
            schema_version: 1,
            scenarios: vec![ScenarioReport {
                scenario: "ridge".into(),
                with_bas: PlanStats {
                    outcome: "ok".into(),
                    total_energy: 123.5,
                    total_distance: 10.0,
                    switch_count: 2,
                    final_soc: 0.9,
                    soc_trace: vec![1.0, 0.95, 0.9],
                },
                without_bas: PlanStats {
                    outcome: "ok".into(),
                    total_energy: 130.0,
                    total_distance: 10.5,
                    switch_count: 2,
                    final_soc: 0.89,
                    soc_trace: vec![1.0, 0.94, 0.89],
                },
                savings_fraction: 0.05,
            }],
            comparisons: vec![MethodComparisonReport {
                scenario: "ridge".into(),
                budget: 151,
                seeds: vec![1],
                initial_col: 22,
                initial_row: 10,
                methods: vec![MethodStats {
                    method: "bas".into(),
                    evaluations: 151,
                    best_f: 1.0,
                    best_e: 0.5,
                    best_r: 0.25,
                    mean_r: 0.25,
                    mean_f: 1.0,
                    point_col: 23,
                    point_row: 10,
                    path_energy: Some(1000.0),
                    wall_time_ms: None,
                }],
            }],
        }
    }

    #[test]
    fn json_round_trip_is_identity() {
        let report = sample();
        let text = report.to_json().unwrap();
        let back = ComparisonReport::from_json(&text).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn empty_report_is_valid() {
        let report = ComparisonReport::new();
        let text = report.to_json().unwrap();
        let back = ComparisonReport::from_json(&text).unwrap();
        assert_eq!(back.schema_version, 1);
        assert!(back.scenarios.is_empty());
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 2); // two header rows only
    }

    #[test]
    fn csv_contains_every_record() {
        let report = sample();
        let csv = report.to_csv();
        let scenario_rows = csv.lines().filter(|l| l.starts_with("scenario,")).count();
        let method_rows = csv.lines().filter(|l| l.starts_with("method,")).count();
        assert_eq!(scenario_rows, 2);
        assert_eq!(method_rows, 1);
        assert!(csv.contains("1;0.95;0.9"));
    }
}
