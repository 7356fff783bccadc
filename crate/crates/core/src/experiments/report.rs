//! Machine-readable experiment reports (schema `report_v1`).

use crate::concepts::LogitShiftReport;
use crate::error::Result;
use crate::jsonio;
use serde::{Deserialize, Serialize};

pub const REPORT_VERSION: &str = "report_v1";

/// One evaluated condition: accuracy of a corrected (or baseline) model on
/// the clean and poisoned test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub target: i32,
    pub seed: u64,
    pub correction: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cav: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hook: Option<String>,
    pub clean_accuracy: f64,
    pub poisoned_accuracy: f64,
}

/// Accuracy of the attacked model before any correction or fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalAccuracy {
    pub target: i32,
    pub seed: u64,
    pub clean_accuracy: f64,
    pub poisoned_accuracy: f64,
}

/// Per-epoch test accuracy while fine-tuning with the augmentive hook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochCurve {
    pub target: i32,
    pub seed: u64,
    pub cav: String,
    pub hook: String,
    pub clean_by_epoch: Vec<f64>,
    pub poisoned_by_epoch: Vec<f64>,
}

/// Softmax shift when the fitted concept direction is added to clean test
/// features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub target: i32,
    pub seed: u64,
    pub cav: String,
    pub hook: String,
    pub shift: LogitShiftReport,
}

/// Mean/min/max over the (target, seed) cells of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub correction: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cav: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hook: Option<String>,
    pub n_cells: usize,
    pub mean_clean: f64,
    pub mean_poisoned: f64,
    pub min_clean: f64,
    pub max_clean: f64,
    pub min_poisoned: f64,
    pub max_poisoned: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: serde_json::Value,
    pub originals: Vec<OriginalAccuracy>,
    pub cells: Vec<Cell>,
    pub aclarc_curves: Vec<EpochCurve>,
    pub probes: Vec<ProbeResult>,
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentReport {
    /// Groups cells by condition and recomputes the aggregate block.
    pub fn compute_aggregates(cells: &[Cell]) -> Vec<Aggregate> {
        let mut keys: Vec<(String, Option<String>, Option<String>)> = cells
            .iter()
            .map(|c| (c.correction.clone(), c.cav.clone(), c.hook.clone()))
            .collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(correction, cav, hook)| {
                let group: Vec<&Cell> = cells
                    .iter()
                    .filter(|c| c.correction == correction && c.cav == cav && c.hook == hook)
                    .collect();
                let n = group.len();
                let mean = |f: &dyn Fn(&Cell) -> f64| {
                    group.iter().map(|c| f(c)).sum::<f64>() / n as f64
                };
                let fold = |f: &dyn Fn(&Cell) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
                    group.iter().map(|c| f(c)).fold(init, pick)
                };
                Aggregate {
                    correction,
                    cav,
                    hook,
                    n_cells: n,
                    mean_clean: mean(&|c| c.clean_accuracy),
                    mean_poisoned: mean(&|c| c.poisoned_accuracy),
                    min_clean: fold(&|c| c.clean_accuracy, f64::INFINITY, f64::min),
                    max_clean: fold(&|c| c.clean_accuracy, f64::NEG_INFINITY, f64::max),
                    min_poisoned: fold(&|c| c.poisoned_accuracy, f64::INFINITY, f64::min),
                    max_poisoned: fold(&|c| c.poisoned_accuracy, f64::NEG_INFINITY, f64::max),
                }
            })
            .collect()
    }

    /// Aggregate row for one condition, if present.
    pub fn aggregate(
        &self,
        correction: &str,
        cav: Option<&str>,
        hook: Option<&str>,
    ) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| {
            a.correction == correction
                && a.cav.as_deref() == cav
                && a.hook.as_deref() == hook
        })
    }

    pub fn to_json(&self) -> Result<String> {
        jsonio::to_json_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        jsonio::from_json_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Json,
    Csv,
    MarkdownTable,
}

impl RenderFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(RenderFormat::Json),
            "csv" => Some(RenderFormat::Csv),
            "markdown" | "markdown-table" | "md" => Some(RenderFormat::MarkdownTable),
            _ => None,
        }
    }
}

fn opt(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("-")
}

/// Renders a report: JSON (17 significant digits), CSV (one row per cell),
/// or a markdown table (3 decimals).
pub fn render_report(report: &ExperimentReport, format: RenderFormat) -> Result<String> {
    match format {
        RenderFormat::Json => report.to_json(),
        RenderFormat::Csv => {
            let mut out =
                String::from("target,seed,correction,cav,hook,clean_accuracy,poisoned_accuracy\n");
            for c in &report.cells {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.target,
                    c.seed,
                    c.correction,
                    opt(&c.cav),
                    opt(&c.hook),
                    c.clean_accuracy,
                    c.poisoned_accuracy
                ));
            }
            Ok(out)
        }
        RenderFormat::MarkdownTable => {
            let mut out = String::from(
                "| target | seed | correction | cav | hook | clean | poisoned |\n\
                 |---|---|---|---|---|---|---|\n",
            );
            for c in &report.cells {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {:.3} | {:.3} |\n",
                    c.target,
                    c.seed,
                    c.correction,
                    opt(&c.cav),
                    opt(&c.hook),
                    c.clean_accuracy,
                    c.poisoned_accuracy
                ));
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(t: i32, s: u64, corr: &str, clean: f64, pois: f64) -> Cell {
        Cell {
            target: t,
            seed: s,
            correction: corr.into(),
            cav: (corr != "baseline").then(|| "pattern_gt".to_string()),
            hook: (corr != "baseline").then(|| "layer1".to_string()),
            clean_accuracy: clean,
            poisoned_accuracy: pois,
        }
    }

    fn sample_report() -> ExperimentReport {
        let cells = vec![
            cell(0, 1, "baseline", 0.95, 0.60),
            cell(0, 2, "baseline", 0.93, 0.62),
            cell(0, 1, "pclarc", 0.94, 0.90),
            cell(0, 2, "pclarc", 0.92, 0.88),
        ];
        ExperimentReport {
            version: REPORT_VERSION.into(),
            config: serde_json::json!({"note": "test"}),
            originals: vec![],
            aggregates: ExperimentReport::compute_aggregates(&cells),
            cells,
            aclarc_curves: vec![],
            probes: vec![],
        }
    }

    #[test]
    fn aggregates_are_recomputable_means() {
        let r = sample_report();
        let agg = r.aggregate("baseline", None, None).unwrap();
        assert!((agg.mean_clean - 0.94).abs() < 1e-12);
        assert!((agg.mean_poisoned - 0.61).abs() < 1e-12);
        assert_eq!(agg.n_cells, 2);
        assert_eq!(agg.min_poisoned, 0.60);
        assert_eq!(agg.max_poisoned, 0.62);
        // recompute from scratch and compare
        let again = ExperimentReport::compute_aggregates(&r.cells);
        assert_eq!(again, r.aggregates);
    }

    #[test]
    fn json_round_trip_preserves_report() {
        let r = sample_report();
        let text = r.to_json().unwrap();
        let back = ExperimentReport::from_json(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn markdown_row_count_equals_cells() {
        let r = sample_report();
        let md = render_report(&r, RenderFormat::MarkdownTable).unwrap();
        let rows = md.lines().count() - 2; // header + separator
        assert_eq!(rows, r.cells.len());
        assert!(md.contains("| 0.950 | 0.600 |"));
    }

    #[test]
    fn empty_sweep_renders_header_only() {
        let mut r = sample_report();
        r.cells.clear();
        r.aggregates.clear();
        let md = render_report(&r, RenderFormat::MarkdownTable).unwrap();
        assert_eq!(md.lines().count(), 2);
        let csv = render_report(&r, RenderFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn csv_one_row_per_cell() {
        let r = sample_report();
        let csv = render_report(&r, RenderFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1 + r.cells.len());
    }
}
