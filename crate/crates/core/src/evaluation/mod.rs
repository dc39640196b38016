//! Scoring runs against ground truth and rendering comparison tables.

mod metrics;
mod report;

pub use metrics::{compute_metrics, confusion, fmt_delta, fmt_pct, ConfusionMatrix, Metrics, UNDEFINED};
pub use report::{
    comparison_table, evaluate_run, merge_reports, score_transcripts, write_report, EvaluationReport, ReportRow,
};
