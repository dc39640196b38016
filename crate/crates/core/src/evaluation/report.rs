use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, fmt_delta, fmt_pct, ConfusionMatrix, Metrics};
use crate::dataset::CreditLabel;
use crate::orchestrator::Transcript;
use crate::runner::{RunDir, RunError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub matrix: ConfusionMatrix,
    pub metrics: Metrics,
}

impl ReportRow {
    pub fn unscored(&self) -> u64 {
        self.matrix.unscored
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub run_id: String,
    pub positive_class: CreditLabel,
    pub strict: bool,
    pub dataset_sha256: Option<String>,
    pub prompt_checksums: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

/// Groups transcripts by configuration, in order of first appearance.
pub fn score_transcripts(
    transcripts: &[Transcript],
    positive_class: CreditLabel,
    strict: bool,
    notes: &mut Vec<String>,
) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = Vec::new();
    for t in transcripts {
        let Some(actual) = t.label else {
            notes.push(format!("record {} has no ground-truth label; not scored", t.record_id));
            continue;
        };
        let index = match rows.iter().position(|r| r.name == t.configuration) {
            Some(i) => i,
            None => {
                rows.push(ReportRow {
                    name: t.configuration.clone(),
                    matrix: ConfusionMatrix::empty(positive_class),
                    metrics: compute_metrics(&ConfusionMatrix::empty(positive_class)),
                });
                rows.len() - 1
            }
        };
        rows[index].matrix.add(t.decision, actual, strict);
    }
    for row in &mut rows {
        row.metrics = compute_metrics(&row.matrix);
    }
    rows
}

pub fn evaluate_run(dir: &Path, positive_class: CreditLabel, strict: bool) -> Result<EvaluationReport, RunError> {
    let run = RunDir::open(dir)?;
    let (transcripts, mut notes) = run.read_transcripts()?;
    let meta = match run.read_meta() {
        Ok(meta) => Some(meta),
        Err(e) => {
            notes.push(format!("meta.json unreadable: {e}"));
            None
        }
    };
    let rows = score_transcripts(&transcripts, positive_class, strict, &mut notes);
    Ok(EvaluationReport {
        run_id: run.id(),
        positive_class,
        strict,
        dataset_sha256: meta.as_ref().map(|m| m.dataset_sha256.clone()),
        prompt_checksums: meta.map(|m| m.prompt_checksums).unwrap_or_default(),
        rows,
        notes,
    })
}

impl EvaluationReport {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("# Evaluation: {}\n\n", self.run_id);
        let accounting = if self.strict {
            "unparseable decisions counted as wrong"
        } else {
            "unparseable decisions excluded from N"
        };
        writeln!(out, "Positive class: {}; {accounting}.", self.positive_class).unwrap();
        if let Some(hash) = &self.dataset_sha256 {
            writeln!(out, "Dataset sha256: {hash}").unwrap();
        }
        out.push('\n');
        out.push_str(&comparison_table(&self.rows, None));
        if !self.prompt_checksums.is_empty() {
            out.push_str("\nPrompt checksums:\n\n");
            for (role, sum) in &self.prompt_checksums {
                writeln!(out, "- {role}: {sum}").unwrap();
            }
        }
        if !self.notes.is_empty() {
            out.push_str("\nNotes:\n\n");
            for note in &self.notes {
                writeln!(out, "- {note}").unwrap();
            }
        }
        out
    }

    /// `name,accuracy,precision,recall,f1,unscored`; percentages, empty when undefined.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,accuracy,precision,recall,f1,unscored\n");
        let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{:.2}", v * 100.0));
        for row in &self.rows {
            let m = &row.metrics;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&row.name),
                cell(m.accuracy),
                cell(m.precision),
                cell(m.recall),
                cell(m.f1),
                row.unscored()
            )
            .unwrap();
        }
        out
    }

    pub fn confusion_json(&self) -> String {
        let map: BTreeMap<&str, &ConfusionMatrix> = self.rows.iter().map(|r| (r.name.as_str(), &r.matrix)).collect();
        serde_json::to_string_pretty(&map).expect("matrices serialize") + "\n"
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Markdown table in the layout of the published results tables, with
/// percentage-point delta columns when a reference row is given.
pub fn comparison_table(rows: &[ReportRow], reference: Option<&ReportRow>) -> String {
    let mut out = String::from("| Evaluation | Accuracy | Precision | Recall | F1 Score | N | Unscored |");
    let mut rule = String::from("|---|---:|---:|---:|---:|---:|---:|");
    if reference.is_some() {
        out.push_str(" Δ Accuracy (pp) | Δ Precision (pp) | Δ Recall (pp) | Δ F1 (pp) |");
        rule.push_str("---:|---:|---:|---:|");
    }
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for row in rows {
        let m = &row.metrics;
        write!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            row.name,
            fmt_pct(m.accuracy),
            fmt_pct(m.precision),
            fmt_pct(m.recall),
            fmt_pct(m.f1),
            row.matrix.scored(),
            row.unscored()
        )
        .unwrap();
        if let Some(r) = reference {
            let rm = &r.metrics;
            write!(
                out,
                " {} | {} | {} | {} |",
                fmt_delta(m.accuracy, rm.accuracy),
                fmt_delta(m.precision, rm.precision),
                fmt_delta(m.recall, rm.recall),
                fmt_delta(m.f1, rm.f1)
            )
            .unwrap();
        }
        out.push('\n');
    }
    out
}

/// Merges several reports into one table; deltas are relative to the row
/// named `reference` when it is present.
pub fn merge_reports(reports: &[EvaluationReport], reference: Option<&str>, title: &str) -> String {
    let rows: Vec<ReportRow> = reports.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let reference_row = reference.and_then(|name| rows.iter().find(|r| r.name == name));
    let mut out = format!("# {title}\n\n");
    if let Some(r) = reference_row {
        writeln!(out, "Deltas are percentage points relative to {}.\n", r.name).unwrap();
    }
    out.push_str(&comparison_table(&rows, reference_row));
    let notes: Vec<String> = reports
        .iter()
        .flat_map(|r| r.notes.iter().map(move |n| format!("{}: {n}", r.run_id)))
        .collect();
    if !notes.is_empty() {
        out.push_str("\nNotes:\n\n");
        for note in notes {
            writeln!(out, "- {note}").unwrap();
        }
    }
    out
}

/// Writes `report.md`, `report.csv` and `confusion.json` into `out_dir`.
pub fn write_report(report: &EvaluationReport, out_dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    for (name, body) in [
        ("report.md", report.to_markdown()),
        ("report.csv", report.to_csv()),
        ("confusion.json", report.confusion_json()),
    ] {
        crate::runner::write_atomic(&out_dir.join(name), body.as_bytes())?;
    }
    Ok(())
}
