//! End-to-end operations behind the command-line subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::backend::ChatBackend;
use crate::bias::{
    inject_ethnicity, paired_flip_report, redact_gender, swap_gender, BiasError, BiasReport, EthnicityGroups,
    GenderMapping, PairedDecision,
};
use crate::config::{ConfigError, RunConfig};
use crate::dataset::{ApplicantRecord, CreditLabel};
use crate::evaluation::{evaluate_run, merge_reports, write_report, EvaluationReport};
use crate::orchestrator::{Engine, TopologyKind, Transcript};
use crate::runner::{execute_run, file_sha256, write_atomic, RunDir, RunError, RunMeta, RunSummary};

pub const COMPARISON_FILE: &str = "comparison.md";

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Bias(#[from] BiasError),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
}

/// Shared setup: validated config, engine, backend and records.
pub struct Prepared {
    pub config: RunConfig,
    pub engine: Engine,
    pub backend: Arc<dyn ChatBackend>,
    pub records: Vec<ApplicantRecord>,
    pub dataset_sha256: String,
}

impl Prepared {
    pub fn new(config: &RunConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let engine = config.engine()?;
        let records = config.records(&engine.schema)?;
        Ok(Self {
            backend: config.backend()?,
            dataset_sha256: file_sha256(&config.dataset.path)?,
            config: config.clone(),
            engine,
            records,
        })
    }

    /// Writes `meta.json`, then runs every pending record.
    pub async fn run_into(
        &self,
        dir: &Path,
        config: &RunConfig,
        records: &[ApplicantRecord],
    ) -> Result<RunOutcome, SessionError> {
        let meta = RunMeta::new(
            &self.engine,
            &config.topology,
            &self.dataset_sha256,
            records.len(),
            &config.seed,
            config.to_json(),
        );
        let run_dir = RunDir::prepare(dir, &meta)?;
        let summary = execute_run(
            &run_dir,
            records,
            &config.topology,
            self.backend.clone(),
            &self.engine,
            config.workers,
        )
        .await?;
        Ok(RunOutcome {
            dir: dir.to_path_buf(),
            summary,
        })
    }
}

fn output_dir(config: &RunConfig) -> Result<PathBuf, SessionError> {
    config
        .output
        .clone()
        .ok_or_else(|| SessionError::Config(ConfigError::Invalid(vec!["no output directory given".into()])))
}

pub async fn run(config: &RunConfig) -> Result<RunOutcome, SessionError> {
    let prepared = Prepared::new(config)?;
    let dir = output_dir(config)?;
    prepared.run_into(&dir, config, &prepared.records).await
}

pub fn evaluate(
    dir: &Path,
    positive: CreditLabel,
    strict: bool,
    out: Option<&Path>,
) -> Result<EvaluationReport, SessionError> {
    let report = evaluate_run(dir, positive, strict)?;
    write_report(&report, out.unwrap_or(dir))?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub runs: Vec<RunOutcome>,
    pub reports: Vec<EvaluationReport>,
    pub comparison: String,
}

/// Runs each topology into `<output>/<kind>` and writes a comparison table
/// with deltas relative to the hierarchical configuration when it is swept.
pub async fn ablate(config: &RunConfig, topologies: &[TopologyKind]) -> Result<AblationOutcome, SessionError> {
    let prepared = Prepared::new(config)?;
    let root = output_dir(config)?;
    let mut runs = Vec::new();
    let mut reports = Vec::new();
    let mut reference = None;
    for &kind in topologies {
        let mut sub = config.clone();
        sub.topology.kind = kind;
        sub.topology.name = None;
        let dir = root.join(kind.as_str());
        sub.output = Some(dir.clone());
        runs.push(prepared.run_into(&dir, &sub, &prepared.records).await?);
        let report = evaluate(&dir, CreditLabel::Good, false, None)?;
        if kind == TopologyKind::Hierarchical3 {
            reference = Some(
                sub.topology
                    .label(&prepared.engine.catalog, &prepared.engine.default_model),
            );
        }
        reports.push(report);
    }
    let comparison = merge_reports(&reports, reference.as_deref(), "Topology ablation");
    write_atomic(&root.join(COMPARISON_FILE), comparison.as_bytes())?;
    Ok(AblationOutcome {
        runs,
        reports,
        comparison,
    })
}

/// Merges evaluated runs into one table.
pub fn report(
    dirs: &[PathBuf],
    reference: Option<&str>,
    positive: CreditLabel,
    strict: bool,
) -> Result<String, SessionError> {
    let reports = dirs
        .iter()
        .map(|d| evaluate_run(d, positive, strict))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_reports(&reports, reference, "Credit assessment results"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasProbe {
    Gender,
    Ethnicity,
    Redact,
}

impl BiasProbe {
    pub fn as_str(self) -> &'static str {
        match self {
            BiasProbe::Gender => "gender",
            BiasProbe::Ethnicity => "ethnicity",
            BiasProbe::Redact => "redact",
        }
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn read_transcripts(dir: &Path) -> Result<Vec<Transcript>, SessionError> {
    Ok(RunDir::open(dir)?.read_transcripts()?.0)
}

/// Runs the probe's record sets into `<output>/<group>` and writes
/// `bias.md`, `bias.json` and `bias.csv` into the output directory.
pub async fn bias(config: &RunConfig, probe: BiasProbe) -> Result<BiasReport, SessionError> {
    let prepared = Prepared::new(config)?;
    let root = output_dir(config)?;
    let schema = &prepared.engine.schema;
    let mapping = match &config.bias.mapping {
        Some(p) => GenderMapping::load(p)?,
        None => GenderMapping::default(),
    };
    mapping.validate(schema)?;
    let configuration = config
        .topology
        .label(&prepared.engine.catalog, &prepared.engine.default_model);
    let mut notes = Vec::new();

    let report = match probe {
        BiasProbe::Gender | BiasProbe::Redact => {
            let base: Vec<ApplicantRecord> = prepared
                .records
                .iter()
                .filter(|r| mapping.eligible(r, schema))
                .cloned()
                .collect();
            if base.is_empty() {
                return Err(SessionError::Other(format!(
                    "no {} records with a mapped {} code",
                    mapping.base_group, mapping.attribute
                )));
            }
            let (variant_name, variants): (String, Vec<ApplicantRecord>) = if probe == BiasProbe::Gender {
                let pairs = base
                    .iter()
                    .map(|r| swap_gender(r, &mapping, schema))
                    .collect::<Result<Vec<_>, _>>()?;
                let irreversible = pairs.iter().filter(|p| !p.reversible).count();
                if irreversible > 0 {
                    notes.push(format!(
                        "{irreversible} of {} swaps used many-to-one mapping entries and cannot be reversed",
                        pairs.len()
                    ));
                }
                let to = pairs[0].direction.split('→').nth(1).unwrap_or("variant").to_string();
                (to, pairs.into_iter().map(|p| p.variant).collect())
            } else {
                notes.push(format!(
                    "Redaction replaces the {} code with a sex-free description; this is one reading of removing gender.",
                    mapping.attribute
                ));
                let variants = base
                    .iter()
                    .map(|r| redact_gender(r, &mapping))
                    .collect::<Result<Vec<_>, _>>()?;
                ("redacted".to_string(), variants)
            };
            let base_dir = root.join(slug(&mapping.base_group));
            let variant_dir = root.join(slug(&variant_name));
            prepared.run_into(&base_dir, config, &base).await?;
            prepared.run_into(&variant_dir, config, &variants).await?;
            let base_t = read_transcripts(&base_dir)?;
            let variant_t = read_transcripts(&variant_dir)?;
            let paired: Vec<PairedDecision> = base_t
                .iter()
                .filter_map(|b| {
                    let v = variant_t
                        .iter()
                        .find(|v| v.record_id.starts_with(&format!("{}@", b.record_id)))?;
                    Some(PairedDecision {
                        base_id: b.record_id.clone(),
                        variant_id: v.record_id.clone(),
                        label: b.label,
                        base: b.decision,
                        variant: v.decision,
                    })
                })
                .collect();
            let complete: Vec<PairedDecision> = paired
                .iter()
                .filter(|p| p.base.is_some() && p.variant.is_some())
                .cloned()
                .collect();
            if complete.len() < paired.len() {
                notes.push(format!(
                    "{} pairs lack a decision on one side and are left out of the flip analysis",
                    paired.len() - complete.len()
                ));
            }
            let flips = paired_flip_report(&complete, &mapping.base_group, &variant_name)?;
            BiasReport::build(
                probe.as_str(),
                &configuration,
                &[(mapping.base_group.clone(), base_t), (variant_name, variant_t)],
                Some(&mapping.base_group),
                Some(flips),
                notes,
            )
        }
        BiasProbe::Ethnicity => {
            let groups = match &config.bias.groups {
                Some(p) => EthnicityGroups::load(p)?,
                None => EthnicityGroups::default(),
            };
            let mut sets = Vec::new();
            for group in &groups.groups {
                let variants = prepared
                    .records
                    .iter()
                    .map(|r| inject_ethnicity(r, group))
                    .collect::<Result<Vec<_>, _>>()?;
                let dir = root.join(slug(group));
                prepared.run_into(&dir, config, &variants).await?;
                sets.push((group.clone(), read_transcripts(&dir)?));
            }
            BiasReport::build(probe.as_str(), &configuration, &sets, None, None, notes)
        }
    };
    for (name, body) in [
        ("bias.md", report.to_markdown()),
        ("bias.json", report.to_json()),
        ("bias.csv", report.to_csv()),
    ] {
        write_atomic(&root.join(name), body.as_bytes())?;
    }
    Ok(report)
}
