use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use masca::config::{BackendConfig, ConfigError, Overrides, RunConfig};
use masca::dataset::{load_dataset, write_jsonl, AttributeSchema, CreditLabel, DatasetFormat};
use masca::orchestrator::TopologyKind;
use masca::session::{self, BiasProbe, SessionError};

/// Multi-agent credit assessment: runs, evaluation, ablations and bias probes.
///
/// Settings come from `--config` (TOML); flags override file values.
/// Live backends read their bearer token from the environment variable named
/// in the config (`MASCA_API_KEY` by default).
#[derive(Debug, Parser)]
#[command(name = "masca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a dataset into canonical JSONL records.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "statlog")]
        format: DatasetFormat,
        /// Attribute codebook (TOML); the bundled one by default.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run one topology over a dataset.
    Run(RunArgs),
    /// Score a run directory and write report.md, report.csv and confusion.json.
    Eval {
        run_dir: PathBuf,
        #[command(flatten)]
        scoring: Scoring,
        /// Where to write the report files; the run directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run several topologies and write a comparison table.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated topology kinds; all six by default.
        #[arg(long, value_delimiter = ',')]
        topologies: Vec<TopologyKind>,
    },
    /// Counterfactual bias probe.
    Bias {
        probe: Probe,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Merge evaluated runs into one results table.
    Report {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// Configuration name used as the delta reference.
        #[arg(long)]
        reference: Option<String>,
        #[command(flatten)]
        scoring: Scoring,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Probe {
    Gender,
    Ethnicity,
    Redact,
}

impl From<Probe> for BiasProbe {
    fn from(p: Probe) -> Self {
        match p {
            Probe::Gender => BiasProbe::Gender,
            Probe::Ethnicity => BiasProbe::Ethnicity,
            Probe::Redact => BiasProbe::Redact,
        }
    }
}

#[derive(Debug, Args)]
struct Scoring {
    /// Class treated as positive for precision and recall.
    #[arg(long, default_value = "good")]
    positive: CreditLabel,
    /// Count unparseable decisions as wrong instead of excluding them.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    format: Option<DatasetFormat>,
    /// Seeded sample of this many records.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    topology: Option<TopologyKind>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    orchestrator_model: Option<String>,
    /// Scripted backend (offline replay).
    #[arg(long, conflicts_with = "endpoint")]
    script: Option<PathBuf>,
    /// OpenAI-compatible chat-completions URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset.clone(),
            format: self.format,
            sample: self.sample,
            topology: self.topology,
            model: self.model.clone(),
            orchestrator_model: self.orchestrator_model.clone(),
            script: self.script.clone(),
            endpoint: self.endpoint.clone(),
            scenario: self.scenario.clone(),
            workers: self.workers,
            output: self.output.clone(),
            seed: self.seed.clone(),
        }
    }

    fn config(&self) -> Result<RunConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| Failure::from(SessionError::from(e)))?,
            None => {
                let Some(dataset) = &self.dataset else {
                    return Err(Failure::Usage("--dataset is required without --config".into()));
                };
                let backend = match (&self.script, &self.endpoint) {
                    (Some(script), _) => BackendConfig::Scripted { script: script.clone() },
                    (None, Some(_)) => BackendConfig::Live(Default::default()),
                    (None, None) => {
                        return Err(Failure::Usage(
                            "--script or --endpoint is required without --config".into(),
                        ))
                    }
                };
                RunConfig::new(dataset.clone(), backend)
            }
        };
        config.apply(&self.overrides());
        Ok(config)
    }
}

/// Exit 1 for usage and configuration problems, 2 for runtime failures.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Config(ConfigError::Invalid(_) | ConfigError::Parse { .. }) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn ingest(input: &Path, format: DatasetFormat, schema: Option<&Path>, output: &Path) -> anyhow::Result<()> {
    let schema = match schema {
        Some(p) => AttributeSchema::load(p)?,
        None => AttributeSchema::german_credit(),
    };
    let records = load_dataset(input, &schema, format)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    write_jsonl(output, &records)?;
    println!("wrote {} records to {}", records.len(), output.display());
    Ok(())
}

async fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest {
            input,
            format,
            schema,
            output,
        } => ingest(&input, format, schema.as_deref(), &output)?,
        Command::Run(args) => {
            let config = args.config()?;
            let outcome = session::run(&config).await?;
            let s = &outcome.summary;
            println!(
                "{}: {} completed, {} skipped, {} failed",
                outcome.dir.display(),
                s.completed,
                s.skipped,
                s.failed.len()
            );
            if !s.failed.is_empty() {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "{} records failed; see {}",
                    s.failed.len(),
                    outcome.dir.join(masca::runner::FAILURES_FILE).display()
                )));
            }
        }
        Command::Eval { run_dir, scoring, out } => {
            let report = session::evaluate(&run_dir, scoring.positive, scoring.strict, out.as_deref())?;
            print!("{}", report.to_markdown());
        }
        Command::Ablate { run, topologies } => {
            let config = run.config()?;
            let kinds = if topologies.is_empty() {
                TopologyKind::ALL.to_vec()
            } else {
                topologies
            };
            let outcome = session::ablate(&config, &kinds).await?;
            print!("{}", outcome.comparison);
        }
        Command::Bias { probe, run } => {
            let config = run.config()?;
            let report = session::bias(&config, probe.into()).await?;
            print!("{}", report.to_markdown());
        }
        Command::Report {
            run_dirs,
            reference,
            scoring,
            out,
        } => {
            let table = session::report(&run_dirs, reference.as_deref(), scoring.positive, scoring.strict)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, &table).with_context(|| format!("cannot write {}", path.display()))?
                }
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

/// The error and its causes, skipping causes the message already spells out.
fn describe(e: &anyhow::Error) -> String {
    let mut message = e.to_string();
    for cause in e.chain().skip(1) {
        let cause = cause.to_string();
        if !message.contains(&cause) {
            message = format!("{message}: {cause}");
        }
    }
    message
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("MASCA_LOG").unwrap_or_else(|_| "warn".into()))
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(2);
        }
    };
    match runtime.block_on(dispatch(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
