//! Command implementations behind the `dfil` binary.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 numeric abort during training.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use dfil_core::datasets::{self, DataError, StreamSpec};
use dfil_core::trainer::{self, EpochLoss, Method, RunSummary, SavedRun, TrainConfig, TrainError};
use dfil_core::verify::{self, Suite, VerifyError};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed { .. } => 1,
            CliError::Train(TrainError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dfil",
    version,
    about = "Domain-incremental real/fake detection experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic domain stream into CSV files.
    Generate(GenerateArgs),
    /// Train one method over a generated stream.
    Train(TrainArgs),
    /// Run the oracle suites.
    Verify(VerifyArgs),
    /// Render a finished run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Built-in preset (four-domain, single-domain, identical-fakes).
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub preset: Option<String>,
    /// Stream definition as JSON (same schema as a preset).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "DFIL_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dfil,
    Ft,
    Offline,
    Er,
    Lwf,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dfil => Method::Dfil,
            MethodArg::Ft => Method::Finetune,
            MethodArg::Offline => Method::Offline,
            MethodArg::Er => Method::Er,
            MethodArg::Lwf => Method::Lwf,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// JSON training configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run directory to create.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "DFIL_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub replay_size: Option<usize>,
    /// Train replay-based methods without their replay set.
    #[arg(long)]
    pub no_replay: bool,
    /// Replace an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Grad,
    Losses,
    Replay,
    Metrics,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Grad => Suite::Grad,
            SuiteArg::Losses => Suite::Losses,
            SuiteArg::Replay => Suite::Replay,
            SuiteArg::Metrics => Suite::Metrics,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Md,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Md)]
    pub format: Format,
}

/// Bookkeeping written next to a run; the only file with wall-clock data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_path: Option<PathBuf>,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub method: Method,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
}

/// Machine-readable report; deserializes back to the same value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub summary: RunSummary,
    pub loss_curve: Vec<EpochLoss>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(&a, out),
        Command::Train(a) => train(&a, out),
        Command::Verify(a) => run_verify(&a, out),
        Command::Report(a) => report(&a, out),
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn generate(args: &GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec: StreamSpec = match (&args.preset, &args.spec) {
        (Some(name), _) => datasets::preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("invalid stream spec {}: {e}", path.display()))
            })?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --preset or --spec is required".into(),
            ))
        }
    };
    let seq = datasets::generate_stream::<f64>(&spec, args.seed)?;
    let manifest = datasets::write_stream(&seq, &spec.name, args.seed, &args.out)?;
    for t in &manifest.tasks {
        writeln!(
            out,
            "{}: {} train / {} test ({}, {})",
            t.name, t.n_train, t.n_test, t.train, t.test
        )?;
    }
    writeln!(
        out,
        "wrote {} tasks to {}",
        manifest.tasks.len(),
        args.out.display()
    )?;
    Ok(())
}

/// Defaults, then the config file, then flags.
pub fn resolve_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(m) = args.method {
        cfg.method = m.into();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(e) = args.epochs {
        cfg.epochs_per_task = e;
    }
    if let Some(k) = args.replay_size {
        cfg.replay_size = k;
    }
    if args.no_replay {
        cfg.replay_enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn staging_dir(target: &Path) -> Result<tempfile::TempDir, CliError> {
    let parent = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent)?;
    let name = target
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("invalid output directory {}", target.display())))?
        .to_string_lossy()
        .into_owned();
    Ok(tempfile::Builder::new()
        .prefix(&format!(".{name}.partial-"))
        .tempdir_in(parent)?)
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !args.data.is_dir() {
        return Err(CliError::Usage(format!(
            "data directory {} not found",
            args.data.display()
        )));
    }
    if args.out.exists() && !args.force {
        return Err(CliError::Usage(format!(
            "{} already exists (use --force to replace it)",
            args.out.display()
        )));
    }
    let cfg = resolve_config(args)?;
    let (_, seq) = datasets::read_stream::<f64>(&args.data)?;
    let started_at = now();
    let record = trainer::train(&seq, &cfg)?;

    let staging = staging_dir(&args.out)?;
    record.save(staging.path())?;
    let manifest = RunManifest {
        run_id: args
            .out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        config_path: args.config.clone(),
        data_dir: args.data.clone(),
        output_dir: args.out.clone(),
        method: cfg.method,
        seed: cfg.seed,
        started_at,
        finished_at: now(),
    };
    std::fs::write(
        staging.path().join(RUN_MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    if args.out.exists() {
        std::fs::remove_dir_all(&args.out)?;
    }
    let staged = staging.keep();
    if let Err(e) = std::fs::rename(&staged, &args.out) {
        let _ = std::fs::remove_dir_all(&staged);
        return Err(e.into());
    }

    writeln!(
        out,
        "method {} seed {} ({} tasks)",
        cfg.method.as_str(),
        cfg.seed,
        seq.len()
    )?;
    write!(out, "{}", trainer::render_table(&record.matrix))?;
    let s = record.summary();
    writeln!(
        out,
        "final AA {:.2}  AF {}",
        s.final_aa().unwrap_or(f64::NAN),
        s.final_af()
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".into())
    )?;
    writeln!(out, "run written to {}", args.out.display())?;
    Ok(())
}

pub fn run_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let checks = verify::run(args.suite.into())?;
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    if failed.is_empty() {
        writeln!(out, "all {} checks passed", checks.len())?;
        return Ok(());
    }
    for c in &failed {
        eprintln!("{}", serde_json::to_string(c)?);
    }
    Err(CliError::ChecksFailed {
        failed: failed.len(),
        total: checks.len(),
    })
}

pub fn load_report(run_dir: &Path) -> Result<(SavedRun, JsonReport), CliError> {
    let saved = SavedRun::load(run_dir)?;
    let report = JsonReport {
        summary: saved.summary(),
        loss_curve: trainer::epoch_curve(&saved.losses),
    };
    Ok((saved, report))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn render_report(
    saved: &SavedRun,
    report: &JsonReport,
    format: Format,
) -> Result<String, CliError> {
    Ok(match format {
        Format::Csv => saved.matrix_csv.clone(),
        Format::Json => serde_json::to_string_pretty(report)? + "\n",
        Format::Md => {
            let s = &report.summary;
            let mut md = format!(
                "# Run report: {} (seed {})\n\n## Accuracy matrix\n\n",
                s.method, s.seed
            );
            md.push_str(&trainer::render_markdown(&saved.matrix));
            md.push_str("\n## Loss components (epoch means)\n\n");
            md.push_str(
                "| task | epoch | ce | scl | kd | fd | total |\n|---|---|---|---|---|---|---|\n",
            );
            for e in &report.loss_curve {
                writeln!(
                    md,
                    "| {} | {} | {:.4} | {} | {} | {} | {:.4} |",
                    e.task,
                    e.epoch,
                    e.ce,
                    opt(e.scl),
                    opt(e.kd),
                    opt(e.fd),
                    e.total
                )
                .expect("write to String");
            }
            md
        }
    })
}

pub fn report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (saved, report) = load_report(&args.run)?;
    write!(out, "{}", render_report(&saved, &report, args.format)?)?;
    Ok(())
}
