//! Command-line entry points: `scan`, `train`, `explain`, `serve`, `replay`
//! and `history`.
//!
//! Exit codes: 0 success, 2 I/O or file format, 64 usage, 70 anything else.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use exmos_core::analytics::render_table;
use exmos_core::explain::{ExplanationBundle, Variant};
use exmos_core::model::train_forest;
use exmos_core::quality::{assess, QualityConfig, QualityReport};
use exmos_core::steering::{JournalEntry, Session, SessionSettings};
use exmos_core::{DataTable, ForestParams, ModelMetrics, SplitSpec};

use crate::io::{load_table, read_lines, save_model, IoError};
use crate::service::{self, AppState, ServiceConfig};
use crate::telemetry::{usage_summary, TelemetryRecord};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IO: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_INTERNAL: u8 = 70;

#[derive(Debug, Parser)]
#[command(name = "exmos", version, about = "Steer a tabular classifier by configuring its training data")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV file; the last column is the binary target.
    #[arg(long, env = "EXMOS_DATA")]
    data: PathBuf,
    /// JSON metadata sidecar describing every column.
    #[arg(long, env = "EXMOS_META")]
    meta: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect data issues and print the quality report.
    Scan {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Split, train the forest and print its metrics.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, env = "EXMOS_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Also write a model snapshot to this path.
        #[arg(long)]
        save_model: Option<PathBuf>,
    },
    /// Print the explanation bundle of the default model.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, env = "EXMOS_SEED", default_value_t = 42)]
        seed: u64,
        /// DCE, MCE or HYB.
        #[arg(long, default_value = "HYB")]
        variant: Variant,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, env = "EXMOS_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long, env = "EXMOS_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory for history and telemetry journals.
        #[arg(long, env = "EXMOS_STATE_DIR")]
        state_dir: Option<PathBuf>,
    },
    /// Summarize a telemetry journal (CPU, HTPU, effectiveness, efficiency).
    #[command(visible_alias = "analytics")]
    Replay {
        journal: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Replay a session history journal and check every digest and metric.
    History {
        journal: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, env = "EXMOS_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// Parse `args` (program name first), run the command and return the exit
/// code. Command output goes to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(data: &DataArgs) -> Result<DataTable, CliError> {
    Ok(load_table(&data.data, data.meta.as_deref())?)
}

fn emit_json(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::internal)?;
    s.push('\n');
    out.write_all(s.as_bytes()).map_err(CliError::internal)
}

fn emit_text(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(CliError::internal)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Scan { data, format } => {
            let table = load(&data)?;
            let report = assess(&table, &table, &QualityConfig::default()).map_err(CliError::internal)?;
            match format {
                Format::Json => emit_json(out, &report),
                Format::Text => emit_text(out, &quality_text(&report)),
            }
        }
        Command::Train { data, seed, format, save_model: snapshot } => {
            let table = load(&data)?;
            let metrics = cmd_train(&table, seed, snapshot.as_deref())?;
            match format {
                Format::Json => emit_json(out, &metrics),
                Format::Text => emit_text(out, &metrics_text(&metrics)),
            }
        }
        Command::Explain { data, seed, variant, format } => {
            let table = load(&data)?;
            let session = Session::new("cli", table, SessionSettings::new(variant, seed)).map_err(CliError::internal)?;
            let bundle = &session.head().bundle;
            match format {
                Format::Json => emit_json(out, bundle),
                Format::Text => emit_text(out, &bundle_text(bundle)),
            }
        }
        Command::Serve { data, seed, port, host, state_dir } => {
            let table = load(&data)?;
            if let Some(dir) = &state_dir {
                std::fs::create_dir_all(dir)
                    .map_err(|source| IoError::Io { path: dir.clone(), source })?;
            }
            cmd_serve(ServiceConfig { table, seed, state_dir }, &host, port)
        }
        Command::Replay { journal, format } => {
            let records: Vec<TelemetryRecord> = read_lines(&journal)?;
            let summary = usage_summary(&records, &[]).map_err(CliError::internal)?;
            match format {
                Format::Json => emit_json(out, &summary),
                Format::Text => emit_text(out, &render_table(&summary)),
            }
        }
        Command::History { journal, data, seed, format } => {
            let entries: Vec<JournalEntry> = read_lines(&journal)?;
            let Some(JournalEntry::Version(v0)) = entries.first() else {
                return Err(CliError::Internal("history journal must start with version 0".into()));
            };
            let table = load(&data)?;
            let settings = SessionSettings::new(v0.bundle.variant, seed);
            let session =
                Session::replay("history", table, settings, &entries, Box::new(|| 0)).map_err(CliError::internal)?;
            let replayed: Vec<ReplayedVersion> = entries
                .iter()
                .filter_map(|e| match e {
                    JournalEntry::Version(v) => Some(ReplayedVersion {
                        version_id: v.version_id,
                        parent_id: v.parent_id,
                        table_digest: v.table_digest.clone(),
                        test_accuracy: v.metrics.test_accuracy,
                    }),
                    _ => None,
                })
                .collect();
            let report = HistoryReport {
                committed_id: session.committed().version_id,
                head_id: session.head().version_id,
                versions: session.versions().iter().map(service::VersionSummary::from).collect(),
                replayed,
            };
            match format {
                Format::Json => emit_json(out, &report),
                Format::Text => emit_text(out, &history_text(&report)),
            }
        }
    }
}

/// Output of `history`: the rebuilt session plus every journal version that
/// was re-executed and matched its recorded digest and metrics.
#[derive(Debug, serde::Serialize)]
struct HistoryReport {
    committed_id: u64,
    head_id: u64,
    versions: Vec<service::VersionSummary>,
    replayed: Vec<ReplayedVersion>,
}

#[derive(Debug, serde::Serialize)]
struct ReplayedVersion {
    version_id: u64,
    parent_id: Option<u64>,
    table_digest: String,
    test_accuracy: f64,
}

fn cmd_train(table: &DataTable, seed: u64, snapshot: Option<&Path>) -> Result<ModelMetrics, CliError> {
    let (train, test) = table.split_train_test(&SplitSpec { seed, ..SplitSpec::default() }).map_err(CliError::internal)?;
    let model = train_forest(&train, &test, &ForestParams { seed, ..ForestParams::default() }).map_err(CliError::internal)?;
    if let Some(path) = snapshot {
        save_model(path, &model)?;
    }
    Ok(model.metrics)
}

fn cmd_serve(config: ServiceConfig, host: &str, port: u16) -> Result<(), CliError> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::internal)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(CliError::internal)?;
        let state = AppState::new(config);
        eprintln!("listening on http://{addr}");
        tracing::info!(%addr, "serving");
        service::serve(listener, state).await.map_err(CliError::internal)
    })
}

fn metrics_text(m: &ModelMetrics) -> String {
    format!(
        "train accuracy  {:.4}\ntest accuracy   {:.4}\ntrain samples   {}\nfeatures        {}\n",
        m.train_accuracy, m.test_accuracy, m.n_train_samples, m.n_features
    )
}

fn quality_text(q: &QualityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {:>9} {:>7}  affected", "issue", "subscore", "impact");
    for i in &q.issues {
        let _ = writeln!(
            s,
            "{:<22} {:>9.2} {:>7.2}  {}",
            i.kind.label(),
            i.subscore,
            i.impact,
            i.affected_features.join(", ")
        );
    }
    let _ = writeln!(s, "score {:.2} ({:?})", q.score, q.level);
    s
}

fn bundle_text(b: &ExplanationBundle) -> String {
    let mut s = String::new();
    let m = &b.header.metrics;
    let _ = writeln!(
        s,
        "[{}] test accuracy {:.4}, {} training samples, {} features",
        b.variant, m.test_accuracy, m.n_train_samples, m.n_features
    );
    if let Some(ki) = &b.key_insights {
        let _ = writeln!(s, "\nKey insights");
        for k in &ki.top {
            let _ = writeln!(s, "  {}", k.text);
        }
        if !ki.rest.is_empty() {
            let _ = writeln!(s, "  (+{} more)", ki.rest.len());
        }
    }
    if let Some(d) = &b.density {
        let _ = writeln!(s, "\nData density");
        for p in d {
            let _ = writeln!(s, "  {:<26} mean {:>9.3}  counts {:?}", p.feature, p.mean, p.counts);
        }
    }
    if let Some(q) = &b.quality {
        let _ = writeln!(s, "\nData quality");
        s.push_str(&quality_text(q));
    }
    if let Some(r) = &b.rules {
        let _ = writeln!(s, "\nTop decision rules");
        for rule in r {
            let _ = writeln!(s, "  {}", rule.text());
        }
    }
    if let Some(i) = &b.importances {
        let _ = writeln!(s, "\nImportant risk factors");
        for f in &i.scores {
            let _ = writeln!(s, "  {:<26} {:>6.2}%", f.feature, f.percent);
        }
        if let Some(n) = &i.note {
            let _ = writeln!(s, "  {n}");
        }
    }
    s
}

fn history_text(report: &HistoryReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>4} {:>6} {:<8} {:>9} {:>8} {:<5} digest", "id", "parent", "config", "test acc", "quality", "saved");
    for v in &report.versions {
        let parent = v.parent_id.map_or_else(|| "-".to_string(), |p| p.to_string());
        let _ = writeln!(
            s,
            "{:>4} {:>6} {:<8} {:>9.4} {:>8.2} {:<5} {}",
            v.version_id,
            parent,
            v.config_kind,
            v.metrics.test_accuracy,
            v.quality_score,
            v.saved,
            &v.table_digest[..16]
        );
    }
    let _ = writeln!(
        s,
        "committed {}, head {}; {} journal versions replayed, digests and metrics match",
        report.committed_id,
        report.head_id,
        report.replayed.len()
    );
    s
}
