//! `credrank`: build training sets, train and evaluate rankers, serve
//! scores, load-test the service, and report on its stores.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "credrank", version, about = "Credibility ranking for short social-media messages")]
struct Cli {
    /// Seed for every random choice (folds, shuffles, restarts, bootstrap).
    #[arg(long, global = true, env = "CREDRANK_SEED", default_value_t = 42)]
    seed: u64,

    /// Freeze the clock at this RFC 3339 instant instead of reading the
    /// system time.
    #[arg(long, global = true, env = "CREDRANK_CLOCK")]
    clock: Option<DateTime<Utc>>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate crowd annotations into a graded training set.
    BuildTraining(BuildTrainingArgs),
    /// Train a model and write the artifact (model + scaler + display bins).
    Train(TrainArgs),
    /// k-fold cross-validation of one or more trainers on the same folds.
    Evaluate(EvaluateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Load-test a running service and write a latency report.
    Bench(BenchArgs),
    /// Summaries over the service's stores.
    Report(ReportArgs),
    /// Write a synthetic training set with a planted weight vector.
    Synth(SynthArgs),
    /// Print the feature schema document and its version.
    Schema,
}

#[derive(Debug, Args)]
struct BuildTrainingArgs {
    #[arg(long)]
    annotations: PathBuf,
    /// Message fixtures, one JSON record per line.
    #[arg(long)]
    fixtures: PathBuf,
    /// Directory of `<name>.txt` word lists replacing the bundled ones.
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Recorded URL reputation answers (JSON lines).
    #[arg(long)]
    reputation: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
    /// Where to write the exclusion report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrainerName {
    Svmrank,
    #[value(name = "coordinate_ascent", alias = "coordinate-ascent")]
    CoordinateAscent,
}

#[derive(Debug, Args)]
struct HyperArgs {
    /// SVM regularization trade-off.
    #[arg(long, default_value_t = 100.0)]
    c: f64,
    #[arg(long, default_value_t = 200)]
    max_epochs: usize,
    /// Coordinate ascent restarts.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    /// NDCG cutoff optimized by coordinate ascent.
    #[arg(long, default_value_t = 50)]
    target_cutoff: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    training: PathBuf,
    #[arg(long, value_enum, default_value_t = TrainerName::Svmrank)]
    trainer: TrainerName,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    training: PathBuf,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [TrainerName::Svmrank, TrainerName::CoordinateAscent])]
    trainers: Vec<TrainerName>,
    #[arg(long, value_delimiter = ',', default_values_t = [25, 50, 75, 100])]
    cutoffs: Vec<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Directory for `cv_report.json` and `cv_table.txt`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "CREDRANK_MODEL")]
    model: PathBuf,
    /// Fixture file backing the message source.
    #[arg(long, env = "CREDRANK_FIXTURES", required_unless_present = "source_url")]
    fixtures: Option<PathBuf>,
    /// Remote message source (`GET {url}/tweets/{id}`), instead of fixtures.
    #[arg(long, env = "CREDRANK_SOURCE_URL", conflicts_with = "fixtures")]
    source_url: Option<String>,
    #[arg(long, env = "CREDRANK_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, env = "CREDRANK_TTL", default_value_t = 900, value_parser = clap::value_parser!(i64).range(1..))]
    ttl: i64,
    #[arg(long, env = "CREDRANK_BATCH_LIMIT", default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    batch_limit: u64,
    /// Directory holding the append-only stores.
    #[arg(long, env = "CREDRANK_STORES", default_value = "stores")]
    stores: PathBuf,
    /// Recorded URL reputation answers (JSON lines).
    #[arg(long, env = "CREDRANK_REPUTATION", conflicts_with = "reputation_url")]
    reputation: Option<PathBuf>,
    /// Live reputation provider (`GET {url}?url=...`).
    #[arg(long, env = "CREDRANK_REPUTATION_URL")]
    reputation_url: Option<String>,
    /// Extra delay before every upstream fetch, to simulate a slow API.
    #[arg(long, default_value_t = 0)]
    upstream_delay_ms: u64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Base URL of a running service.
    #[arg(long, env = "CREDRANK_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    concurrency: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    requests: u64,
    /// Take message ids from this fixture file.
    #[arg(long, required_unless_present = "ids")]
    fixtures: Option<PathBuf>,
    /// Explicit comma-separated ids.
    #[arg(long, value_delimiter = ',')]
    ids: Vec<String>,
    /// Send one untimed pass over the ids first, so the run sees a warm cache.
    #[arg(long)]
    warm: bool,
    /// Directory for `latency_report.json` and `latency_cdf.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    Feedback,
    Distribution,
    Latency,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(value_enum)]
    kind: ReportKind,
    #[arg(long, env = "CREDRANK_STORES", default_value = "stores")]
    stores: PathBuf,
    /// Keywords selecting the subset (distribution report).
    #[arg(long, value_delimiter = ',')]
    keywords: Vec<String>,
    /// Background sample size (distribution report).
    #[arg(long, default_value_t = 1000)]
    sample: usize,
    /// Bootstrap resamples (feedback report).
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    groups: usize,
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    /// Margin between grade levels; with `--noise 0`, any positive value
    /// makes the grades linearly separable.
    #[arg(long, default_value_t = 0.0)]
    separation: f64,
    #[arg(long, short)]
    out: PathBuf,
}

/// Failure split by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = commands::run(cli);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
