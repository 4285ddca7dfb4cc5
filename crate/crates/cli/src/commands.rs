use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use chrono::{DateTime, Utc};

use credrank_core::analytics::{
    feedback_summary, latency_report, score_distribution, AnalyticsError, DEFAULT_QUANTILES,
};
use credrank_core::features::{
    FeatureConfig, FeatureExtractor, FeatureSchema, HttpReputationProvider, Lexicons, NoReputation,
    ReputationClient, ReputationLookup, ReputationProvider, ReputationSnapshot,
};
use credrank_core::labeling::{build_training_set, load_annotations, LabeledExample, TrainingSet};
use credrank_core::ranking::synthetic::{generate, SyntheticSpec};
use credrank_core::ranking::{
    cross_validate_all, groups_from_training_set, render_table, CoordinateAscentOptions, SvmRankOptions, Trainer,
};
use credrank_core::scoring::{load_model, save_model, train_artifact};
use credrank_core::service::{run_load, AppState, ServiceConfig, Stores, FEEDBACK_FILE, LATENCY_FILE, SCORES_FILE};
use credrank_core::tweet::{load_fixture, DelayedSource, FixtureSource, HttpSource, TweetSource};
use credrank_core::{Clock, FixedClock, SystemClock};

use crate::{
    usage, BenchArgs, BuildTrainingArgs, Cli, Command, EvaluateArgs, Failure, HyperArgs, ReportArgs, ReportKind,
    ServeArgs, SynthArgs, TrainArgs, TrainerName,
};

type Result<T> = std::result::Result<T, Failure>;

// stdout may be a closed pipe (`credrank ... | head`); that is not an error.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub fn run(cli: Cli) -> Result<()> {
    let clock: Arc<dyn Clock> = match cli.clock {
        Some(at) => Arc::new(FixedClock(at)),
        None => Arc::new(SystemClock),
    };
    match cli.command {
        Command::BuildTraining(a) => build_training(a, clock.now()),
        Command::Train(a) => train(a, cli.seed),
        Command::Evaluate(a) => evaluate(a, cli.seed),
        Command::Serve(a) => serve(a, cli.seed, clock),
        Command::Bench(a) => bench(a),
        Command::Report(a) => report(a, cli.seed),
        Command::Synth(a) => synth(a, cli.seed),
        Command::Schema => {
            outln!("# version {}", FeatureSchema::version());
            out!("{}", FeatureSchema::to_json());
            Ok(())
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} {} does not exist", path.display())))
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).context("serializing report")?;
    s.push('\n');
    Ok(s)
}

fn build_training(a: BuildTrainingArgs, now: DateTime<Utc>) -> Result<()> {
    require_file(&a.annotations, "annotation file")?;
    require_file(&a.fixtures, "fixture file")?;
    let config = match &a.lexicons {
        Some(dir) if !dir.is_dir() => return Err(usage(format!("lexicon directory {} does not exist", dir.display()))),
        Some(dir) => FeatureConfig {
            lexicons: Lexicons::with_overrides(dir).context("loading lexicons")?,
            ..Default::default()
        },
        None => FeatureConfig::default(),
    };
    let reputation: Box<dyn ReputationLookup> = match &a.reputation {
        Some(p) => {
            require_file(p, "reputation file")?;
            Box::new(ReputationSnapshot::load(p).context("loading reputation snapshot")?)
        }
        None => Box::new(NoReputation),
    };
    let annotations = load_annotations(&a.annotations).context("reading annotations")?;
    let fixtures = load_fixture(&a.fixtures, now).context("reading fixtures")?;
    for s in &fixtures.skipped {
        eprintln!("skipped fixture line {}: {}", s.line, s.reason);
    }
    let tweets: HashMap<_, _> = fixtures.records.into_iter().map(|t| (t.id.clone(), t)).collect();
    let set = build_training_set(&annotations, &tweets, &FeatureExtractor::new(config), reputation.as_ref(), now);

    let mut body = Vec::new();
    set.write_jsonl(&mut body).context("encoding training set")?;
    write_file(&a.out, std::str::from_utf8(&body).expect("json is utf-8"))?;
    if let Some(p) = &a.report {
        write_file(p, &to_json(&set.exclusions)?)?;
    }
    let r = &set.exclusions;
    outln!("examples {} of {} annotated messages", set.len(), r.considered);
    for (grade, n) in (1..=5).zip(set.grade_histogram()) {
        outln!("grade {grade}  {n}");
    }
    for (reason, n) in &r.by_reason {
        outln!("excluded ({reason})  {n}");
    }
    Ok(())
}

fn read_training(path: &Path) -> Result<TrainingSet> {
    require_file(path, "training set")?;
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(TrainingSet::read_jsonl(file).context("reading training set")?)
}

fn make_trainer(name: TrainerName, h: &HyperArgs, seed: u64) -> Result<Trainer> {
    Ok(match name {
        TrainerName::Svmrank => {
            if !(h.c > 0.0 && h.c.is_finite()) {
                return Err(usage("--c must be a positive number"));
            }
            Trainer::Svmrank(SvmRankOptions {
                c: h.c,
                max_epochs: h.max_epochs,
                seed,
                ..Default::default()
            })
        }
        TrainerName::CoordinateAscent => {
            if h.target_cutoff == 0 {
                return Err(usage("--target-cutoff must be at least 1"));
            }
            Trainer::CoordinateAscent(CoordinateAscentOptions {
                n_restarts: h.restarts,
                target_cutoff: h.target_cutoff,
                seed,
                ..Default::default()
            })
        }
    })
}

fn train(a: TrainArgs, seed: u64) -> Result<()> {
    let set = read_training(&a.training)?;
    let trainer = make_trainer(a.trainer, &a.hyper, seed)?;
    let groups = groups_from_training_set(&set);
    let artifact = train_artifact(&groups, &trainer).context("training")?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_model(&artifact, &a.out).context("saving model")?;
    let m = &artifact.model.metadata;
    outln!("model {} ({} examples, {} groups)", artifact.model_version, set.len(), groups.len());
    outln!(
        "iterations {}  converged {}  wall {:.3} s",
        m.iterations, m.converged, m.wall_time_secs
    );
    outln!("bins {:?}", artifact.bins.thresholds);
    Ok(())
}

fn evaluate(a: EvaluateArgs, seed: u64) -> Result<()> {
    if a.k < 2 {
        return Err(usage("--k must be at least 2"));
    }
    if a.trainers.is_empty() {
        return Err(usage("--trainers needs at least one trainer"));
    }
    let set = read_training(&a.training)?;
    let trainers = a
        .trainers
        .iter()
        .map(|&t| make_trainer(t, &a.hyper, seed))
        .collect::<Result<Vec<_>>>()?;
    let groups = groups_from_training_set(&set);
    let reports = cross_validate_all(&groups, a.k, &trainers, &a.cutoffs, seed).context("cross-validation")?;
    let table = render_table(&reports);
    write_file(&a.out_dir.join("cv_report.json"), &to_json(&reports)?)?;
    write_file(&a.out_dir.join("cv_table.txt"), &table)?;
    out!("{table}");
    Ok(())
}

fn serve(a: ServeArgs, seed: u64, clock: Arc<dyn Clock>) -> Result<()> {
    require_file(&a.model, "model file")?;
    let artifact = load_model(&a.model).context("loading model")?;
    let source: Arc<dyn TweetSource> = match (&a.fixtures, &a.source_url) {
        (Some(path), _) => {
            require_file(path, "fixture file")?;
            let load = load_fixture(path, clock.now()).context("reading fixtures")?;
            for s in &load.skipped {
                tracing::warn!(line = s.line, "skipped fixture line: {}", s.reason);
            }
            let fixtures = FixtureSource::new(load.records);
            if a.upstream_delay_ms > 0 {
                Arc::new(DelayedSource::new(fixtures, Duration::from_millis(a.upstream_delay_ms)))
            } else {
                Arc::new(fixtures)
            }
        }
        (None, Some(url)) => Arc::new(HttpSource::new(url.clone(), Duration::from_secs(10))),
        (None, None) => return Err(usage("either --fixtures or --source-url is required")),
    };
    let config = ServiceConfig {
        batch_limit: a.batch_limit as usize,
        ttl_secs: a.ttl,
        seed,
        ..Default::default()
    };
    let provider: Arc<dyn ReputationProvider> = match (&a.reputation, &a.reputation_url) {
        (Some(p), _) => {
            require_file(p, "reputation file")?;
            Arc::new(ReputationSnapshot::load(p).context("loading reputation snapshot")?)
        }
        (None, Some(url)) => Arc::new(HttpReputationProvider::new(url.clone(), config.reputation_timeout)),
        (None, None) => Arc::new(ReputationSnapshot::default()),
    };
    let reputation = ReputationClient::new(provider, config.reputation_timeout);
    let stores = Stores::open(&a.stores).with_context(|| format!("opening stores in {}", a.stores.display()))?;

    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        let model_version = artifact.model_version.clone();
        let state = Arc::new(AppState::new(artifact, source, reputation, stores, clock, config));
        tracing::info!(addr = %listener.local_addr()?, model = %model_version, "serving");
        credrank_core::service::serve(listener, state, shutdown_signal()).await?;
        tracing::info!("stores flushed, bye");
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

fn bench(a: BenchArgs) -> Result<()> {
    let ids = if !a.ids.is_empty() {
        a.ids.clone()
    } else {
        let path = a.fixtures.as_ref().expect("clap enforces --fixtures or --ids");
        require_file(path, "fixture file")?;
        let load = load_fixture(path, Utc::now()).context("reading fixtures")?;
        load.records.into_iter().map(|t| t.id).collect()
    };
    if ids.is_empty() {
        return Err(usage("no message ids to request"));
    }
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    let load = rt.block_on(async {
        if a.warm {
            run_load(&a.url, &ids, ids.len(), a.concurrency as usize).await;
        }
        run_load(&a.url, &ids, a.requests as usize, a.concurrency as usize).await
    });
    if load.failed_requests == load.records.len() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "all {} requests failed; is the service running at {}?",
            load.records.len(),
            a.url
        )));
    }
    let report = latency_report(&load.records, &DEFAULT_QUANTILES).context("latency report")?;
    write_file(&a.out_dir.join("latency_report.json"), &to_json(&report)?)?;
    write_file(&a.out_dir.join("latency_cdf.csv"), &report.cdf_csv())?;
    out!("{}", report.to_table());
    outln!(
        "failed {}  cache hits {}  wall {:.2} s",
        load.failed_requests,
        load.cache_hits,
        load.wall.as_secs_f64()
    );
    Ok(())
}

fn analytics_failure(e: AnalyticsError) -> Failure {
    Failure::Runtime(e.into())
}

fn report(a: ReportArgs, seed: u64) -> Result<()> {
    if !a.stores.is_dir() {
        return Err(usage(format!("store directory {} does not exist", a.stores.display())));
    }
    let replay = |name: &str| a.stores.join(name);
    match a.kind {
        ReportKind::Feedback => {
            let entries = credrank_core::service::replay(replay(FEEDBACK_FILE)).context("replaying feedback")?;
            let s = feedback_summary(&entries, a.resamples, seed).map_err(analytics_failure)?;
            write_file(&a.out_dir.join("feedback_summary.json"), &to_json(&s)?)?;
            outln!("entries {}  (95% bootstrap CI, {} resamples, seed {})", s.n, s.resamples, s.seed);
            let row = |name: &str, e: &credrank_core::analytics::Estimate| {
                outln!("{name:<28}{:>8.2}  [{:.2}, {:.2}]", e.pct, e.ci_low, e.ci_high)
            };
            row("agreed", &s.agreed);
            row("disagreed", &s.disagreed);
            row("  should be higher", &s.should_be_higher);
            row("  should be lower", &s.should_be_lower);
            for m in &s.magnitude {
                row(&format!("  off by {}", m.magnitude), &m.estimate);
            }
        }
        ReportKind::Distribution => {
            if a.keywords.iter().all(|k| k.trim().is_empty()) {
                return Err(usage("--keywords is required for the distribution report"));
            }
            let records = credrank_core::service::replay(replay(SCORES_FILE)).context("replaying scores")?;
            let r = score_distribution(&records, &a.keywords, a.sample, seed).map_err(analytics_failure)?;
            write_file(&a.out_dir.join("distribution.json"), &to_json(&r)?)?;
            outln!("subset n={} ({})  background n={}", r.subset_n, r.keywords.join(","), r.background_n);
            outln!("{:<8}{:>10}{:>12}", "score", "subset", "background");
            for k in 0..7 {
                outln!("{:<8}{:>10.3}{:>12.3}", k + 1, r.subset[k], r.background[k]);
            }
        }
        ReportKind::Latency => {
            let records = credrank_core::service::replay(replay(LATENCY_FILE)).context("replaying latency")?;
            let r = latency_report(&records, &DEFAULT_QUANTILES).map_err(analytics_failure)?;
            write_file(&a.out_dir.join("latency_report.json"), &to_json(&r)?)?;
            write_file(&a.out_dir.join("latency_cdf.csv"), &r.cdf_csv())?;
            out!("{}", r.to_table());
        }
    }
    Ok(())
}

fn synth(a: SynthArgs, seed: u64) -> Result<()> {
    if a.groups == 0 || a.items < 2 {
        return Err(usage("need at least one group of two items"));
    }
    if !(a.noise >= 0.0 && a.separation >= 0.0 && a.noise.is_finite() && a.separation.is_finite()) {
        return Err(usage("--noise and --separation must be non-negative"));
    }
    let (groups, _) = generate(&SyntheticSpec {
        groups: a.groups,
        items_per_group: a.items,
        noise: a.noise,
        seed,
        separation: a.separation,
    });
    let examples = groups
        .iter()
        .flat_map(|g| {
            g.items.iter().zip(&g.grades).enumerate().map(|(i, (x, &grade))| LabeledExample {
                tweet_id: format!("{}-{i}", g.event_id),
                event_id: g.event_id.clone(),
                grade,
                features: x.clone(),
            })
        })
        .collect();
    let set = TrainingSet::from_examples(examples);
    let mut body = Vec::new();
    set.write_jsonl(&mut body).context("encoding training set")?;
    write_file(&a.out, std::str::from_utf8(&body).expect("json is utf-8"))?;
    outln!("wrote {} examples in {} groups", set.len(), a.groups);
    Ok(())
}
