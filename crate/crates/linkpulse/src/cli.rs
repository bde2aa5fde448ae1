//! Command-line entry point: ingest, layout, rank, simulate, serve,
//! summarize.
//!
//! Exit codes: 0 on success, 1 for internal failures, 2 for usage or
//! validation errors. All stdout payloads are JSON.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Config;
use crate::counters::{CounterSnapshot, CounterStore, IngestReport};
use crate::graph::LinkGraph;
use crate::ids::{PageRef, SiteId};
use crate::popularity::page_layout;
use crate::ranker::{rank_results, RankParams};
use crate::service;
use crate::simulator::{scenario_ab, write_log, ScenarioParams, SimConfig};
use crate::summarize::{
    load_corpus, prune_popular, summarize, SummarizeParams, SummaryMode,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or invalid input files: exit code 2.
    Usage(String),
    /// Everything else: exit code 1.
    Internal(anyhow::Error),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(err: E) -> Self {
        CliError::Internal(err.into())
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "linkpulse",
    version,
    about = "Track per-site link popularity, emit dynamic link layouts, and re-rank pages with local signals"
)]
pub struct Cli {
    /// JSON config file; flags override its values [env: LINKPULSE_CONFIG]
    #[arg(long, global = true, env = "LINKPULSE_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replay a click log and print per-site totals
    Ingest {
        /// Click log, JSONL with one event per line
        #[arg(long, value_name = "PATH")]
        log: PathBuf,
        /// Recent-window length in seconds [default: 604800]
        #[arg(long, value_name = "SECONDS")]
        window: Option<u64>,
    },
    /// Print the top-k slot layout for one site
    Layout {
        #[arg(long, value_name = "PATH")]
        log: PathBuf,
        /// Site to lay out
        #[arg(long, value_name = "SITE")]
        site: String,
        /// Slot-block size [default: 5]
        #[arg(long, value_name = "N")]
        k: Option<usize>,
        /// Query time in epoch seconds [default: last event in the log]
        #[arg(long, value_name = "TS")]
        now: Option<u64>,
        #[arg(long, value_name = "SECONDS")]
        window: Option<u64>,
    },
    /// Rank candidate pages by the blended score
    Rank {
        /// Edge list, JSONL
        #[arg(long, value_name = "PATH")]
        graph: PathBuf,
        #[arg(long, value_name = "PATH")]
        log: PathBuf,
        /// JSON array of {"site", "link"} candidates
        #[arg(long, value_name = "PATH")]
        candidates: PathBuf,
        /// Local-popularity blend strength [default: 1.0]
        #[arg(long, value_name = "X")]
        lambda: Option<f64>,
        /// Top-left slot boost [default: 0.25]
        #[arg(long, value_name = "X")]
        beta: Option<f64>,
        /// Slot-block size used for the top-left flag [default: 5]
        #[arg(long, value_name = "N")]
        k: Option<usize>,
        #[arg(long, value_name = "TS")]
        now: Option<u64>,
        #[arg(long, value_name = "SECONDS")]
        window: Option<u64>,
    },
    /// Generate synthetic traffic, or run the two-site ranking scenario
    Simulate {
        /// Simulation config (JSON); required unless --scenario-ab
        #[arg(long, value_name = "PATH")]
        sim: Option<PathBuf>,
        /// Output click log path; required unless --scenario-ab
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Seed override [default: value from the sim config]
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Run the built-in popular-site vs better-page scenario instead
        #[arg(long)]
        scenario_ab: bool,
    },
    /// Serve the counter API over HTTP
    Serve {
        /// Bind address [default: 127.0.0.1:8080]
        #[arg(long, value_name = "ADDR:PORT", default_value = "127.0.0.1:8080")]
        bind: String,
        /// Click log to preload before serving
        #[arg(long, value_name = "PATH")]
        log: Option<PathBuf>,
        #[arg(long, value_name = "SECONDS")]
        window: Option<u64>,
    },
    /// Summarize the popular pages of one or more sites
    Summarize {
        /// Directory of page text files
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Manifest mapping files to (site, link)
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
        /// Summary length in sentences [default: 3]
        #[arg(long, value_name = "N")]
        budget: Option<usize>,
        /// generic or query-specific [default: generic]
        #[arg(long, value_enum, default_value_t = CliMode::Generic)]
        mode: CliMode,
        /// Query terms; required with --mode query-specific
        #[arg(long, value_name = "TERMS")]
        query: Option<String>,
        /// Click log for popularity pruning; omit to skip pruning
        #[arg(long, value_name = "PATH")]
        log: Option<PathBuf>,
        /// Restrict pruning to these sites [default: every site in the log]
        #[arg(long = "site", value_name = "SITE")]
        sites: Vec<String>,
        /// Slot-block size for pruning [default: 5]
        #[arg(long, value_name = "N")]
        k: Option<usize>,
        #[arg(long, value_name = "TS")]
        now: Option<u64>,
        #[arg(long, value_name = "SECONDS")]
        window: Option<u64>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CliMode {
    Generic,
    QuerySpecific,
}

impl From<CliMode> for SummaryMode {
    fn from(mode: CliMode) -> Self {
        match mode {
            CliMode::Generic => SummaryMode::Generic,
            CliMode::QuerySpecific => SummaryMode::QuerySpecific,
        }
    }
}

/// Parses arguments and runs. clap itself exits with code 2 on bad usage.
pub fn run() -> CliResult {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| CliError::usage(e.to_string()))?,
        None => Config::default(),
    };
    match cli.command {
        Command::Ingest { log, window } => {
            apply_window(&mut config, window)?;
            run_ingest(&log, &config)
        }
        Command::Layout {
            log,
            site,
            k,
            now,
            window,
        } => {
            apply_window(&mut config, window)?;
            if let Some(k) = k {
                config.k = k;
            }
            config.validate().map_err(|e| CliError::usage(e.to_string()))?;
            run_layout(&log, &site, now, &config)
        }
        Command::Rank {
            graph,
            log,
            candidates,
            lambda,
            beta,
            k,
            now,
            window,
        } => {
            apply_window(&mut config, window)?;
            if let Some(lambda) = lambda {
                config.lambda = lambda;
            }
            if let Some(beta) = beta {
                config.beta = beta;
            }
            if let Some(k) = k {
                config.k = k;
            }
            config.validate().map_err(|e| CliError::usage(e.to_string()))?;
            run_rank(&graph, &log, &candidates, now, &config)
        }
        Command::Simulate {
            sim,
            out,
            seed,
            scenario_ab: scenario,
        } => run_simulate(sim.as_deref(), out.as_deref(), seed, scenario, &config),
        Command::Serve { bind, log, window } => {
            apply_window(&mut config, window)?;
            run_serve(&bind, log.as_deref(), &config)
        }
        Command::Summarize {
            corpus,
            manifest,
            budget,
            mode,
            query,
            log,
            sites,
            k,
            now,
            window,
        } => {
            apply_window(&mut config, window)?;
            if let Some(k) = k {
                config.k = k;
            }
            config.validate().map_err(|e| CliError::usage(e.to_string()))?;
            run_summarize(
                &corpus,
                &manifest,
                budget,
                mode.into(),
                query,
                log.as_deref(),
                &sites,
                now,
                &config,
            )
        }
    }
}

fn apply_window(config: &mut Config, window: Option<u64>) -> CliResult {
    if let Some(window) = window {
        config.window_length = window;
    }
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))
}

fn open_input(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", path.display())))
}

/// Loads a click log into a fresh store; ingest diagnostics ride along.
fn load_store(path: &Path, config: &Config) -> Result<(CounterStore, IngestReport), CliError> {
    let store = CounterStore::with_window(config.window_length, config.bucket_width)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let reader = open_input(path)?;
    let report = store
        .load_events(reader, config.regression_slack)
        .map_err(|e| CliError::Internal(e.into()))?;
    Ok((store, report))
}

fn snapshot_at(
    store: &CounterStore,
    report: &IngestReport,
    now: Option<u64>,
) -> CounterSnapshot {
    store.snapshot(now.or(report.last_ts).unwrap_or(0))
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value).map_err(anyhow::Error::from)?;
    stdout.write_all(b"\n").map_err(anyhow::Error::from)?;
    Ok(())
}

fn run_ingest(log: &Path, config: &Config) -> CliResult {
    let (store, report) = load_store(log, config)?;
    let snapshot = snapshot_at(&store, &report, None);

    #[derive(Serialize)]
    struct IngestSummary {
        ingested: u64,
        errors: Vec<crate::counters::LineDiagnostic>,
        sites: BTreeMap<SiteId, BTreeMap<crate::ids::LinkId, u64>>,
    }
    let sites = snapshot
        .sites()
        .map(|site| {
            let rows = snapshot
                .site(site)
                .expect("site listed by the snapshot")
                .iter()
                .map(|(link, counts)| (link.clone(), counts.history))
                .collect();
            (site.clone(), rows)
        })
        .collect();
    print_json(&IngestSummary {
        ingested: report.ingested,
        errors: report.errors,
        sites,
    })
}

fn run_layout(log: &Path, site: &str, now: Option<u64>, config: &Config) -> CliResult {
    let site = SiteId::new(site).map_err(|e| CliError::usage(e.to_string()))?;
    let (store, report) = load_store(log, config)?;
    let snapshot = snapshot_at(&store, &report, now);
    let layout = page_layout(&snapshot, &site, config.k)
        .map_err(|e| CliError::usage(e.to_string()))?;
    print_json(&layout)
}

fn run_rank(
    graph_path: &Path,
    log: &Path,
    candidates_path: &Path,
    now: Option<u64>,
    config: &Config,
) -> CliResult {
    let graph = LinkGraph::load_jsonl(open_input(graph_path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", graph_path.display())))?;
    let raw = std::fs::read_to_string(candidates_path)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", candidates_path.display())))?;
    let candidates: Vec<PageRef> = serde_json::from_str(&raw)
        .map_err(|e| CliError::usage(format!("{}: {e}", candidates_path.display())))?;
    let (store, report) = load_store(log, config)?;
    let snapshot = snapshot_at(&store, &report, now);
    let params = RankParams {
        damping: config.damping,
        epsilon: config.epsilon,
        max_iter: config.max_iter,
        lambda: config.lambda,
        beta: config.beta,
        k_topleft: config.k,
    };
    let ranked = rank_results(&graph, &snapshot, &candidates, &params)
        .map_err(|e| CliError::usage(e.to_string()))?;
    print_json(&ranked)
}

fn run_simulate(
    sim: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
    scenario: bool,
    config: &Config,
) -> CliResult {
    if scenario {
        let mut params = ScenarioParams {
            lambda: config.lambda,
            beta: config.beta,
            k_topleft: config.k,
            damping: config.damping,
            epsilon: config.epsilon,
            max_iter: config.max_iter,
            ..ScenarioParams::default()
        };
        if let Some(seed) = seed {
            params.seed = seed;
        }
        let report = scenario_ab(&params).map_err(|e| CliError::usage(e.to_string()))?;
        return print_json(&report);
    }
    let (Some(sim), Some(out)) = (sim, out) else {
        return Err(CliError::usage(
            "--sim and --out are required unless --scenario-ab is given",
        ));
    };
    let raw = std::fs::read_to_string(sim)
        .map_err(|e| CliError::usage(format!("cannot open {}: {e}", sim.display())))?;
    let mut sim_config: SimConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::usage(format!("{}: {e}", sim.display())))?;
    if let Some(seed) = seed {
        sim_config.seed = seed;
    }
    sim_config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let file = File::create(out).map_err(|e| {
        CliError::usage(format!("cannot create {}: {e}", out.display()))
    })?;
    let summary = write_log(&sim_config, std::io::BufWriter::new(file))
        .map_err(|e| CliError::Internal(e.into()))?;
    print_json(&summary)
}

fn run_serve(bind: &str, log: Option<&Path>, config: &Config) -> CliResult {
    let store = CounterStore::with_window(config.window_length, config.bucket_width)
        .map_err(|e| CliError::usage(e.to_string()))?;
    if let Some(log) = log {
        let reader = open_input(log)?;
        let report = store
            .load_events(reader, config.regression_slack)
            .map_err(|e| CliError::Internal(e.into()))?;
        eprintln!(
            "preloaded {} events ({} rejected)",
            report.ingested,
            report.errors.len()
        );
    }
    let runtime = tokio::runtime::Runtime::new().map_err(anyhow::Error::from)?;
    runtime.block_on(async {
        let handle = service::serve(Arc::new(store), bind, *config)
            .await
            .map_err(|e| CliError::usage(e.to_string()))?;
        eprintln!("listening on http://{}", handle.local_addr);
        handle.wait().await;
        Ok(())
    })
}

#[allow(clippy::too_many_arguments)]
fn run_summarize(
    corpus: &Path,
    manifest: &Path,
    budget: Option<usize>,
    mode: SummaryMode,
    query: Option<String>,
    log: Option<&Path>,
    sites: &[String],
    now: Option<u64>,
    config: &Config,
) -> CliResult {
    let budget = budget.unwrap_or(3);
    if budget == 0 {
        return Err(CliError::usage("budget must be at least 1"));
    }
    let docs = load_corpus(corpus, manifest).map_err(|e| CliError::usage(e.to_string()))?;

    let docs = match log {
        Some(log) => {
            let (store, report) = load_store(log, config)?;
            let snapshot = snapshot_at(&store, &report, now);
            let site_ids: Vec<SiteId> = if sites.is_empty() {
                snapshot.sites().cloned().collect()
            } else {
                sites
                    .iter()
                    .map(|s| SiteId::new(s).map_err(|e| CliError::usage(e.to_string())))
                    .collect::<Result<_, _>>()?
            };
            let (kept, missing) = prune_popular(&snapshot, &site_ids, &docs, config.k);
            for (site, link) in &missing {
                eprintln!("note: popular link {site}{link} has no doc in the corpus");
            }
            kept
        }
        None => docs,
    };

    let params = SummarizeParams {
        budget,
        mode,
        query,
        similarity_threshold: config.similarity_threshold,
        redundancy_cap: config.redundancy_cap,
        damping: config.damping,
        epsilon: config.epsilon,
        max_iter: config.max_iter,
    };
    let summary = summarize(&docs, &params).map_err(|e| CliError::usage(e.to_string()))?;
    print_json(&summary)
}
