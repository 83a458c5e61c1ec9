//! Command-line interface.
//!
//! Exit status is 0 on success, 1 for usage errors and bad input, 2 for
//! internal failures.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use evidence_core::eval::Species;
use evidence_core::pipeline::RunRequest;
use evidence_core::MoleculeId;
use serde_json::json;

use crate::adjudications::AdjudicationStore;
use crate::config::EngineConfig;
use crate::engine::{load_library, Engine, ProviderSet};
use crate::error::{EngineError, Result};
use crate::fixtures::{golden_json, load_queries, HeuristicModel};
use crate::runs::{RunStore, ADJUDICATIONS};
use crate::scripts::{save_scripts, RecordingModel};
use crate::service::AppState;
use crate::{report, snapshot, store};

#[derive(Parser, Debug)]
#[command(name = "evsynth", version, about = "Evidence synthesis over a molecule document corpus")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Link and chunk a JSONL corpus into a store directory.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the lexical, dense and multi-vector index snapshot of a store.
    Index {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer one question and print the result as JSON.
    Query {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        molecule: Option<MoleculeId>,
        #[arg(long)]
        run_id: Option<String>,
        /// Also persist the run record and trace here.
        #[arg(long)]
        runs: Option<PathBuf>,
        /// Print the trace with the answer.
        #[arg(long)]
        trace: bool,
        query: String,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Metrics and portfolio analytics.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Maintain the offline replay fixtures.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Per-query confusion counts and metrics from an adjudication log.
    Report {
        #[arg(long)]
        adjudications: PathBuf,
        #[arg(long)]
        adjudicator: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Reproductive sensitivity ratio and zone per NOAEL pair.
    Rsr {
        #[arg(long)]
        input: PathBuf,
    },
    /// Outcome agreement between two species.
    Concordance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "rat")]
        a: String,
        #[arg(long, default_value = "rabbit")]
        b: String,
    },
    /// Share of the portfolio in each attrition category.
    Attrition {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum FixturesCommand {
    /// Run the fixture queries with the rule-based model, recording its
    /// responses as replay scripts and the results as golden files.
    Record {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        scripts: PathBuf,
        #[arg(long)]
        golden: PathBuf,
    },
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| EngineError::Internal(e.to_string()))?;
    text.push('\n');
    write_stdout(&text)
}

/// A reader that went away (`| head`) is not an error.
fn write_stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(EngineError::Internal(e.to_string())),
        _ => Ok(()),
    }
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(p),
        None => Ok(EngineConfig::default()),
    }
}

fn species(s: &str) -> Result<Species> {
    Species::parse(s).ok_or_else(|| EngineError::Invalid(format!("unknown species {s:?}")))
}

pub fn execute(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { corpus, registry, out } => {
            let r = store::ingest_corpus(&corpus, &registry, &out, config.chunking)?;
            print_json(&r)
        }
        Command::Index { store, out } => {
            let s = store::CorpusStore::open(&store)?;
            let providers = ProviderSet::from_config(&config.providers)?;
            let m = snapshot::index_store(&s, &out, &*providers.embedder, config.bm25)?;
            print_json(&m)
        }
        Command::Query { store, index, molecule, run_id, runs, trace, query } => {
            let engine = Engine::open(config, &store, &index)?;
            let run_id = run_id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
            let request = RunRequest { run_id: run_id.clone(), query: query.clone(), molecule_id: molecule };
            let persisted = match &runs {
                Some(dir) => {
                    let rs = RunStore::open(dir)?;
                    let rec = rs.start(&run_id, &query, request.molecule_id.clone())?;
                    Some((rs, rec))
                }
                None => None,
            };
            let out = match engine.run(&request) {
                Ok(out) => out,
                Err(e) => {
                    if let Some((rs, rec)) = persisted {
                        rs.fail(rec, e.to_string())?;
                    }
                    return Err(e);
                }
            };
            let mut value =
                json!({ "run_id": run_id, "plan": out.plan, "answer": out.answer, "structured": out.structured });
            if trace {
                value["trace"] = serde_json::to_value(&out.trace).expect("trace serializes");
            }
            if let Some((rs, rec)) = persisted {
                rs.complete(rec, out)?;
            }
            print_json(&value)
        }
        Command::Serve { store, index, runs, addr } => {
            // Built outside the runtime: blocking HTTP clients must not be
            // created or dropped on an async worker.
            let engine = Arc::new(Engine::open(config, &store, &index)?);
            let runs = Arc::new(RunStore::open(&runs)?);
            let adjudications = Arc::new(AdjudicationStore::open(&runs.dir().join(ADJUDICATIONS))?);
            let state = Arc::new(AppState { engine: Some(engine), runs, adjudications });
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| EngineError::Internal(e.to_string()))?;
            let served = rt.block_on(crate::service::serve(state.clone(), addr));
            drop(rt);
            drop(state);
            served.map_err(|e| EngineError::Invalid(format!("cannot serve on {addr}: {e}")))
        }
        Command::Eval { command } => match command {
            EvalCommand::Report { adjudications, adjudicator, format } => {
                let store = AdjudicationStore::open(&adjudications)?;
                let records: Vec<_> = store
                    .all()
                    .into_iter()
                    .filter(|r| adjudicator.as_deref().is_none_or(|a| r.adjudicator == a))
                    .collect();
                let rows = report::metrics_table(&records)?;
                match format {
                    Format::Csv => write_stdout(&report::metrics_csv(&rows)),
                    Format::Json => print_json(&rows),
                }
            }
            EvalCommand::Rsr { input } => print_json(&report::rsr_table(&report::read_noael_pairs(&input)?)?),
            EvalCommand::Concordance { input, a, b } => {
                let (sa, sb) = (species(&a)?, species(&b)?);
                let c = report::concordance(&report::read_species_outcomes(&input)?, sa, sb)?;
                print_json(&json!({ "a": sa, "b": sb, "concordance": c }))
            }
            EvalCommand::Attrition { input } => print_json(&report::attrition(&report::read_attrition(&input)?)?),
        },
        Command::Fixtures { command: FixturesCommand::Record { store, index, queries, scripts, golden } } => {
            let library = load_library(&config)?;
            let recorder = RecordingModel::new(HeuristicModel::new(library));
            let mut providers = ProviderSet::stub(config.providers.dimension, Default::default());
            providers.model = Box::new(recorder.clone());
            let engine = Engine::with_providers(config, &store, &index, providers)?;
            std::fs::create_dir_all(&golden).map_err(EngineError::io(&golden))?;
            let queries = load_queries(&queries)?;
            for q in &queries {
                let out = engine.run(&q.request())?;
                let path = golden.join(format!("{}.json", q.run_id));
                std::fs::write(&path, golden_json(&out)).map_err(EngineError::io(&path))?;
            }
            let recorded = recorder.recorded();
            save_scripts(&scripts, &recorded)?;
            print_json(&json!({ "queries": queries.len(), "scripts": recorded.len() }))
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}
