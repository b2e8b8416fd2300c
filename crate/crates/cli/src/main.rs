use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qrag_core::engine::{self, EngineConfig, Prepared, RetrieveOptions, CONFIG_FILE};
use qrag_core::evalkit::{self, Run};
use qrag_core::quantum::FusionMode;

#[derive(Parser)]
#[command(name = "qrag", version, about = "Hybrid BM25 + dense retrieval with quantum-inspired re-ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, filter, train the tokenizer and chunk a JSONL corpus.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build and persist all indexes.
    Build {
        /// JSONL file, directory of JSONL files, or an `ingest` output directory.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one query and print the response JSON.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        mode: Option<FusionMode>,
        #[arg(long)]
        k: Option<usize>,
        text: String,
    },
    /// Evaluate a query set against relevance judgments.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        qrels: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        ks: Vec<usize>,
        #[arg(long)]
        mode: Option<FusionMode>,
        /// Also write the ranked run as JSONL.
        #[arg(long)]
        run_out: Option<PathBuf>,
    },
    /// Serve the search API.
    Serve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => EngineConfig::from_json_file(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(EngineConfig::default()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (`qrag ... | head`) is not an error
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_engine(index: &Path) -> Result<engine::Engine> {
    engine::load_index(index).with_context(|| format!("loading index {}", index.display()))
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Ingest { input, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let prepared = engine::prepare(&input, &cfg)?;
            prepared.save(&out)?;
            print_json(&prepared.stats)
        }
        Command::Build { corpus, out, config } => {
            // an ingest directory carries the config it was made with
            let stored = corpus.join(CONFIG_FILE);
            let cfg = match config {
                Some(p) => load_config(Some(&p))?,
                None if corpus.is_dir() && stored.is_file() => Prepared::load(&corpus)?.config,
                None => EngineConfig::default(),
            };
            let manifest = engine::build_all(&corpus, &cfg, &out)?;
            print_json(&manifest)
        }
        Command::Query { index, mode, k, text } => {
            let engine = load_engine(&index)?;
            let r = engine.retrieve(
                &text,
                &RetrieveOptions {
                    mode,
                    k,
                    query_vector: None,
                },
            )?;
            print_json(&r)
        }
        Command::Eval {
            index,
            queries,
            qrels,
            ks,
            mode,
            run_out,
        } => {
            if ks.is_empty() {
                bail!("--ks needs at least one cutoff");
            }
            let engine = load_engine(&index)?;
            let queries = evalkit::read_queries(&queries)?;
            let qrels = evalkit::read_qrels(&qrels)?;
            let depth = ks.iter().copied().max().unwrap_or(10);
            let opts = RetrieveOptions {
                mode,
                k: Some(depth),
                query_vector: None,
            };
            let mut run = Run::new();
            for q in &queries {
                let r = engine.retrieve(&q.text, &opts).with_context(|| format!("query {}", q.qid))?;
                run.insert(q.qid.clone(), r.hits.into_iter().map(|h| h.chunk_id).collect());
            }
            if let Some(p) = run_out {
                evalkit::write_run(&p, &run)?;
            }
            print_json(&evalkit::evaluate_run(&run, &qrels, &ks)?)
        }
        Command::Serve { index, addr } => {
            let engine = Arc::new(load_engine(&index)?);
            tokio::runtime::Runtime::new()?.block_on(qrag::server::serve(engine, &addr))
        }
    }
}
