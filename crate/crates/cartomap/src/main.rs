use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use cartomap::config::PipelineConfig;
use cartomap::pipeline::{Pipeline, RunStatus, Stage, StageReport};
use cartomap::service::{MapService, ServiceConfig};
use cartomap::{ingest, Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cartomap", version, about = "Build and serve navigable maps of document corpora")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Input CSV (overrides `input`).
    #[arg(long, short, global = true)]
    input: Option<PathBuf>,
    /// Output directory (overrides `output`).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Re-run stages whose inputs and parameters are unchanged.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Read the corpus CSV into normalized records.
    Ingest,
    /// Extract n-gram terms and build the tf-idf matrix.
    Vectorize,
    /// Fit the latent model and embed every entity.
    Embed,
    /// Nearest-neighbor lists between all entity types.
    Knn,
    /// 2D layout of all entities.
    Project,
    /// Hierarchical clusters and their names.
    Cluster,
    /// Assemble the serving snapshot.
    Export,
    /// Render the static density tile pyramid.
    Raster,
    /// Build the facet and tile indices.
    Index,
    /// Run every stage in order.
    RunAll,
    /// Serve the map over HTTP.
    Serve(ServeArgs),
    /// Write a synthetic corpus with known topics.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Tile cache capacity.
    #[arg(long)]
    cache_size: Option<usize>,
    /// Render threads (0: one per CPU).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    topics: usize,
    #[arg(long, default_value_t = 100)]
    docs_per_topic: usize,
    #[arg(long, default_value_t = 40)]
    topic_vocab: usize,
    #[arg(long, default_value_t = 30)]
    shared_vocab: usize,
    /// CSV destination.
    #[arg(long)]
    csv: PathBuf,
    /// Optional JSON with each document's generating topic.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(i) = &c.input {
        cfg.input = Some(i.clone());
    }
    if let Some(o) = &c.output {
        cfg.output = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.check()?;
    Ok(cfg)
}

fn print_report(r: &StageReport) {
    match r.status {
        RunStatus::Skipped => println!("{:<10} skipped (unchanged)", r.stage.name()),
        RunStatus::Executed => println!("{:<10} done in {:.0} ms", r.stage.name(), r.timings_ms.get("total").copied().unwrap_or(0.0)),
    }
}

fn synth(args: &SynthArgs, seed: u64) -> Result<()> {
    let corpus = cartomap_core::corpus::synth_corpus(args.topics, args.docs_per_topic, args.topic_vocab, args.shared_vocab, seed)?;
    ingest::write_csv(&args.csv, &corpus.records)?;
    if let Some(p) = &args.truth {
        let truth = serde_json::json!({
            "doc_ids": corpus.records.iter().map(|r| r.doc_id.clone()).collect::<Vec<_>>(),
            "topics": corpus.topics,
            "topic_vocab": corpus.topic_vocab,
            "shared_vocab": corpus.shared_vocab,
        });
        std::fs::write(p, truth.to_string()).map_err(|e| Error::io(p, e))?;
    }
    println!("wrote {} documents to {}", corpus.records.len(), args.csv.display());
    Ok(())
}

fn serve(cfg: &PipelineConfig, args: &ServeArgs) -> Result<()> {
    let root = cfg.serve.snapshot.clone().unwrap_or_else(|| cfg.output.clone());
    let workers = args.workers.unwrap_or(cfg.serve.workers);
    let svc_cfg = ServiceConfig {
        cache_size: args.cache_size.unwrap_or(cfg.serve.cache_size),
        zoom_bands: cfg.serve.zoom_bands.clone(),
        workers: if workers == 0 { ServiceConfig::default().workers } else { workers },
        ..ServiceConfig::default()
    };
    let svc = Arc::new(MapService::open(&root, svc_cfg)?);
    let port = args.port.unwrap_or(cfg.serve.port);
    let addr: SocketAddr = format!("{}:{port}", args.host)
        .parse()
        .map_err(|e| Error::Input(format!("bad listen address: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(cartomap::server::serve(svc, addr)).map_err(|e| Error::io(addr.to_string(), e))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let stage = match &cli.command {
        Command::Synth(a) => return synth(a, cfg.seed),
        Command::Serve(a) => return serve(&cfg, a),
        Command::RunAll => None,
        Command::Ingest => Some(Stage::Ingest),
        Command::Vectorize => Some(Stage::Vectorize),
        Command::Embed => Some(Stage::Embed),
        Command::Knn => Some(Stage::Knn),
        Command::Project => Some(Stage::Project),
        Command::Cluster => Some(Stage::Cluster),
        Command::Export => Some(Stage::Export),
        Command::Raster => Some(Stage::Raster),
        Command::Index => Some(Stage::Index),
    };
    let mut p = Pipeline::new(cfg);
    p.force = cli.common.force;
    p.verbose = cli.common.verbose;
    match stage {
        Some(s) => print_report(&p.run(s)?),
        None => {
            for s in Stage::ALL {
                print_report(&p.run(s)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
