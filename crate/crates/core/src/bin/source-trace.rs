use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use source_tracing::config::RunConfig;
use source_tracing::pipeline::{self, EvalOptions, TableInput};
use source_tracing::scoring::EnsembleMethod;
use source_tracing::Result;

/// Source-reference tracing pipeline over Grobid TEI papers.
#[derive(Parser)]
#[command(name = "source-trace", version)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Directory of TEI files.
    #[arg(long, global = true)]
    xml_dir: Option<PathBuf>,
    /// Directory for all artifacts.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// GCN training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// GCN learning rate.
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    /// GCN initialization seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Train/val split seed.
    #[arg(long, global = true)]
    split_seed: Option<u64>,
    /// Comma-separated ensemble weights, one per table.
    #[arg(long, global = true, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Ensemble by rank averaging instead of weighted mean.
    #[arg(long, global = true)]
    rank_average: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write context records for both truncation modes.
    Extract,
    /// Build per-paper graphs and node embeddings.
    BuildGraph,
    /// Train the graph model and score the validation papers.
    TrainGcn,
    /// Score every built graph with the saved checkpoint.
    Score {
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Combine score tables (`path` or `tag=path`).
    Ensemble {
        #[arg(required = true)]
        tables: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Report MAP for score tables (`path` or `tag=path`).
    Eval {
        #[arg(required = true)]
        tables: Vec<String>,
        /// Add a row for the ensemble of all tables.
        #[arg(long)]
        ensemble: bool,
        /// Add a random-score baseline row with this seed.
        #[arg(long)]
        random_baseline: Option<u64>,
        /// Evaluate all labeled papers even when a split exists.
        #[arg(long)]
        all_papers: bool,
    },
    /// Print the effective configuration.
    ShowConfig,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let o = &cli.overrides;
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(
            o.manifest.clone().unwrap_or_else(|| "manifest.json".into()),
            o.xml_dir.clone().unwrap_or_else(|| "xml".into()),
            o.work_dir.clone().unwrap_or_else(|| "work".into()),
        ),
    };
    if let Some(v) = &o.manifest {
        cfg.manifest = v.clone();
    }
    if let Some(v) = &o.xml_dir {
        cfg.xml_dir = v.clone();
    }
    if let Some(v) = &o.work_dir {
        cfg.work_dir = v.clone();
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    if let Some(v) = o.epochs {
        cfg.gcn.epochs = v;
    }
    if let Some(v) = o.learning_rate {
        cfg.gcn.learning_rate = v;
    }
    if let Some(v) = o.seed {
        cfg.gcn.seed = v;
    }
    if let Some(v) = o.split_seed {
        cfg.split.seed = v;
    }
    if let Some(v) = &o.weights {
        cfg.ensemble.weights = Some(v.clone());
    }
    if o.rank_average {
        cfg.ensemble.method = EnsembleMethod::RankAverage;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serialization is infallible")
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let tables = |specs: &[String]| specs.iter().map(|s| TableInput::parse(s)).collect::<Vec<_>>();
    match &cli.command {
        Command::Extract => println!("{}", json(&pipeline::cmd_extract(&cfg)?)),
        Command::BuildGraph => println!("{}", json(&pipeline::cmd_build_graph(&cfg)?)),
        Command::TrainGcn => println!("{}", json(&pipeline::cmd_train_gcn(&cfg)?)),
        Command::Score { out } => {
            let t = pipeline::cmd_score(&cfg, out.as_deref())?;
            println!("scored {} references in {} papers", t.len(), t.paper_ids().len());
        }
        Command::Ensemble { tables: specs, out } => {
            let t = pipeline::cmd_ensemble(&cfg, &tables(specs), out.as_deref())?;
            println!("ensembled {} ({} scores)", t.tag, t.len());
        }
        Command::Eval {
            tables: specs,
            ensemble,
            random_baseline,
            all_papers,
        } => {
            let opts = EvalOptions {
                ensemble: *ensemble,
                random_baseline: *random_baseline,
                all_papers: *all_papers,
            };
            let report = pipeline::cmd_eval(&cfg, &tables(specs), &opts)?;
            print!("{}", report.to_text());
            println!("{}", json(&report));
        }
        Command::ShowConfig => println!("{}", cfg.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
