//! The `symham` command line: dataset generation, search, evaluation and
//! reporting over a run directory.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{DataConfig, ExperimentConfig};
pub use run::{eval, gen_data, load_best, report, search, BestExpression, EvalSummary, Report, RunDir};

use crate::error::{Error, Result};
use crate::expr::ExpressionTree;
use crate::systems::Dataset;

#[derive(Debug, Parser)]
#[command(name = "symham", version, about = "Search for closed-form Hamiltonians that explain observed trajectories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON). Defaults to <out>/config.json.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for scoring and data generation.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Run directory; overrides the config's output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the training and test datasets.
    GenData,
    /// Run the search and fine-tune the resulting pool.
    Search {
        /// Overrides search.iterations
        #[arg(long)]
        iterations: Option<usize>,
        /// Overrides search.samples
        #[arg(long)]
        samples: Option<usize>,
        /// Continue from search/checkpoint.json if present.
        #[arg(long)]
        resume: bool,
    },
    /// Roll out the best expression on the test set.
    Eval {
        /// Test dataset directory; defaults to <out>/data/test.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Expression tree JSON to evaluate instead of the search result.
        #[arg(long)]
        expr: Option<PathBuf>,
    },
    /// Summarize a finished run.
    Report,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::Structural(_) => 2,
        Error::Io { .. } | Error::Format { .. } | Error::Json(_) => 3,
        _ => 4,
    }
}

fn resolve_config(common: &Common) -> Result<ExperimentConfig> {
    let path = match (&common.config, &common.out) {
        (Some(p), _) => p.clone(),
        (None, Some(out)) => RunDir::new(out).config(),
        (None, None) => return Err(Error::Usage("either --config or --out is required".into())),
    };
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn load_tree(path: &std::path::Path) -> Result<ExpressionTree> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(best) = serde_json::from_str::<BestExpression>(&text) {
        return Ok(best.tree);
    }
    ExpressionTree::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Executes one parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    let work = || -> Result<()> {
        match cli.command {
            Command::Report => {
                let out = match (&cli.common.out, &cli.common.config) {
                    (Some(o), _) => o.clone(),
                    (None, Some(_)) => resolve_config(&cli.common)?.output,
                    (None, None) => return Err(Error::Usage("report needs --out or --config".into())),
                };
                report(&RunDir::new(out)).map(|_| ())
            }
            Command::GenData => {
                let cfg = resolve_config(&cli.common)?;
                gen_data(&cfg, &RunDir::new(&cfg.output)).map(|_| ())
            }
            Command::Search {
                iterations,
                samples,
                resume,
            } => {
                let mut cfg = resolve_config(&cli.common)?;
                if let Some(e) = iterations {
                    cfg.search.iterations = e;
                }
                if let Some(m) = samples {
                    cfg.search.samples = m;
                }
                cfg.validate()?;
                search(&cfg, &RunDir::new(&cfg.output), resume).map(|_| ())
            }
            Command::Eval { data, expr } => {
                let cfg = resolve_config(&cli.common)?;
                let run = RunDir::new(&cfg.output);
                let tree = match expr {
                    Some(p) => load_tree(&p)?,
                    None => load_best(&run)?.tree,
                };
                let dataset = Dataset::load(&data.unwrap_or_else(|| run.test()))?;
                eval(&cfg, &run, &tree, &dataset).map(|_| ())
            }
        }
    };
    match cli.common.workers {
        Some(0) => Err(Error::Usage("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
