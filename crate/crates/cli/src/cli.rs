//! Argument parsing and dispatch.

use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{bench_csv, cmd_bench, cmd_compact, cmd_eval, cmd_grid, cmd_train, cmd_verify};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::input::prepare;
use crate::model_file::ModelFile;

#[derive(Debug, Parser)]
#[command(name = "abnet", version, about = "Aggregations of binary activated networks with PAC-Bayes certificates")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Dotted-key override applied to the configuration, e.g. `train.epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and write model.json, history.jsonl and metrics.json.
    Train {
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model; uses the model's own data settings unless a config is given.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precompute the compact form of a full model.
    Compact {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the exact output with a Monte Carlo estimate; exits 1 on disagreement.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decision values and leading-layer probabilities over a 2-D grid.
    Grid {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward-pass timings as CSV.
    Bench {
        #[arg(long)]
        out: PathBuf,
    },
}

impl Common {
    pub fn load(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn emit(path: Option<&PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e)),
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.common.load()?;
    match &cli.command {
        Command::Train { out } => {
            let m = cmd_train(&cfg, out)?;
            eprintln!(
                "{}: bound {:.4}, train error {:.4}, test error {:.4} (MAP {:.4})",
                m.dataset,
                m.bound,
                m.train.error_rate_aggregate,
                m.test.error_rate_aggregate,
                m.test.error_rate_map.unwrap_or(f64::NAN)
            );
        }
        Command::Eval { model, out } => {
            let model = ModelFile::load(model)?;
            let data = match &cli.common.config {
                Some(_) => Some(prepare(&cfg.data, cli.common.seed.unwrap_or(model.metadata.seed))?),
                None => None,
            };
            emit(out.as_ref(), &pretty(&cmd_eval(&model, data.as_ref())?)?)?;
        }
        Command::Compact { model, out } => {
            let compact = cmd_compact(&ModelFile::load(model)?)?;
            compact.save(out)?;
        }
        Command::Verify {
            model,
            samples,
            probes,
            out,
        } => {
            let model = ModelFile::load(model)?;
            let report = cmd_verify(
                &model,
                samples.unwrap_or(cfg.verify.samples),
                probes.unwrap_or(cfg.verify.probes),
                cfg.seed,
            )?;
            print!("{}", report.table());
            if let Some(p) = out {
                emit(Some(p), &pretty(&report)?)?;
            }
            report.into_result()?;
        }
        Command::Grid { model, out } => {
            let csv = cmd_grid(&ModelFile::load(model)?, &cfg.grid)?;
            emit(Some(out), csv.as_bytes())?;
        }
        Command::Bench { out } => {
            let results = cmd_bench(&cfg.bench, cfg.seed)?;
            emit(Some(out), bench_csv(&results).as_bytes())?;
        }
    }
    Ok(())
}
