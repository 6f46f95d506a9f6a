//! `gcca`: fit, apply and evaluate graph-regularized CCA models.

mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{GraphMatrix, MnistFixture};
use config::{ExperimentConfig, Overrides, RawConfig};
use data::View;

#[derive(Debug, Parser)]
#[command(name = "gcca", version, about = "Graph-regularized canonical correlation analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment file of key=value lines; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for grid cells [default: all cores].
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Shorthand for --model.jitter.
    #[arg(long, global = true, value_name = "VALUE")]
    jitter: Option<String>,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one model on every sample at model.gamma and model.epsilon.
    Fit {
        /// Also write the centered Gram matrices of both views as CSV.
        #[arg(long)]
        dump_kernels: bool,
    },
    /// Embed the samples of one view with a saved model.
    Transform {
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "x")]
        view: View,
        /// Output CSV, one embedded sample per line.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Grid search the variant and its graph-free ablation over Monte Carlo splits.
    Evaluate,
    /// Grid search model.variant over Monte Carlo splits.
    Grid,
    /// Build or export source graphs.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Write desk-scale datasets.
    #[command(subcommand)]
    Fixture(FixtureCommand),
}

#[derive(Debug, Subcommand)]
enum GraphCommand {
    /// Build the class graph of the dataset and write its edge list.
    Build {
        /// Edge-list CSV [default: stdout].
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Read the edge list at graph.path and write one of its matrices.
    Export {
        #[arg(long)]
        nodes: usize,
        #[arg(long, value_enum, default_value = "laplacian")]
        what: GraphMatrix,
        /// Dense CSV [default: stdout].
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum FixtureCommand {
    /// Balanced, resized MNIST subset as CSV with inline labels.
    Mnist {
        #[arg(long, value_name = "FILE")]
        images: PathBuf,
        #[arg(long, value_name = "FILE")]
        labels: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        /// Output side length in pixels.
        #[arg(long, default_value_t = 20)]
        size: usize,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Seeded two-view data from the synthetic.* keys as CSV with inline labels.
    Synthetic {
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut raw = RawConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(j) = &cli.jitter {
        raw.set("model.jitter", j.as_str());
    }
    if let Command::Fixture(FixtureCommand::Synthetic { .. }) = cli.command {
        raw.set("data.format", "synthetic");
    }
    let cfg = ExperimentConfig::from_raw(&raw).context("invalid configuration")?;
    cfg.validate_inputs().context("invalid configuration")?;

    match cli.command {
        Command::Fit { dump_kernels } => commands::fit(&cfg, dump_kernels),
        Command::Transform { model, view, out } => {
            if !model.is_file() {
                anyhow::bail!("model file {} does not exist", model.display());
            }
            commands::transform(&cfg, &model, view, &out)
        }
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Grid => commands::grid(&cfg),
        Command::Graph(GraphCommand::Build { out }) => commands::graph_build(&cfg, out.as_deref()),
        Command::Graph(GraphCommand::Export { nodes, what, out }) => {
            commands::graph_export(&cfg, nodes, what, out.as_deref())
        }
        Command::Fixture(FixtureCommand::Mnist {
            images,
            labels,
            per_class,
            size,
            out,
        }) => commands::fixture_mnist(&MnistFixture {
            images,
            labels,
            per_class,
            size,
            out,
        }),
        Command::Fixture(FixtureCommand::Synthetic { out }) => commands::fixture_synthetic(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
