use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hdgcn::Result;
use hdgcn_cli::commands::report_json;
use hdgcn_cli::{cmd_eval, cmd_inspect, cmd_propagate, cmd_train, exit_code, RunConfig};

#[derive(Parser)]
#[command(
    name = "hdgcn",
    version,
    about = "High-order dynamic graph convolution toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model described by a TOML run config.
    Train {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Overrides `output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a checkpoint on the test split of a dataset.
    Eval {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Export attention traces for one node or document.
    Inspect {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        select: usize,
        #[arg(long, default_value = "inspect")]
        output: PathBuf,
    },
    /// Compare feature alignment with and without the probability transition.
    ///
    /// "With" iterates the random walk (D+I)^-1 (A+I). "Without" iterates the
    /// symmetric normalised adjacency and rescales each row to unit length
    /// after every step.
    Propagate {
        graph: PathBuf,
        #[arg(long)]
        src: usize,
        #[arg(long)]
        dst: usize,
        #[arg(long, default_value_t = 0.99)]
        threshold: f64,
        #[arg(long, default_value_t = 100)]
        max_steps: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the default run config.
    Defaults,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            epochs,
            lr,
            output,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(l) = lr {
                cfg.train.lr = l;
            }
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            let run = cmd_train(&cfg)?;
            print!("{}", report_json(&run.metrics));
            eprintln!("artifacts written to {}", run.output_dir.display());
        }
        Command::Eval {
            checkpoint,
            dataset,
            output,
        } => {
            let m = cmd_eval(&checkpoint, &dataset, output.as_deref())?;
            print!("{}", report_json(&m));
        }
        Command::Inspect {
            checkpoint,
            dataset,
            select,
            output,
        } => {
            for path in cmd_inspect(&checkpoint, &dataset, select, &output)? {
                println!("{}", path.display());
            }
        }
        Command::Propagate {
            graph,
            src,
            dst,
            threshold,
            max_steps,
            output,
        } => {
            let r = cmd_propagate(&graph, src, dst, threshold, max_steps, output.as_deref())?;
            print!("{}", report_json(&r));
        }
        Command::Defaults => print!("{}", RunConfig::default().to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
