use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use devfeed::cli::{cmd_ablate, cmd_evaluate, cmd_generate, cmd_train, ExperimentSpec};

#[derive(Parser)]
#[command(name = "devfeed", version, about = "Consecutive-round motion prediction with deviation feedback")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the spec's synthetic sequences and a manifest to <out_dir>/data.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        /// Overwrite a non-empty data directory.
        #[arg(long)]
        force: bool,
    },
    /// Train the configured bundle; writes a checkpoint and loss history.
    Train {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-round evaluation with deviation feedback on and off.
    Evaluate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, required_unless_present = "oracle_stub")]
        checkpoint: Option<PathBuf>,
        /// Also evaluate a corrective-wiring checkpoint.
        #[arg(long)]
        corrective: Option<PathBuf>,
        /// Use the ground-truth stub instead of a checkpoint.
        #[arg(long)]
        oracle_stub: bool,
    },
    /// Train and compare inserted, corrective and isolated configurations.
    Ablate {
        #[arg(long)]
        spec: PathBuf,
    },
}

fn run(args: Args) -> anyhow::Result<()> {
    match args.command {
        Command::Generate { spec, force } => {
            let s = ExperimentSpec::from_file(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let summary = cmd_generate(&s, force)?;
            println!("wrote {} sequences to {}", summary.files, summary.data_dir.display());
        }
        Command::Train { spec, out } => {
            let s = ExperimentSpec::from_file(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let summary = cmd_train(&s, out.as_deref())?;
            let l = summary.final_loss;
            println!(
                "final loss: round1 {:.6} round2 {:.6} total {:.6}",
                l.loss_round1, l.loss_round2, l.total
            );
            println!("checkpoint: {}", summary.checkpoint.display());
            println!("history: {}", summary.history.display());
        }
        Command::Evaluate {
            spec,
            checkpoint,
            corrective,
            oracle_stub,
        } => {
            let s = ExperimentSpec::from_file(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let summary = cmd_evaluate(&s, checkpoint.as_deref(), corrective.as_deref(), oracle_stub)?;
            print!("{}", summary.table);
            println!("report: {}", summary.report.display());
            println!("plot: {}", summary.plot.display());
        }
        Command::Ablate { spec } => {
            let s = ExperimentSpec::from_file(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let path = cmd_ablate(&s)?;
            print!("{}", std::fs::read_to_string(&path)?);
            println!("ablation: {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
