use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gia_core::experiments::{self, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "gia", version, about = "Secrecy experiments for stochastic MIMO wiretap networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Four-node example: per-strategy rates and secure DoF.
    CaseStudy(RunArgs),
    /// Mean secrecy rate per node against transmit SNR.
    SweepSecrecy(RunArgs),
    /// Counted secure DoF against the closed-form indicator.
    SweepTransitory(RunArgs),
    /// Best stream split per LT/jammer density split.
    SweepTradeoff(RunArgs),
    /// Feasible (d_j, d_l) region and its boundary curves.
    RegionMap(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; defaults apply to every key it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replaces the config's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::CaseStudy(a) => (ExperimentKind::CaseStudy, a),
        Command::SweepSecrecy(a) => (ExperimentKind::SecrecySweep, a),
        Command::SweepTransitory(a) => (ExperimentKind::TransitorySweep, a),
        Command::SweepTradeoff(a) => (ExperimentKind::TradeoffSweep, a),
        Command::RegionMap(a) => (ExperimentKind::RegionMap, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(kind: ExperimentKind, args: RunArgs) -> gia_core::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.kind = kind;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    let out = args.out.unwrap_or_else(|| cfg.output_dir.clone());
    let manifest = experiments::run(&cfg, &out, args.workers)?;
    println!(
        "{}: wrote {} to {}",
        manifest.experiment,
        manifest.outputs.join(", "),
        out.display()
    );
    if manifest.flagged {
        eprintln!(
            "warning: {} of {} topologies skipped after solver non-convergence",
            manifest.skipped, manifest.requested
        );
    }
    Ok(())
}
