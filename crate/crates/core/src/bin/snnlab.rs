use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snnlab::experiment::{exit_code, run, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "snnlab", version, about = "Spiking network noise-robustness and coherence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Train every configured model and write checkpoints and histories.
    Train(Args),
    /// Accuracy, SSE and activity across noise kinds, scenarios and severities.
    EvaluateNoise(Args),
    /// Analytic against simulated stimulus-response coherence.
    CoherenceTable(Args),
    /// Input spike spectra and target-neuron critical frequencies.
    Spectrum(Args),
    /// Per-model summary table and generalization curves.
    Report(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: `$SNNLAB_OUT_DIR`, then `snnlab-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured seeds.
    #[arg(long, num_args = 1..)]
    seed: Vec<u64>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Train(a) => (Command::Train, a),
        Sub::EvaluateNoise(a) => (Command::EvaluateNoise, a),
        Sub::CoherenceTable(a) => (Command::CoherenceTable, a),
        Sub::Spectrum(a) => (Command::Spectrum, a),
        Sub::Report(a) => (Command::Report, a),
    };
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::read(path),
        None => Ok(ExperimentConfig::default()),
    };
    let mut cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("snnlab: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    if !args.seed.is_empty() {
        cfg.seeds = args.seed.clone();
    }
    if args.print_config {
        print!("{}", cfg.to_text());
        return ExitCode::SUCCESS;
    }
    let out = cfg.resolve_out_dir(args.out.as_deref());
    match run(cmd, &cfg, &out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("snnlab {}: {e}", cmd.name());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
