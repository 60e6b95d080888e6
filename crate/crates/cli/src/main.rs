mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::exit::Failure;

/// Speech-driven head and hand motion synthesis with constrained dynamic
/// Bayesian networks.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
#[derive(Debug, Parser)]
#[command(name = "gesture-dbn", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known gesture structure.
    GenCorpus {
        /// Generator spec, TOML or JSON
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        /// Built-in spec instead of a file
        #[arg(long, value_parser = ["head", "hand"])]
        preset: Option<String>,
        /// Turns to generate with a preset
        #[arg(long, default_value_t = 60)]
        turns: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a baseline or constrained model.
    Train {
        /// Train on the training turns of this cross-validation round (1-9)
        #[arg(long)]
        fold: Option<usize>,
        /// Per-iteration LLR log; defaults next to the model
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Synthesize motion for a speech file.
    Synth {
        /// CSV with f0, energy, their derivatives and an optional label column
        #[arg(long)]
        input: PathBuf,
        /// Output prefix; writes <prefix>.raw.csv and <prefix>.smooth.csv
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model on the test folds of a dataset.
    Eval {
        /// Only this round's test fold (1-9); all test folds by default
        #[arg(long)]
        fold: Option<usize>,
        /// Also measure gesture accuracy with the region's detector
        #[arg(long)]
        accuracy: bool,
        /// Report path; printed to stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieve gesture segments by exemplar matching.
    Retrieve {
        /// JSON object mapping gesture names to lists of exemplar trajectories
        #[arg(long)]
        exemplars: PathBuf,
        /// Pick per-subject thresholds on the validation fold and search the rest
        #[arg(long)]
        select_thresholds: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per state count and score it on the validation fold.
    SweepStates {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 6, 8, 10, 12])]
        candidates: Vec<usize>,
        /// TSV output; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = RunConfig::load(&cli.overrides)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| exit::usage(e.to_string()))?;
    }
    match cli.command {
        Command::GenCorpus { spec, preset, turns, out } => {
            commands::gen_corpus(spec.as_deref(), preset.as_deref(), turns, cli.overrides.seed, &out)
        }
        Command::Train { fold, log } => commands::train(&cfg, fold, log.as_deref()),
        Command::Synth { input, out } => commands::synth(&cfg, &input, &out),
        Command::Eval { fold, accuracy, out } => commands::eval(&cfg, fold, accuracy, out.as_deref()),
        Command::Retrieve { exemplars, select_thresholds, out } => {
            commands::retrieve(&cfg, &exemplars, select_thresholds, &out)
        }
        Command::SweepStates { candidates, out } => commands::sweep_states(&cfg, &candidates, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(exit::USAGE as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
