//! `knndiv`: corpus generation, training, datastore building, decoding,
//! evaluation, and hyperparameter sweeps for perturbed nearest-neighbor
//! decoding.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/format error,
//! 4 internal invariant violation.

mod artifacts;
mod candidates;
mod commands;
mod config;
mod errors;
mod plot;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use knndiv_core::corpus::GenSpec;

pub use errors::CliError;

#[derive(Parser)]
#[command(
    name = "knndiv",
    version,
    about = "Perturbed kNN decoding at desk scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic train/valid/test corpora from the built-in
    /// template bank.
    GenCorpus {
        /// Output directory for train.tsv, valid.tsv, test.tsv,
        /// test_refb.tsv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        train: usize,
        #[arg(long, default_value_t = 50)]
        valid: usize,
        #[arg(long, default_value_t = 120)]
        test: usize,
        /// Size of the shared meaning pool all splits draw from.
        #[arg(long, default_value_t = 80)]
        pool: usize,
        /// Skip the second reference realization of the test split.
        #[arg(long)]
        single_ref: bool,
    },
    /// Train the count model on the configured training corpus.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override a config field, e.g. --set decode.seed=7.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Build the datastore (and the inverted-file index if configured).
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Decode the test corpus into a candidates JSONL file, or a fixed
    /// target file into per-sentence log-likelihoods.
    Decode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
        /// Score this TSV corpus by forced decoding instead of searching.
        #[arg(long, requires = "logliks_out")]
        forced_target: Option<PathBuf>,
        /// Output path for forced-decoding log-likelihoods.
        #[arg(long, requires = "forced_target")]
        logliks_out: Option<PathBuf>,
    },
    /// Compute the metric report for one or two candidate files.
    Eval {
        #[arg(long)]
        candidates: PathBuf,
        /// Second system; enables MergedBLEU and DEQ (this file is the
        /// DEQ base).
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Reference corpus (TSV, sources must match the candidates).
        #[arg(long)]
        refs: PathBuf,
        /// Forced-decoding log-likelihoods of reference A; with
        /// --logliks-b enables MADLL.
        #[arg(long)]
        logliks_a: Option<PathBuf>,
        #[arg(long)]
        logliks_b: Option<PathBuf>,
        /// `mock` for the built-in deterministic scorer, or a path to a
        /// JSONL scores file; enables the SPLL block.
        #[arg(long)]
        fluency: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a hyperparameter sweep and emit one CSV row per (point, seed).
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also emit an SVG scatter of DP against BLEU@N.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus {
            out,
            seed,
            train,
            valid,
            test,
            pool,
            single_ref,
        } => {
            let spec = GenSpec {
                n_train: train,
                n_valid: valid,
                n_test: test,
                two_refs: !single_ref,
                n_pool: pool,
            };
            commands::gen_corpus(&out, seed, &spec)
        }
        Command::Train { config, set } => {
            let config = config::RunConfig::load(&config, &set)?;
            commands::train(&config)
        }
        Command::Build { config, set } => {
            let config = config::RunConfig::load(&config, &set)?;
            commands::build(&config)
        }
        Command::Decode {
            config,
            set,
            forced_target,
            logliks_out,
        } => {
            let config = config::RunConfig::load(&config, &set)?;
            match (forced_target, logliks_out) {
                (Some(targets), Some(out)) => commands::decode_forced(config, &targets, &out),
                _ => commands::decode(config),
            }
        }
        Command::Eval {
            candidates,
            baseline,
            refs,
            logliks_a,
            logliks_b,
            fluency,
            out,
        } => commands::eval(&commands::EvalArgs {
            candidates,
            baseline,
            refs,
            logliks_a,
            logliks_b,
            fluency,
            out,
        }),
        Command::Sweep { spec, out, plot } => commands::sweep(&spec, &out, plot.as_deref()),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
