//! The `del` command line: corpus preparation, training, prediction,
//! evaluation, voting and hyper-parameter search.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{
    apply_assignment, cmd_correlate, cmd_ensemble, cmd_eval, cmd_features_lr, cmd_hpo, cmd_predict, cmd_prepare,
    cmd_stats, cmd_synth, cmd_train, cmd_vote, PredictArgs,
};
pub use config::{resolve_path, CommitteeSection, DataSection, HpoSection, RunConfig, DATA_DIR_ENV};
pub use manifest::{digest_file, sha256_hex, InputDigest, Manifest};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "del", version, about = "Emotion classification for three-turn dialogues")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic labeled corpus.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "s")]
        prefix: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print label counts of a corpus.
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        unlabeled: bool,
    },
    /// Validate a run config and write its vocabulary and corpus statistics.
    Prepare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model, or a committee when `committee.k > 1`.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label a corpus with one checkpoint, or vote across several.
    Predict {
        /// Checkpoint files or directories of `*.ckpt` files.
        #[arg(long = "model", required = true, num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        unlabeled: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a prediction file against a labeled corpus.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Majority vote across committee members' prediction files.
    Vote {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Majority vote across ensembles and extra models.
    Ensemble {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise Pearson agreement between prediction files.
    Correlate {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bayesian hyper-parameter search on validation F1.
    Hpo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Logistic regression on concatenated sentence features.
    FeaturesLr {
        #[arg(long = "features", required = true, num_args = 1..)]
        features: Vec<PathBuf>,
        /// Labeled corpus whose ids match the feature rows.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runs one parsed command and returns the summary printed on stdout.
pub fn run(cli: Cli) -> Result<serde_json::Value> {
    match cli.command {
        Command::Synth { n, seed, prefix, out } => cmd_synth(n, seed, &prefix, &out),
        Command::Stats { corpus, unlabeled } => cmd_stats(&corpus, !unlabeled),
        Command::Prepare { config, seed, out } => cmd_prepare(&config, seed, out.as_deref()),
        Command::Train { config, seed, jobs, out } => cmd_train(&config, seed, jobs, out.as_deref()),
        Command::Predict {
            models,
            corpus,
            unlabeled,
            out,
        } => cmd_predict(&PredictArgs {
            models,
            corpus,
            labeled: !unlabeled,
            out,
        }),
        Command::Eval { pred, gold, out } => cmd_eval(&pred, &gold, out.as_deref()),
        Command::Vote { files, out } => cmd_vote(&files, &out),
        Command::Ensemble { files, out } => cmd_ensemble(&files, &out),
        Command::Correlate { files, out } => cmd_correlate(&files, &out),
        Command::Hpo { config, seed, out } => cmd_hpo(&config, seed, out.as_deref()),
        Command::FeaturesLr {
            features,
            labels,
            l2,
            out,
        } => cmd_features_lr(&features, &labels, l2, &out),
    }
}

/// Entry point of the `del` binary: prints the command summary on success,
/// or `{"error": {"kind", "message"}}` on stderr with exit status 1.
pub fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = serde_json::json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{doc}");
            std::process::ExitCode::FAILURE
        }
    }
}
