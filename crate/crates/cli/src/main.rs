//! `corefdre` command-line entry point.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 runtime failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "corefdre", version, about = "Coreference-enhanced dialogue relation extraction")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Flags win over the config file.
#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory holding `{split}.json` corpus files.
    #[arg(long, global = true, env = "COREFDRE_DATA")]
    pub data: Option<PathBuf>,
    /// Directory holding `{split}.json` chain sidecars (default: `<data>/chains` when present).
    #[arg(long, global = true)]
    pub sidecars: Option<PathBuf>,
    /// Field-name map for released sidecars (`canonical=file_key` lines or JSON).
    #[arg(long, global = true)]
    pub fields: Option<PathBuf>,
    /// Output root; artifacts go to checkpoints/, reports/, graphs/ and sidecars/.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// DRE overrides shared by train-dre, build-graph and ablate.
#[derive(Args, Debug, Clone, Default)]
pub struct DreFlags {
    /// tucore, redialog, gain or hgat.
    #[arg(long)]
    pub recipe: Option<String>,
    /// none, gold, predicted or external.
    #[arg(long)]
    pub chain_source: Option<String>,
    /// Comma-separated edge kinds to remove, e.g. `CC,MU`.
    #[arg(long)]
    pub strip: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Resolver checkpoint for `--chain-source predicted` (default: `<out>/checkpoints/coref.json`).
    #[arg(long)]
    pub coref_checkpoint: Option<PathBuf>,
    /// Sidecar directory for `--chain-source external` (default: `<out>/sidecars`).
    #[arg(long)]
    pub external: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load and validate corpus splits; exit 1 on any violation.
    Validate {
        /// Splits to check (default: train, dev and test).
        #[arg(long = "split")]
        splits: Vec<String>,
        /// Validate one corpus file instead of named splits.
        #[arg(long, conflicts_with = "splits")]
        file: Option<PathBuf>,
        /// Sidecar for `--file`.
        #[arg(long, requires = "file")]
        sidecar: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Per-split corpus statistics.
    Stats {
        #[arg(long = "split")]
        splits: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Build and dump the graph(s) of one argument pair.
    BuildGraph {
        #[arg(long, default_value = "train")]
        split: String,
        /// Dialogue id, e.g. `train-0`.
        #[arg(long)]
        dialogue: String,
        #[arg(long, default_value_t = 0)]
        pair: usize,
        #[command(flatten)]
        dre: DreFlags,
    },
    /// Train the coreference resolver on gold chains of the train split.
    TrainCoref {
        /// dialogre (train split), conll (`--conll` only) or sequential (conll, then dialogre).
        #[arg(long, default_value = "dialogre")]
        regime: String,
        /// CoNLL-2012 style file with gold clusters.
        #[arg(long)]
        conll: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Predict chains and write sidecar files.
    PredictCoref {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long = "split")]
        splits: Vec<String>,
    },
    /// Train a relation model.
    TrainDre {
        #[command(flatten)]
        dre: DreFlags,
    },
    /// Score a trained relation model with slices and charts.
    EvalDre {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        coref_checkpoint: Option<PathBuf>,
        #[arg(long)]
        external: Option<PathBuf>,
    },
    /// Edge-ablation grid over seeds.
    Ablate {
        #[command(flatten)]
        dre: DreFlags,
        /// Ablation sets separated by `;`, kinds by `,` (empty set = full graph).
        #[arg(long)]
        sets: Option<String>,
        /// Comma-separated seeds.
        #[arg(long)]
        seeds: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.error);
            ExitCode::from(e.code)
        }
    }
}
