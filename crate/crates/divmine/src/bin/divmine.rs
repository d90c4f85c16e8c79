//! Config-driven pipeline runner. Every subcommand reads one INI-style
//! config file and writes its outputs plus a manifest into the configured
//! output directory; reruns with the same config and seed are
//! byte-identical.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use divmine::cli::{run_stage, Stage};

#[derive(Parser)]
#[command(name = "divmine", version, about = "diversity mining and evaluation for scored sample collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// INI-style config file driving the stage.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `[run] seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus with known structure.
    Synth(StageArgs),
    /// Filter a features table on duration and SNR bounds.
    Ingest(StageArgs),
    /// Per-speaker z-scoring, block PCA, and block variance balancing.
    Prep(StageArgs),
    /// Cluster a features table and write the assignment.
    Cluster(StageArgs),
    /// Pick medoid neighborhoods per cluster plus a random baseline.
    Select(StageArgs),
    /// Normalize ratings, aggregate gold scores, and report agreement.
    Annostats(StageArgs),
    /// Score-diversity curves over subset sizes for several strategies.
    Diversity(StageArgs),
    /// Cluster-purity sweep over variants, feature sets, k, and reps.
    PurityGrid(StageArgs),
    /// Pairwise rank tests between purity groups.
    Compare(StageArgs),
}

impl Command {
    fn split(&self) -> (Stage, &StageArgs) {
        match self {
            Command::Synth(a) => (Stage::Synth, a),
            Command::Ingest(a) => (Stage::Ingest, a),
            Command::Prep(a) => (Stage::Prep, a),
            Command::Cluster(a) => (Stage::Cluster, a),
            Command::Select(a) => (Stage::Select, a),
            Command::Annostats(a) => (Stage::Annostats, a),
            Command::Diversity(a) => (Stage::Diversity, a),
            Command::PurityGrid(a) => (Stage::PurityGrid, a),
            Command::Compare(a) => (Stage::Compare, a),
        }
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let (stage, args) = cli.command.split();
    match run_stage(stage, &args.config, args.seed) {
        Ok(outcome) => {
            for p in &outcome.outputs {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", outcome.manifest.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
