//! `oae` command line: synthetic data, training, oracle evaluation, the
//! theorem suite and embeddings.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Preset, Resolved, RunConfig};
pub use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "oae", version, about = "Learned spectral bases for point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by the commands that read a run configuration.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset the configuration is layered over.
    #[arg(long, value_parser = ["seg1d", "sphere3d", "blobs"])]
    pub preset: Option<String>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic point cloud (and mesh, when meshed).
    Synth(SynthArgs),
    /// Train an extractor and write the basis bundle, history and checkpoints.
    Train(TrainArgs),
    /// Compare a basis bundle with an oracle or another bundle.
    Eval(EvalArgs),
    /// Run the theorem suite.
    Check(CheckArgs),
    /// Embed, cluster and score, over one or more runs.
    Embed(EmbedArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// segment, circle, sphere, torus, swiss_roll or blobs.
    pub kind: String,
    #[arg(long)]
    pub n: Option<usize>,
    /// Blob count.
    #[arg(long)]
    pub c: Option<usize>,
    /// Blob dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Also write the triangle mesh as OFF (sphere, torus).
    #[arg(long)]
    pub meshed: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Continue from a checkpoint written under the same configuration.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Basis bundle directory.
    #[arg(long)]
    pub basis: PathBuf,
    /// Compare with this bundle instead of an oracle.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// segment, cotangent, graph or none; overrides the configuration.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Operator size for the min-max runs (at most 12).
    #[arg(long)]
    pub n: Option<usize>,
    /// Basis size for the min-max runs.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Point cloud file (XYZ or CSV, optional label column) used for every run.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// oa-eigenmaps, laplacian-eigenmaps, pca, a comma list, or all.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Check(a) => commands::check(&a),
        Command::Embed(a) => commands::embed(&a),
    }
}
