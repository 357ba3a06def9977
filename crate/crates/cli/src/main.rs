use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

mod commands;

/// Interpretable prototype-based segmentation of multispectral rasters.
#[derive(Parser, Debug)]
#[command(name = "idss", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureArg {
    Raw,
    Latent,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RulesFormat {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cluster labeled stacks into per-class prototypes and write a model file
    Train(TrainArgs),
    /// Segment a stack with a trained model
    Predict(PredictArgs),
    /// Compare a predicted mask against ground truth
    Evaluate(EvaluateArgs),
    /// Export the model's IF...THEN rules
    Rules(RulesArgs),
    /// Show the nearest prototypes and rules behind one pixel's label
    Explain(ExplainArgs),
    /// NDWI index map and threshold baseline
    Ndwi(NdwiArgs),
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    /// Directory of *.bst stacks, each with a .lbl label file beside it
    #[arg(long)]
    pub inputs: PathBuf,
    /// Output model file (JSON)
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with training parameters; flags given here win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prototypes per class
    #[arg(long)]
    pub m: Option<usize>,
    /// Neighbors consulted per pixel
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub feature: Option<FeatureArg>,
    /// Directory of latent BST1 files named like the input stacks
    #[arg(long)]
    pub latent_dir: Option<PathBuf>,
    /// Keep raw features unnormalized
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(clap::Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub stack: PathBuf,
    /// Latent BST1 file matching the stack (required for latent models)
    #[arg(long)]
    pub latent_features: Option<PathBuf>,
    /// Output label mask (.lbl)
    #[arg(long)]
    pub out: PathBuf,
    /// Also render the mask as a PNG
    #[arg(long)]
    pub png: Option<PathBuf>,
    #[arg(long, default_value_t = idss_core::raster::DEFAULT_TILE_SIZE)]
    pub tile_size: usize,
}

#[derive(clap::Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Mask shape; label files carry no header, so without this both
    /// masks are read as a single row
    #[arg(long, num_args = 2, value_names = ["HEIGHT", "WIDTH"])]
    pub shape: Option<Vec<usize>>,
    /// Also write the report as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct RulesArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Decimal places for thresholds
    #[arg(long, default_value_t = 4)]
    pub precision: usize,
    #[arg(long, value_enum, default_value_t = RulesFormat::Text)]
    pub format: RulesFormat,
}

#[derive(clap::Args, Debug)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub stack: PathBuf,
    #[arg(long, num_args = 2, value_names = ["ROW", "COL"], required = true)]
    pub pixel: Vec<i64>,
    #[arg(long)]
    pub latent_features: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub precision: usize,
}

#[derive(clap::Args, Debug)]
#[command(group(ArgGroup::new("output").args(["out", "index"]).required(true).multiple(true)))]
pub struct NdwiArgs {
    #[arg(long)]
    pub stack: PathBuf,
    /// Water where NDWI is strictly greater than this
    #[arg(long, allow_negative_numbers = true, requires = "out")]
    pub threshold: Option<f64>,
    /// Thresholded label mask (.lbl)
    #[arg(long, requires = "threshold")]
    pub out: Option<PathBuf>,
    /// Write the index itself as a one-band BST1 file
    #[arg(long)]
    pub index: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Rules(a) => commands::rules(a),
        Command::Explain(a) => commands::explain(a),
        Command::Ndwi(a) => commands::ndwi(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
