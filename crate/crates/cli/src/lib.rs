//! `pnkit` command-line front end: pigment-network extraction, derived
//! dataset building, CNN and bag-of-features training, and evaluation.

mod commands;
pub mod config;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{load_config_file, parse_config_str, CliConfig, FileConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pnkit", version, about = "Pigment-network extraction and typical/atypical classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the pigment network from one image or a directory of images.
    Extract(ExtractArgs),
    /// Derived-dataset commands.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train a classifier.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Evaluate a trained model and write a JSON report and ROC curve.
    Eval(EvalArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Extract every labelled image and write the pigment-network dataset.
    Build(DatasetBuildArgs),
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Train the convolutional network.
    Cnn(TrainArgs),
    /// Train the bag-of-features classifier.
    Bof(TrainArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Config file with flat `key = value` lines; flags override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (default 0).
    #[arg(long, value_name = "INT")]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmootherArg {
    Box10,
    Gaussian,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Amount subtracted from the computed threshold level, in [0, 0.05].
    #[arg(long, value_name = "REAL")]
    pub threshold_offset: Option<f64>,
    /// Smallest connected component kept, in pixels.
    #[arg(long, value_name = "INT")]
    pub min_component: Option<usize>,
    /// Colour channel weights applied before PCA, as `r,g,b`.
    #[arg(long, value_name = "R,G,B", value_parser = parse_weights)]
    pub weights: Option<[f64; 3]>,
    /// Smoothing filter used before subtraction.
    #[arg(long, value_enum)]
    pub smoother: Option<SmootherArg>,
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated numbers".into());
    }
    let mut w = [0.0; 3];
    for (slot, p) in w.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("not a number: {p:?}"))?;
    }
    Ok(w)
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    /// Image file, or a directory whose PNG/JPEG/BMP files are processed.
    pub input: PathBuf,
    /// Output directory; each image gets a subdirectory named after it.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also write every intermediate stage as a PNG.
    #[arg(long)]
    pub emit_stages: bool,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetBuildArgs {
    /// Image root: flat `<id>.<ext>` files or the PH2 folder layout.
    #[arg(long, value_name = "DIR")]
    pub root: PathBuf,
    /// CSV with `image_id,pn_label` rows.
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,
    /// CSV with `image_id,offset` rows replacing the threshold offset per image.
    #[arg(long, value_name = "PATH")]
    pub overrides: Option<PathBuf>,
    /// Output directory for `<id>_pn.png` files and the manifest.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory written by `dataset build`.
    #[arg(long, value_name = "DIR", required_unless_present = "root", conflicts_with_all = ["root", "labels"])]
    pub data: Option<PathBuf>,
    /// Raw image root, used together with `--labels`.
    #[arg(long, value_name = "DIR", requires = "labels")]
    pub root: Option<PathBuf>,
    /// Labels CSV for `--root`.
    #[arg(long, value_name = "PATH", requires = "root")]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for the model, training log and split files.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Training epochs.
    #[arg(long, value_name = "INT")]
    pub epochs: Option<usize>,
    /// Learning rate.
    #[arg(long, value_name = "REAL")]
    pub lr: Option<f64>,
    /// Visual vocabulary size (bag of features only).
    #[arg(long, value_name = "INT")]
    pub vocab_size: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Model file written by `train cnn` or `train bof`.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Restrict evaluation to the ids in this `image_id,pn_label` CSV.
    #[arg(long, value_name = "PATH")]
    pub split: Option<PathBuf>,
    /// Output directory for `eval.json` and `roc.csv`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pnkit: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn weights_parse() {
        assert_eq!(parse_weights("1, 0.5,0").unwrap(), [1.0, 0.5, 0.0]);
        assert!(parse_weights("1,2").is_err());
        assert!(parse_weights("a,b,c").is_err());
    }
}
