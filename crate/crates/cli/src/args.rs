use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "tiltseg", version, about = "Fine masks from tilted-box annotations")]
pub struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Where to write the run manifest instead of the default location.
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground truth and annotations.
    Synth(SynthArgs),
    /// Run the refinement pipeline over an image directory.
    Run(RunArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Serve the annotation HTTP API.
    Serve(ServeArgs),
    /// Talk to a running annotation service.
    Remote(RemoteArgs),
}

#[derive(Debug, Args, serde::Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub objects: usize,
    /// Uniform click jitter in pixels; the bare flag means 2.
    #[arg(long, num_args = 0..=1, default_missing_value = "2.0", value_parser = non_negative)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct RunArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory of probability maps named after the images.
    #[arg(long, conflicts_with = "baseline")]
    pub rough: Option<PathBuf>,
    /// Use the built-in threshold segmenter (the default without --rough).
    #[arg(long)]
    pub baseline: bool,
    #[arg(long, default_value_t = 0.4, value_parser = open_unit)]
    pub k: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub spoke_thickness: f64,
    #[arg(long, default_value_t = 0.5, value_parser = half_open_unit)]
    pub iou_threshold: f64,
    #[arg(long, default_value_t = 0.5, value_parser = half_open_unit)]
    pub binarize_threshold: f64,
    #[arg(long, default_value_t = 1)]
    pub min_area: usize,
    #[arg(long, default_value_t = 120)]
    pub gs_columns: usize,
    #[arg(long, default_value_t = 61)]
    pub gs_nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub gs_delta: usize,
    /// Column half length in pixels; derived from the component area if unset.
    #[arg(long, value_parser = positive)]
    pub gs_half_length: Option<f64>,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub gs_sigma: f64,
    /// Worker threads (default: logical CPUs).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    /// Write per-box column graphs as CSV under debug/.
    #[arg(long)]
    pub debug_dump: bool,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Ground-truth value left out of all counts (255 for label maps).
    #[arg(long)]
    pub gt_ignore: Option<u32>,
    /// Prediction value counted as background.
    #[arg(long)]
    pub pred_ignore: Option<u32>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct RemoteArgs {
    /// Service root URL.
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    pub url: String,
    #[command(subcommand)]
    pub action: RemoteAction,
}

#[derive(Debug, Subcommand, serde::Serialize)]
pub enum RemoteAction {
    /// List images with their sizes.
    Images,
    /// Download one image as PNG.
    Image {
        id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the stored annotation of an image.
    Get { id: String },
    /// Upload an annotation file (the image id is read from the file).
    Put { file: PathBuf },
    /// Derive a box from a JSON click sequence.
    DeriveBox { file: PathBuf },
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| e.to_string())
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn half_open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not positive"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is negative"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn jitter_flag_forms() {
        let parse = |extra: &[&str]| {
            let mut argv = vec!["tiltseg", "synth", "--out", "d", "--n", "1"];
            argv.extend_from_slice(extra);
            match Cli::try_parse_from(argv).unwrap().command {
                Command::Synth(a) => a.jitter,
                _ => unreachable!(),
            }
        };
        assert_eq!(parse(&[]), None);
        assert_eq!(parse(&["--jitter"]), Some(2.0));
        assert_eq!(parse(&["--jitter", "0.5"]), Some(0.5));
    }

    #[test]
    fn ranges_are_enforced() {
        let base = ["tiltseg", "run", "--images", "i", "--annotations", "a", "--out", "o"];
        let with = |extra: &[&str]| Cli::try_parse_from(base.iter().chain(extra).copied());
        assert!(with(&[]).is_ok());
        assert!(with(&["--iou-threshold", "1.0"]).is_ok());
        assert!(with(&["--iou-threshold", "1.01"]).is_err());
        assert!(with(&["--k", "1"]).is_err());
        assert!(with(&["--rough", "r", "--baseline"]).is_err());
        assert!(with(&["--jobs", "0"]).is_err());
    }
}
