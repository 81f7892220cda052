use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Batch image processing, frequency analysis, corner detection and small
/// CNN experiments on PNM images.
#[derive(Parser, Debug)]
#[command(name = "pixforge", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the 256-bin intensity histogram as CSV "intensity,count".
    Hist {
        input: PathBuf,
        /// Channel to count (0 for gray images).
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram-equalize every channel.
    Equalize {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply `gain * v + bias` to every sample.
    Pointop {
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        bias: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one affine transform about the image center.
    Warp(WarpArgs),
    /// Convolve every channel with a mask.
    Filter {
        input: PathBuf,
        /// mean:N, gaussian:SIGMA or file:PATH ("W H" then W*H reals).
        #[arg(long)]
        mask: String,
        #[arg(long, value_enum, default_value_t = Border::Clamp)]
        border: Border,
        #[arg(long)]
        out: PathBuf,
    },
    /// Binary edge map from the normalized gradient magnitude.
    Edges {
        input: PathBuf,
        /// Fraction of the strongest gradient, in [0, 1].
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectrum and optional low-pass filtering (pads to powers of two).
    Fft {
        input: PathBuf,
        /// CSV "u,v,re,im" of the padded spectrum.
        #[arg(long)]
        out_spectrum: PathBuf,
        /// Centered log-magnitude spectrum as an image.
        #[arg(long)]
        spectrum_image: Option<PathBuf>,
        /// Cut-off radius as a fraction of the largest centered frequency distance.
        #[arg(long, requires = "out_filtered")]
        lowpass: Option<f64>,
        #[arg(long, requires = "lowpass")]
        out_filtered: Option<PathBuf>,
    },
    /// Detect corners and write CSV "x,y,score".
    Corners(CornerArgs),
    /// Train a classifier on a directory with one subdirectory per class.
    Train(TrainArgs),
    /// Print per-class probabilities for each image.
    Classify {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated class names in label order.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Fast gradient-sign adversarial perturbation.
    Attack {
        #[arg(long)]
        model: PathBuf,
        /// Step size on the [0, 1] intensity scale.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// True label; defaults to the model's own prediction.
        #[arg(long)]
        label: Option<usize>,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV "step,loss" with the loss before and after the attack.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Amplify what the selected layers respond to.
    Dream {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated layer indices; defaults to the post-activation conv outputs.
        #[arg(long, value_delimiter = ',')]
        layers: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        octaves: usize,
        #[arg(long, default_value_t = 1.4)]
        octave_scale: f64,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Repaint the content image with the Gram statistics of the style image.
    Style {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        style: PathBuf,
        /// Comma-separated layer indices; the deepest one also carries the content loss.
        #[arg(long, value_delimiter = ',')]
        layers: Vec<usize>,
        #[arg(long, default_value_t = 1000.0)]
        sw: f64,
        #[arg(long, default_value_t = 1.0)]
        cw: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Write the synthetic circles/squares corpus as PGM files.
    GenDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("transform").required(true).multiple(false)))]
struct WarpArgs {
    input: PathBuf,
    /// Counter-clockwise degrees.
    #[arg(long, group = "transform", allow_negative_numbers = true)]
    rotate: Option<f64>,
    /// SX,SY
    #[arg(long, group = "transform", value_delimiter = ',', allow_negative_numbers = true)]
    scale: Option<Vec<f64>>,
    /// KX,KY
    #[arg(long, group = "transform", value_delimiter = ',', allow_negative_numbers = true)]
    shear: Option<Vec<f64>>,
    /// Mirror across the horizontal (x) or vertical (y) center line.
    #[arg(long, group = "transform", value_enum)]
    reflect: Option<ReflectAxis>,
    /// DX,DY
    #[arg(long, group = "transform", value_delimiter = ',', allow_negative_numbers = true)]
    translate: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Interp::Bilinear)]
    interp: Interp,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CornerArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Detector::Harris)]
    detector: Detector,
    /// Harris smoothing scale.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Harris trace weight.
    #[arg(long, default_value_t = 0.05)]
    k: f64,
    /// Fraction of the strongest response a corner must reach.
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    /// Moravec window side (odd).
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Moravec: use all eight shift directions instead of four.
    #[arg(long)]
    eight_offsets: bool,
    #[arg(long, default_value_t = 3)]
    nms_radius: usize,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Copy of the input with a cross on every corner.
    #[arg(long)]
    annotate: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Arch::SmallCnn)]
    arch: Arch,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV of train/test loss and accuracy.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Border {
    Clamp,
    Zero,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Interp {
    Nearest,
    Bilinear,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ReflectAxis {
    X,
    Y,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Detector {
    Moravec,
    Harris,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Arch {
    SmallCnn,
}

/// Why a command failed; decides the exit status.
#[derive(Debug)]
enum Failure {
    /// Bad flag values the parser could not catch.
    Usage(String),
    /// Unreadable, malformed or incompatible data.
    Data(String),
}

impl From<pixforge::Error> for Failure {
    fn from(e: pixforge::Error) -> Self {
        match e {
            pixforge::Error::InvalidArgument(m) => Failure::Usage(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
