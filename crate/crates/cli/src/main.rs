mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

/// Saliency-ranked object proposals.
#[derive(Debug, Parser)]
#[command(name = "salprop", version, about)]
struct Cli {
    /// Worker threads for per-image work; 0 uses every core [default: 0]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate ranked proposals for an image or a directory of images
    Detect(DetectArgs),
    /// Train the edgelet CRF on image/mask pairs
    Train(TrainArgs),
    /// Score proposal files against ground-truth annotations
    Eval(EvalArgs),
    /// Convert an evaluation report into long-format plot data
    Curves(CurvesArgs),
}

/// Pipeline tunables; each overrides the matching `--config` key.
#[derive(Debug, Args, Default)]
pub struct Tunables {
    /// TOML file with any of the tunables below (unknown keys are rejected)
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// IoU between neighbouring same-size windows [default: 0.65]
    #[arg(long)]
    alpha: Option<f64>,
    /// Box suppression IoU threshold [default: 0.75]
    #[arg(long)]
    nms_theta: Option<f64>,
    /// Maximum proposals per image [default: 1000]
    #[arg(long)]
    max_n: Option<usize>,
    /// Local ternary pattern threshold T on lightness [default: 5]
    #[arg(long)]
    ltp_threshold: Option<f64>,
    /// Salient-set threshold as a fraction of the strongest edgelet [default: 0.8]
    #[arg(long)]
    beta: Option<f64>,
    /// Base scale k of the DoG/LoG texture bank [default: 0.5]
    #[arg(long)]
    texture_scale: Option<f64>,
    /// Minimum edgelet length in pixels (exclusive) [default: 15]
    #[arg(long)]
    min_len: Option<usize>,
    /// Minimum edge magnitude on the 0-255 scale (exclusive) [default: 40]
    #[arg(long)]
    min_mag: Option<f64>,
    /// Endpoint distance linking two edgelets in the CRF graph [default: 15]
    #[arg(long)]
    link_radius: Option<f64>,
    /// Random seed; the SALPROP_SEED environment variable takes precedence [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Structured SVM regularization constant C [default: 1.0]
    #[arg(long = "c", value_name = "C")]
    c: Option<f64>,
    /// Maximum training passes [default: 200]
    #[arg(long)]
    max_passes: Option<usize>,
    /// CRF decoder: bp or exact [default: bp]
    #[arg(long)]
    decoder: Option<String>,
}

impl Tunables {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { cfg.$f = v.clone(); })*};
        }
        take!(alpha, nms_theta, max_n, ltp_threshold, beta, texture_scale, min_len, min_mag, link_radius, seed, c, max_passes, decoder);
        if let Ok(v) = std::env::var("SALPROP_SEED") {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("SALPROP_SEED={v:?} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Image file, or a directory of .png/.jpg images
    #[arg(long, value_name = "PATH")]
    pub image: PathBuf,
    /// EMAP edge file (or directory of <stem>.emap files) instead of the built-in detector
    #[arg(long, value_name = "PATH")]
    pub edges: Option<PathBuf>,
    /// Trained model file
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Output CSV (or directory when --image is a directory)
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    #[command(flatten)]
    pub tunables: Tunables,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of training images
    #[arg(long, value_name = "DIR")]
    pub images: PathBuf,
    /// Directory of binary masks paired with images by file stem
    #[arg(long, value_name = "DIR")]
    pub masks: PathBuf,
    /// Where to write the model
    #[arg(long, value_name = "FILE")]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub tunables: Tunables,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of proposal CSVs named <image_id>.csv
    #[arg(long, value_name = "DIR")]
    pub proposals: PathBuf,
    /// Directory of VOC XML files and/or image_id,x,y,w,h CSV files
    #[arg(long, value_name = "DIR")]
    pub annotations: PathBuf,
    /// Comma-separated IoU thresholds [default: 0.5,0.7]
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub iou: Option<Vec<f64>>,
    /// Number of ranked proposals considered per image [default: 1000]
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Output report CSV
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// Report CSV written by `eval`
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    /// Output plot-data CSV
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    pool.install(|| match cli.command {
        Command::Detect(a) => {
            let cfg = a.tunables.resolve()?;
            commands::detect(&a, &cfg)
        }
        Command::Train(a) => {
            let cfg = a.tunables.resolve()?;
            commands::train(&a, &cfg)
        }
        Command::Eval(a) => commands::eval(&a),
        Command::Curves(a) => commands::curves(&a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
