use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use margin_sparse::{LabelColumn, Method, Mode};

#[derive(Debug, Parser)]
#[command(
    name = "margin-sparse",
    version,
    about = "Margin-preserving feature selection for linear SVMs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select features on a dataset and report margins, radii and bound checks.
    Select(SelectArgs),
    /// Repeated k-fold cross-validation over a grid of methods and feature counts.
    Cv(CvArgs),
    /// Write a synthetic dataset with k relevant features in svmlight format.
    Synth(SynthArgs),
    /// Evaluate one of the spectral, margin, radius or ratio inequalities.
    Verify(VerifyArgs),
    /// Most frequently selected features across cross-validation training folds.
    FeatureFreq(FeatureFreqArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Svmlight,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelSide {
    First,
    Last,
}

impl From<LabelSide> for LabelColumn {
    fn from(side: LabelSide) -> Self {
        match side {
            LabelSide::First => LabelColumn::First,
            LabelSide::Last => LabelColumn::Last,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset path (svmlight or csv).
    #[arg(long)]
    pub data: PathBuf,
    /// Input format; inferred from the extension when omitted (.csv is csv, anything else svmlight).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Which csv column holds the ±1 label.
    #[arg(long, value_enum, default_value = "last")]
    pub label_column: LabelSide,
    /// Feature count for svmlight input; defaults to the largest index seen.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Drop all-zero columns before selection; reported indices still refer to the input columns.
    #[arg(long)]
    pub drop_zero_columns: bool,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Soft-margin penalty C.
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    #[arg(long, default_value_t = 1e-4)]
    pub kkt_tol: f64,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long, value_parser = parse_mode, default_value = "supervised")]
    pub mode: Mode,
    /// Number of features r to select.
    #[arg(long = "features", short = 'r')]
    pub features: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sketch rows for approx-bss; defaults to max(1, r/8).
    #[arg(long)]
    pub t: Option<usize>,
    /// Accuracy of the enclosing-ball computation.
    #[arg(long, default_value_t = 0.001)]
    pub meb_delta: f64,
    /// Fraction of features RFE removes per round.
    #[arg(long, default_value_t = 0.1)]
    pub chunk_fraction: f64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_parser = parse_mode, default_value = "supervised")]
    pub mode: Mode,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// Selections drawn per fold for randomized methods.
    #[arg(long, default_value_t = 5)]
    pub draws: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sketch rows for approx-bss; defaults to max(1, r/8).
    #[arg(long)]
    pub t: Option<usize>,
    /// Fraction of features RFE removes per round.
    #[arg(long, default_value_t = 0.1)]
    pub chunk_fraction: f64,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "bss,leverage,uniform,rrqr,rfe")]
    pub methods: Vec<Method>,
    /// Comma-separated feature counts.
    #[arg(
        long = "features",
        short = 'r',
        value_delimiter = ',',
        default_value = "300,400,500"
    )]
    pub features: Vec<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Leave out the all-features baseline row.
    #[arg(long)]
    pub no_full: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Relevant features; feature j ≤ k has class means ∓j.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path; the dataset goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bound {
    /// ‖VᵀV − VᵀRRᵀV‖₂ on random orthonormal V.
    Spectral,
    /// Margin after selection against the measured spectral error.
    Margin,
    /// Enclosing-ball radius after selection.
    Radius,
    /// Radius-to-margin ratio.
    Ratio,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub bound: Bound,
    /// Columns ℓ of V (spectral).
    #[arg(long = "l")]
    pub ell: Option<usize>,
    /// Features r to select.
    #[arg(long = "r")]
    pub r: Option<usize>,
    /// Random V per run (spectral).
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    /// Rows of V (spectral); defaults to max(4r, 10ℓ).
    #[arg(long = "dim-v")]
    pub d: Option<usize>,
    #[arg(long, value_parser = parse_method, default_value = "bss")]
    pub method: Method,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Dataset for the margin, radius and ratio bounds.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum, default_value = "last")]
    pub label_column: LabelSide,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    pub meb_delta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureFreqArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long = "features", short = 'r')]
    pub features: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    /// How many features to list.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}
