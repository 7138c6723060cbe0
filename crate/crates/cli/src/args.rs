use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use filtersel::classify::BandNormalization;
use filtersel::selection::FeasibilityMode;
use filtersel::{MetricId, Shape};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "filtersel",
    version,
    about = "Select optical filters that maximize the minimum pairwise response distance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select K filters and report the chosen set.
    Select(SelectArgs),
    /// Time threshold bisection against full search over a range of K.
    Bench(BenchArgs),
    /// Train and score spectral-angle classifiers.
    Classify(ClassifyArgs),
    /// Synthesize a bandpass filter bank.
    GenFilters(GenFiltersArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMethod {
    Fbs,
    Full,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifyMethod {
    Fbs,
    Uniform,
    FullSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FsMode {
    Pruned,
    Exhaustive,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    EarlyExit,
    ExactMax,
}

impl From<Feasibility> for FeasibilityMode {
    fn from(f: Feasibility) -> Self {
        match f {
            Feasibility::EarlyExit => FeasibilityMode::EarlyExit,
            Feasibility::ExactMax => FeasibilityMode::ExactMax,
        }
    }
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad lower bound `{lo}`"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad upper bound `{hi}`"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("range `{s}` must satisfy lo < hi"));
    }
    Ok((lo, hi))
}

pub fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (n, m) = s
        .split_once(':')
        .ok_or_else(|| format!("expected N:M, got `{s}`"))?;
    let n = n
        .trim()
        .parse()
        .map_err(|_| format!("bad filter count `{n}`"))?;
    let m = m
        .trim()
        .parse()
        .map_err(|_| format!("bad object count `{m}`"))?;
    Ok((n, m))
}

fn parse_metric(s: &str) -> Result<MetricId, String> {
    s.parse()
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    s.parse()
}

fn parse_band_norm(s: &str) -> Result<BandNormalization, String> {
    s.parse()
}

fn parse_guard(s: &str) -> Result<u128, String> {
    if let Ok(v) = s.parse::<u128>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() && v.fract() == 0.0 => Ok(v as u128),
        _ => Err(format!(
            "guard must be a nonnegative integer count, got `{s}`"
        )),
    }
}

/// Where the candidate filters and the objects come from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct InstanceArgs {
    /// Labeled spectra table (first column wavelength_nm, one column per spectrum).
    #[arg(long)]
    pub spectra: Option<PathBuf>,
    /// Candidate filter bank table; without it a bank is synthesized.
    #[arg(long)]
    pub filters: Option<PathBuf>,
    /// Precomputed response matrix (filter_id column, one column per object).
    #[arg(long, conflicts_with_all = ["spectra", "filters"])]
    pub responses: Option<PathBuf>,
    /// Seeded random response matrix with N filters and M objects.
    #[arg(long, value_name = "N:M", value_parser = parse_dims, conflicts_with_all = ["spectra", "filters", "responses"])]
    pub random: Option<(usize, usize)>,
    /// Keep only wavelengths inside lo:hi (nm) when loading spectra.
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub crop: Option<(f64, f64)>,
    #[command(flatten)]
    pub bank: BankArgs,
}

/// Parameters for synthesizing a candidate bank.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct BankArgs {
    /// Wavelength span the passbands cover (defaults to the spectral grid range).
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub bank_range: Option<(f64, f64)>,
    /// Comma-separated bandwidths in nm [default: 10,20,50].
    #[arg(long, value_delimiter = ',')]
    pub bandwidths: Option<Vec<f64>>,
    /// Filters per bandwidth [default: 24].
    #[arg(long)]
    pub count_per_bandwidth: Option<usize>,
    /// Passband shape: gaussian (FWHM = bandwidth) or rect [default: gaussian].
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<Shape>,
}

impl BankArgs {
    pub fn any_set(&self) -> bool {
        self.bank_range.is_some()
            || self.bandwidths.is_some()
            || self.count_per_bandwidth.is_some()
            || self.shape.is_some()
    }
}

/// Options shared by every search.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long, default_value = "angle", value_parser = parse_metric)]
    pub metric: MetricId,
    /// Bisection iterations.
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, value_enum, default_value_t = Feasibility::EarlyExit)]
    pub feasibility: Feasibility,
    /// Start the bracket at 0 instead of the smallest off-diagonal distance.
    #[arg(long)]
    pub literal_min: bool,
    /// Stop bisecting once the bracket is narrower than this.
    #[arg(long)]
    pub min_bracket: Option<f64>,
    /// Largest number of combinations full search may enumerate.
    #[arg(long, default_value = "1000000000", value_parser = parse_guard)]
    pub fs_guard: u128,
    /// Seed for any randomness (random instances, synthetic benchmarks).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output file (written atomically); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, value_enum, default_value_t = SelectMethod::Fbs)]
    pub method: SelectMethod,
    /// Number of filters to select.
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Comma-separated K values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    /// Timed repeats per cell; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Which full-search variants to time.
    #[arg(long, value_enum, default_value_t = FsMode::Both)]
    pub fs_mode: FsMode,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClassifyArgs {
    /// Labeled spectra; the first --train-per-class spectra of each class train, the rest test.
    #[arg(long, conflicts_with = "synthetic")]
    pub spectra: Option<PathBuf>,
    /// Use the seeded synthetic benchmark instead of a spectra file.
    #[arg(long)]
    pub synthetic: bool,
    /// Candidate bank for fbs; without it a bank is synthesized.
    #[arg(long)]
    pub filters: Option<PathBuf>,
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub crop: Option<(f64, f64)>,
    #[command(flatten)]
    pub bank: BankArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Comma-separated methods to evaluate.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "fbs,uniform,full-spectrum"
    )]
    pub method: Vec<ClassifyMethod>,
    /// Filters per model (selected by fbs, equidistant for uniform).
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Bandwidth of the equidistant uniform filters, nm.
    #[arg(long, default_value_t = 50.0)]
    pub uniform_bandwidth: f64,
    #[arg(long, default_value = "rms", value_parser = parse_band_norm)]
    pub band_norm: BandNormalization,
    #[arg(long, default_value_t = 25)]
    pub train_per_class: usize,
    /// Synthetic benchmark: classes.
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Synthetic benchmark: test spectra per class.
    #[arg(long, default_value_t = 75)]
    pub test_per_class: usize,
    /// Synthetic benchmark: per-sample noise as a fraction of the mean level.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Synthetic benchmark: class feature amplitude on a shared base spectrum;
    /// classes are drawn independently when absent.
    #[arg(long)]
    pub shared_base: Option<f64>,
    /// Also write the trained fbs model (JSON) here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenFiltersArgs {
    /// Wavelength span the passbands cover.
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub bank_range: (f64, f64),
    /// Comma-separated bandwidths in nm.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    pub bandwidths: Vec<f64>,
    /// Filters per bandwidth.
    #[arg(long, default_value_t = 24)]
    pub count_per_bandwidth: usize,
    #[arg(long, default_value = "gaussian", value_parser = parse_shape)]
    pub shape: Shape,
    /// Sampling grid lo:hi (defaults to the bank range).
    #[arg(long, value_name = "LO:HI", value_parser = parse_range)]
    pub grid_range: Option<(f64, f64)>,
    /// Sampling step in nm.
    #[arg(long, default_value_t = 1.0)]
    pub grid_step: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}
