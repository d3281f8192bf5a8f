use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmc_core::{PairMode, PdConvention, Polarity, SamplingScheme};

#[derive(Debug, Parser)]
#[command(
    name = "gmc",
    version,
    about = "Granularity-modulated correlation for IQA score files"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute GMC reports, surfaces and query points for each model.
    Eval(EvalArgs),
    /// Resample MOS-imbalanced subsets and compare the spread of SRCC and GMC_g.
    Robustness(RobustnessArgs),
    /// Sweep the query count K over seeds for LHS and random sampling.
    Ablation(AblationArgs),
    /// Add two score columns after normalizing them to a common polarity.
    Combine(CombineArgs),
}

#[derive(Debug, Clone)]
pub struct NamedInput {
    pub name: String,
    pub path: PathBuf,
}

fn parse_input(s: &str) -> Result<NamedInput, String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))?;
    let name = name.trim();
    if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
        return Err(format!("invalid model name `{name}`"));
    }
    if path.is_empty() {
        return Err(format!("missing path for model `{name}`"));
    }
    Ok(NamedInput {
        name: name.to_string(),
        path: PathBuf::from(path),
    })
}

pub fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected MIN:MAX, got `{s}`"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad range minimum `{lo}`"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad range maximum `{hi}`"))?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(format!("range {lo}:{hi} must satisfy MIN < MAX"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Metric {
    Plcc,
    Srcc,
    Krcc,
}

impl From<Metric> for PairMode {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Plcc => PairMode::PlccDiff,
            Metric::Srcc => PairMode::SrccRankDiff,
            Metric::Krcc => PairMode::KrccSign,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Sampler {
    Lhs,
    Random,
}

impl From<Sampler> for SamplingScheme {
    fn from(s: Sampler) -> Self {
        match s {
            Sampler::Lhs => SamplingScheme::Lhs,
            Sampler::Random => SamplingScheme::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VarianceConvention {
    /// `σ_i² + σ_j²` in the |ΔMOS| weight.
    Printed,
    /// `2(σ_i² + σ_j²)`.
    Doubled,
}

impl From<VarianceConvention> for PdConvention {
    fn from(v: VarianceConvention) -> Self {
        match v {
            VarianceConvention::Printed => PdConvention::Printed,
            VarianceConvention::Doubled => PdConvention::Doubled,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolarityArg {
    Higher,
    Lower,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::Higher => Polarity::HigherBetter,
            PolarityArg::Lower => Polarity::LowerBetter,
        }
    }
}

/// Options shared by the commands that run the GMC pipeline. Unset flags fall
/// back to `--config`, then to the built-in defaults.
#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Score file for one model; repeat for several models scored on the same images.
    #[arg(long = "input", value_name = "NAME=PATH", value_parser = parse_input, required = true)]
    pub inputs: Vec<NamedInput>,

    /// JSON file with pipeline settings.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub metric: Option<Metric>,

    /// Number of query points.
    #[arg(long)]
    pub k: Option<usize>,

    /// Histogram bins over the normalized MOS scale.
    #[arg(long)]
    pub bins: Option<usize>,

    /// Surface grid resolution per axis.
    #[arg(long)]
    pub grid: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum)]
    pub sampler: Option<Sampler>,

    /// Use raw bin frequencies for the MOS density.
    #[arg(long)]
    pub no_kernel_smoothing: bool,

    /// Gaussian bandwidth of the density smoother, in normalized MOS units.
    #[arg(long)]
    pub density_bandwidth: Option<f64>,

    /// Beta dispersion used to estimate missing rating deviations.
    #[arg(long, default_value_t = gmc_core::dataset::DEFAULT_PHI)]
    pub phi: f64,

    /// Raw MOS scale bounds; defaults to the observed extent.
    #[arg(long, value_name = "MIN:MAX", value_parser = parse_range)]
    pub scale: Option<(f64, f64)>,

    /// MOS range of the query plane, in normalized units.
    #[arg(long, value_name = "MIN:MAX", value_parser = parse_range)]
    pub qs_range: Option<(f64, f64)>,

    /// |ΔMOS| range of the query plane, in normalized units.
    #[arg(long, value_name = "MIN:MAX", value_parser = parse_range)]
    pub qd_range: Option<(f64, f64)>,

    #[arg(long, value_enum)]
    pub pd_variance_convention: Option<VarianceConvention>,

    /// Drop pair weights below this value.
    #[arg(long)]
    pub weight_cutoff: Option<f64>,

    /// Draw separate jitter for the two LHS axes.
    #[arg(long)]
    pub independent_u: bool,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Also write a heatmap of each surface.
    #[arg(long)]
    pub render_svg: bool,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// JSON list of resampling plans; defaults to the nine built-in mixtures.
    #[arg(long, value_name = "FILE")]
    pub plans: Option<PathBuf>,

    /// Subset size for the built-in plans; defaults to min(1000, n/2).
    #[arg(long)]
    pub subset_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Query counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50,100,200,500,1000")]
    pub k_values: Vec<usize>,

    /// Number of seeds per (scheme, K), counting up from `--seed`.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,

    #[arg(long, value_enum, value_delimiter = ',', default_value = "lhs,random")]
    pub schemes: Vec<Sampler>,
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    /// First score file.
    #[arg(long, value_name = "PATH")]
    pub a: PathBuf,

    #[arg(long, value_enum, default_value = "higher")]
    pub polarity_a: PolarityArg,

    /// Second score file, rows aligned with the first.
    #[arg(long, value_name = "PATH")]
    pub b: PathBuf,

    #[arg(long, value_enum, default_value = "higher")]
    pub polarity_b: PolarityArg,

    /// Output score file (CSV).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}
