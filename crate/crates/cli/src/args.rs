use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lvsk::harness::{BenchMethod, FigureKind};
use lvsk::matrix::FileFormat;
use lvsk::order::PolicyKind;
use lvsk::sketch::SketchFamily;

/// Exact and sketched statistical leverage scores.
#[derive(Debug, Parser, Serialize)]
#[command(name = "lvsk", version, args_override_self = true)]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for row-parallel products (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Memory cap for dense allocations, e.g. 512M or 8G (default 4G or $LVSK_MEM_CAP).
    #[arg(long, global = true)]
    pub mem_cap: Option<String>,

    /// File of `key = value` lines mirroring the long flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Write a synthetic low-rank-plus-noise matrix.
    Gen(GenArgs),
    /// Compute leverage scores of a matrix file.
    Leverage(LeverageArgs),
    /// Turn scores into per-epoch training orders.
    Order(OrderArgs),
    /// Time exact against sketched scores on synthetic grids.
    Bench(BenchArgs),
    /// Export data behind the accuracy figures.
    Figure(FigureArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Leverage(_) => "leverage",
            Command::Order(_) => "order",
            Command::Bench(_) => "bench",
            Command::Figure(_) => "figure",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for FileFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => FileFormat::Csv,
            FormatArg::Bin => FileFormat::Binary,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    /// Inner dimension of the factors (default: d).
    #[arg(long)]
    pub rank: Option<usize>,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Output matrix path; metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Output format (default: from the extension, `.csv` or binary).
    #[arg(long)]
    pub format: Option<FormatArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Exact,
    Sketch,
    SketchTrunc,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    #[value(alias = "count-sketch", alias = "cs")]
    Countsketch,
    Osnap,
    #[value(alias = "fjlt")]
    Srht,
}

impl From<FamilyArg> for SketchFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Countsketch => SketchFamily::CountSketch,
            FamilyArg::Osnap => SketchFamily::Osnap,
            FamilyArg::Srht => SketchFamily::Srht,
        }
    }
}

/// Sketch construction flags shared by several commands.
#[derive(Debug, Args, Serialize)]
pub struct SketchArgs {
    /// Target distortion of the sketch.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Multiplier on the theoretical row count.
    #[arg(long, default_value_t = 1.0)]
    pub sizing_constant: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct LeverageArgs {
    /// Input matrix, CSV or binary.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Skip one header line of a CSV input.
    #[arg(long)]
    pub header: bool,
    /// Input format (default: from the extension).
    #[arg(long)]
    pub format: Option<FormatArg>,
    /// exact (thin SVD), sketch, sketch-trunc (drops small singular values) or oracle (eigen of AᵀA).
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "countsketch")]
    pub sketch: FamilyArg,
    #[command(flatten)]
    pub sketch_args: SketchArgs,
    /// Relative singular-value cutoff (sketch-trunc, or exact scores of the truncated SVD).
    #[arg(long)]
    pub sv_tol: Option<f64>,
    /// Run sketch-trunc as a coordinator with this many workers.
    #[arg(long)]
    pub workers: Option<usize>,
    /// OSNAP nonzeros per column (default ceil(log2 d)).
    #[arg(long)]
    pub osnap_s: Option<usize>,
    /// Explicit sketch row count, overriding the sizing rule.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Score CSV (`row,score`); metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    Shuffle,
    Dec,
    #[value(alias = "dec_swr")]
    DecSwr,
    #[value(alias = "dec_swor")]
    DecSwor,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Shuffle => PolicyKind::Shuffle,
            PolicyArg::Dec => PolicyKind::Dec,
            PolicyArg::DecSwr => PolicyKind::DecSwr,
            PolicyArg::DecSwor => PolicyKind::DecSwor,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct OrderArgs {
    /// Scores as written by `leverage`, or one score per line.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 1)]
    pub epochs: u64,
    /// Mini-batch size recorded in the manifest.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Directory for `epoch_NNNN.txt` files and `manifest.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Exact,
    Countsketch,
    Osnap,
    Srht,
}

impl From<MethodName> for BenchMethod {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Exact => BenchMethod::Exact,
            MethodName::Countsketch => BenchMethod::CountSketch,
            MethodName::Osnap => BenchMethod::Osnap,
            MethodName::Srht => BenchMethod::Srht,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Preset grid: smoke, table1, table2 or table3. Ignored when --n is given.
    #[arg(long, default_value = "smoke")]
    pub scenario: String,
    /// Custom grid row counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Custom grid column count.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<MethodName>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub sizing_constant: Option<f64>,
    /// Per-run timings; the median summary goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    #[value(name = "rank_full", alias = "rank-full")]
    RankFull,
    #[value(name = "rank_half", alias = "rank-half")]
    RankHalf,
    #[value(name = "trunc_fix", alias = "trunc-fix")]
    TruncFix,
    Spectrum,
}

impl From<KindArg> for FigureKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::RankFull => FigureKind::RankFull,
            KindArg::RankHalf => FigureKind::RankHalf,
            KindArg::TruncFix => FigureKind::TruncFix,
            KindArg::Spectrum => FigureKind::Spectrum,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FigureArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub d: usize,
    #[command(flatten)]
    pub sketch_args: SketchArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3])]
    pub sv_tol: Vec<f64>,
    /// Rows of the low-rank-plus-noise input.
    #[arg(long, default_value_t = 20_000)]
    pub noisy_n: usize,
    #[arg(long, default_value_t = 200)]
    pub noisy_d: usize,
    #[arg(long, default_value_t = 50)]
    pub noisy_rank: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub noise: f64,
    /// Figure CSV; metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}
