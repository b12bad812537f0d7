//! `artc`: align, analyze, simulate, validate and diagnose factorial data
//! with the aligned rank transform and ART-C contrasts.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "artc", version, about = "Aligned rank transform with multifactor contrasts")]
struct Cli {
    /// TOML file of default flag values; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Where to write the run manifest (default: next to the output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Align and rank a response for one or more contrast families.
    Align(AlignArgs),
    /// Omnibus ART ANOVA plus ART-C pairwise contrasts.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic dataset and its recipe sidecar.
    Simulate(SimulateArgs),
    /// Monte Carlo Type I error and power over a design grid.
    Validate(ValidateArgs),
    /// Check aligned residuals for fat tails.
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Long-format CSV, one row per observation.
    #[arg(short, long)]
    input: PathBuf,
    /// Response column.
    #[arg(long)]
    response: String,
    /// Factor columns, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    factors: Vec<String>,
    /// Subject id column (required for within-subjects analyses).
    #[arg(long)]
    subject: Option<String>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Between,
    Within,
}

impl From<Kind> for artc_core::DesignKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Between => artc_core::DesignKind::Between,
            Kind::Within => artc_core::DesignKind::Within,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Adjust {
    Holm,
    Bonferroni,
    None,
}

impl From<Adjust> for artc_core::AdjustMethod {
    fn from(a: Adjust) -> Self {
        match a {
            Adjust::Holm => artc_core::AdjustMethod::Holm,
            Adjust::Bonferroni => artc_core::AdjustMethod::Bonferroni,
            Adjust::None => artc_core::AdjustMethod::None,
        }
    }
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Factors to concatenate, comma separated; repeat for several families.
    #[arg(long, required = true)]
    target: Vec<String>,
    /// Align for the effect (classic ART) instead of for contrasts.
    #[arg(long)]
    effect: bool,
    /// Output CSV.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    design_kind: Kind,
    /// Factors whose level combinations are compared; omit for ANOVA only.
    #[arg(long, value_delimiter = ',')]
    target: Vec<String>,
    #[arg(long, value_enum, default_value = "holm")]
    adjust: Adjust,
    /// Output directory for anova.csv and contrasts.csv.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Scenario {
    RunningExample,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Fixed scenario; overrides layout, distribution, n and locations.
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// 2x2, 3x3 or 2x2x2.
    #[arg(long, default_value = "2x2")]
    layout: String,
    /// normal, lognormal, exponential, cauchy, t3 or double_exponential.
    #[arg(long, default_value = "normal")]
    distribution: String,
    /// Observations per condition (subjects, for within-subjects data).
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, value_enum, default_value = "between")]
    design_kind: Kind,
    /// Equal population locations in every condition.
    #[arg(long)]
    null_true: bool,
    #[arg(long, default_value_t = artc_core::harness::GridConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    replication: u64,
    /// Output CSV; the recipe goes to `<output>.recipe.txt`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum GridName {
    Smoke,
    Full,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, value_enum, default_value = "smoke")]
    grid: GridName,
    /// Keep only these layouts.
    #[arg(long, value_delimiter = ',')]
    layout: Vec<String>,
    /// Keep only these distributions.
    #[arg(long, value_delimiter = ',')]
    distribution: Vec<String>,
    /// Keep only these per-condition sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Keep only this design kind.
    #[arg(long, value_enum)]
    design_kind: Option<Kind>,
    #[arg(long, default_value_t = artc_core::harness::GridConfig::default().replications)]
    replications: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = artc_core::harness::GridConfig::default().seed)]
    seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory for the report CSVs.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Contrast family to check, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    target: Vec<String>,
    /// Report file (key = value lines).
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let raw: Vec<String> = std::env::args().collect();
    let args = match config::merge_config_args(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    let cli = Cli::parse_from(&args);
    match commands::run(&cli, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
