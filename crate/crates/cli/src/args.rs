use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mzi::{Horizon, Mode};

#[derive(Parser, Debug)]
#[command(
    name = "mzi",
    version,
    about = "Interferometer factor tests, cascades and Fourier coefficients"
)]
pub struct Cli {
    /// Worker threads for parallel engines (results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Run the factor test for one candidate divisor.
    Test(TestArgs),
    /// Test every candidate up to the square root.
    Factor(FactorArgs),
    /// Evaluate a cascade of loops.
    Cascade(CascadeArgs),
    /// Fourier coefficient of a periodic signal.
    Fourier(FourierArgs),
    /// Coherence-length limits.
    Limits(LimitsArgs),
    /// Re-run a recorded manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Test(_) => "test",
            Command::Factor(_) => "factor",
            Command::Cascade(_) => "cascade",
            Command::Fourier(_) => "fourier",
            Command::Limits(_) => "limits",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutputArgs {
    /// JSON report.
    #[arg(long, conflicts_with = "csv")]
    #[serde(default)]
    pub json: bool,
    /// CSV report.
    #[arg(long)]
    #[serde(default)]
    pub csv: bool,
    /// Also write the report to FILE, with FILE.manifest.json beside it.
    /// Relative paths are taken under $MZI_OUT_DIR when it is set.
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
pub struct StochasticArgs {
    /// Send particles one at a time instead of summing probabilities.
    #[arg(long)]
    #[serde(default)]
    pub stochastic: bool,
    #[arg(long, default_value_t = 0, requires = "stochastic")]
    #[serde(default)]
    pub seed: u64,
    /// Particles per observation.
    #[arg(long, value_name = "R", requires = "stochastic", value_parser = clap::value_parser!(u32).range(1..))]
    #[serde(default)]
    pub reps: Option<u32>,
    /// Write per-observation click counts to FILE as CSV.
    #[arg(long, value_name = "FILE", requires = "stochastic")]
    #[serde(default)]
    pub clicks: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TestArgs {
    /// Number under test.
    #[arg(value_name = "N", value_parser = clap::value_parser!(u64).range(2..))]
    pub target: u64,
    /// Candidate divisor.
    #[arg(value_name = "n", value_parser = clap::value_parser!(u64).range(2..))]
    pub n: u64,
    /// Fringe visibility in [0, 1].
    #[arg(long, default_value_t = 1.0, conflicts_with = "stochastic")]
    pub visibility: f64,
    /// Mis-set the increment to 2π/(n + d).
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["stochastic", "visibility"])]
    #[serde(default)]
    pub deviation: Option<f64>,
    #[command(flatten)]
    #[serde(default)]
    pub mc: StochasticArgs,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FactorArgs {
    #[arg(value_name = "N", value_parser = clap::value_parser!(u64).range(2..))]
    pub target: u64,
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,
    /// Recurse on cofactors down to primes.
    #[arg(long)]
    #[serde(default)]
    pub full: bool,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(group(ArgGroup::new("network").required(true).args(["fig2", "spec", "table1"])))]
pub struct CascadeArgs {
    /// Seven-loop network: N followed by n1..n7, strictly increasing.
    #[arg(long, num_args = 8, value_names = ["N", "N1", "N2", "N3", "N4", "N5", "N6", "N7"])]
    #[serde(default)]
    pub fig2: Option<Vec<u64>>,
    /// Network from a JSON file.
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub spec: Option<PathBuf>,
    /// Front section n1 -> n2 -> n4 compared with the tabulated rows.
    #[arg(long, num_args = 4, value_names = ["N", "N1", "N2", "N4"])]
    #[serde(default)]
    pub table1: Option<Vec<u64>>,
    /// Readings per detector: path-max, lcm, or a number.
    #[arg(long)]
    #[serde(default)]
    pub horizon: Option<Horizon>,
    /// Start every loop at increment zero.
    #[arg(long, conflicts_with = "table1")]
    #[serde(default)]
    pub no_delay: bool,
    #[command(flatten)]
    #[serde(default)]
    pub mc: StochasticArgs,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct FourierArgs {
    /// Built-in signal (demo1, demo2, constant). Default demo1.
    #[arg(long, conflicts_with = "samples")]
    #[serde(default)]
    pub builtin: Option<String>,
    /// Sampled signal: CSV with columns t,f on a uniform grid over one period.
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub samples: Option<PathBuf>,
    /// Period of the sampled signal; default is the sample count times the spacing.
    #[arg(long)]
    #[serde(default)]
    pub period: Option<f64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: u64,
    #[arg(long, default_value = "cos", value_parser = parse_mode)]
    pub mode: Mode,
    /// Detector proportionality constant.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub visibility: f64,
    /// Write the I_A - I_B trace over one period to FILE.
    #[arg(long, value_name = "FILE")]
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub stochastic: bool,
    #[arg(long, default_value_t = 1_000_000, requires = "stochastic")]
    pub particles: u64,
    #[arg(long, default_value_t = 0, requires = "stochastic")]
    #[serde(default)]
    pub seed: u64,
    /// Physical period in seconds; enables the adiabaticity check.
    #[arg(long)]
    #[serde(default)]
    pub tau: Option<f64>,
    /// Wavelength for the adiabaticity check, in meters.
    #[arg(long, default_value_t = 500e-9)]
    pub lambda: f64,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[command(group(ArgGroup::new("width").required(true).args(["dlambda", "coherence"])))]
pub struct LimitsArgs {
    /// Central wavelength in meters.
    #[arg(long)]
    pub lambda: f64,
    /// Wavelength spread in meters.
    #[arg(long)]
    #[serde(default)]
    pub dlambda: Option<f64>,
    /// Coherence length in meters.
    #[arg(long)]
    #[serde(default)]
    pub coherence: Option<f64>,
    /// Also report step counts and envelope visibility for this N.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(2..))]
    #[serde(default)]
    pub target: Option<u64>,
    #[command(flatten)]
    #[serde(default)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here, keeping their file names.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "cos" => Ok(Mode::Cos),
        "sin" => Ok(Mode::Sin),
        other => Err(format!("expected cos or sin, got {other:?}")),
    }
}

impl Command {
    pub fn output(&self) -> Option<&OutputArgs> {
        match self {
            Command::Test(a) => Some(&a.output),
            Command::Factor(a) => Some(&a.output),
            Command::Cascade(a) => Some(&a.output),
            Command::Fourier(a) => Some(&a.output),
            Command::Limits(a) => Some(&a.output),
            Command::Replay(_) => None,
        }
    }
}
