use clap::{Args, Parser, Subcommand, ValueEnum};
use mdvsp_ddd::mip::{BackendKind, Tolerance};
use mdvsp_ddd::postprocess::PostprocessMode;
use mdvsp_ddd::refine::RefineStrategy;
use mdvsp_ddd::timenet::DeadheadScheme;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "mdvsp", version, about = "Vehicle scheduling with trip shifting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random instances.
    Gen(GenArgs),
    /// Solve one instance.
    Solve(SolveArgs),
    /// Solve a grid of instances and settings and tabulate averages.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, env = "MDVSP_TRIPS")]
    pub trips: usize,
    #[arg(long, env = "MDVSP_COUNT", default_value_t = 1)]
    pub count: usize,
    /// Seed of the first instance; the others use the following seeds.
    #[arg(long, env = "MDVSP_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "MDVSP_DEPOTS", default_value_t = 4)]
    pub depots: usize,
    /// Number of stations; one tenth of the trips when omitted.
    #[arg(long, env = "MDVSP_STATIONS")]
    pub stations: Option<usize>,
    #[arg(long, env = "MDVSP_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fd,
    Ddd,
}

/// Solver settings shared by `solve` and `bench`.
#[derive(Debug, Args, Clone)]
pub struct SolverArgs {
    /// TOML file with defaults for any of these settings.
    #[arg(long, env = "MDVSP_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "MDVSP_TIME_LIMIT", value_name = "SECONDS")]
    pub time_limit: Option<f64>,
    /// Termination gap: an absolute amount, or a percentage such as `0.5%`.
    #[arg(long, env = "MDVSP_EPSILON", value_parser = parse_tolerance)]
    pub epsilon: Option<Tolerance>,
    #[arg(long, env = "MDVSP_BACKEND")]
    pub backend: Option<BackendKind>,
    #[arg(long, env = "MDVSP_MAX_ITERATIONS")]
    pub max_iterations: Option<usize>,
    #[arg(long, env = "MDVSP_ENUMERATION_CAP")]
    pub enumeration_cap: Option<usize>,
    #[arg(long, env = "MDVSP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long, conflicts_with = "ddd")]
    pub fd: bool,
    #[arg(long)]
    pub ddd: bool,
    #[arg(long, env = "MDVSP_DELTA_MAX")]
    pub delta_max: Option<i64>,
    #[arg(long, env = "MDVSP_SCHEME")]
    pub scheme: Option<DeadheadScheme>,
    #[arg(long = "refine", env = "MDVSP_REFINE")]
    pub refine: Option<RefineStrategy>,
    /// `per-duty` or `optimized`.
    #[arg(long, env = "MDVSP_POSTPROCESS")]
    pub postprocess: Option<PostprocessMode>,
    /// Also write the network behind the schedule as JSON lines.
    #[arg(long)]
    pub dump_network: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Instance files; when none are given, instances are generated.
    pub instances: Vec<PathBuf>,
    #[arg(long, env = "MDVSP_TRIPS", default_value_t = 50)]
    pub trips: usize,
    #[arg(long, env = "MDVSP_COUNT", default_value_t = 10)]
    pub count: usize,
    #[arg(long, env = "MDVSP_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, env = "MDVSP_DEPOTS", default_value_t = 4)]
    pub depots: usize,
    #[arg(long, env = "MDVSP_STATIONS")]
    pub stations: Option<usize>,
    #[arg(long, env = "MDVSP_DELTA_MAX", value_delimiter = ',', default_value = "1")]
    pub delta_max: Vec<i64>,
    #[arg(long, env = "MDVSP_SCHEME", value_delimiter = ',', default_value = "long")]
    pub scheme: Vec<DeadheadScheme>,
    #[arg(long = "refine", env = "MDVSP_REFINE", value_delimiter = ',', default_value = "fewer-timepoints")]
    pub refine: Vec<RefineStrategy>,
    /// Add a full-network run for every instance and shift.
    #[arg(long)]
    pub fd: bool,
    /// Write one bound-trajectory file per run.
    #[arg(long)]
    pub trajectories: bool,
    #[arg(long, env = "MDVSP_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

pub fn parse_tolerance(s: &str) -> Result<Tolerance, String> {
    let t = match s.strip_suffix('%') {
        Some(p) => Tolerance::Relative(p.trim().parse::<f64>().map_err(|e| e.to_string())? / 100.0),
        None => Tolerance::Absolute(s.trim().parse::<f64>().map_err(|e| e.to_string())?),
    };
    match t {
        Tolerance::Relative(v) | Tolerance::Absolute(v) if v.is_finite() && v >= 0.0 => Ok(t),
        _ => Err(format!("tolerance `{s}` must be a nonnegative number")),
    }
}
