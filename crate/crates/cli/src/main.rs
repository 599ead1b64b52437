//! `riskocc` command line: risk maps, plans, replays, the edge service and
//! the braking study.
//!
//! Exit codes: 0 success, 64 usage, 1 invalid input, 2 I/O, 3 planning.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskocc::eval::StudyError;
use riskocc::occupancy::OccupancyError;
use riskocc::planner::{PlanError, Strategy};
use riskocc::scenario::{Maneuver, ScenarioError};
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(name = "riskocc", version, about = "Risk occupancy maps and path planning over roadside perception")]
pub struct Cli {
    /// Config file (TOML, or JSON by extension). RISKOCC_CONFIG takes precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the risk grid of one frame and export it.
    Map(MapArgs),
    /// Plan a path for one frame and write it with an overlay render.
    Plan(PlanArgs),
    /// Compute grids (and optionally plans) for a range of frames.
    Replay(ReplayArgs),
    /// Run the edge service over TCP or stdin/stdout.
    Serve(ServeArgs),
    /// Run the braking study on a scenario file.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SceneArgs {
    #[arg(long, value_name = "PATH")]
    pub map_prior: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub frames: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Pgm,
    Ppm,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// per-grid min-max
    Minmax,
    /// 0 -> black, risk >= 2 -> white
    Fixed,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Frame index (0-based) in the frames file
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,pgm")]
    pub format: Vec<Format>,
    #[arg(long, value_enum, default_value = "minmax")]
    pub scale: Scale,
    /// Leave this object out of the grid (usually the ego vehicle)
    #[arg(long, value_name = "ID")]
    pub exclude: Option<String>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = 0)]
    pub frame: usize,
    #[arg(long)]
    pub maneuver: Maneuver,
    /// ICV position as X,Y in local meters
    #[arg(long, value_name = "X,Y", value_parser = parse_xy, required_unless_present = "icv_id", conflicts_with = "icv_id")]
    pub icv: Option<(f64, f64)>,
    /// Take the ICV position from this object in the frame and leave it out of the grid
    #[arg(long, value_name = "ID")]
    pub icv_id: Option<String>,
    /// Overrides planner.strategy from the config
    #[arg(long)]
    pub strategy: Option<Strategy>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Frame indices A:B (half-open; either end may be omitted)
    #[arg(long, value_name = "A:B", value_parser = parse_range)]
    pub range: Option<(Option<usize>, Option<usize>)>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,pgm")]
    pub format: Vec<Format>,
    #[arg(long, value_enum, default_value = "minmax")]
    pub scale: Scale,
    /// Also plan for this object each frame (it is left out of the grid)
    #[arg(long, value_name = "ID", requires = "maneuver")]
    pub icv_id: Option<String>,
    #[arg(long, requires = "icv_id")]
    pub maneuver: Option<Maneuver>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false, id = "mode")]
pub struct ServeMode {
    #[arg(long, value_name = "HOST:PORT", group = "mode")]
    pub listen: Option<String>,
    /// Read requests from stdin, write replies to stdout
    #[arg(long, group = "mode")]
    pub pipe: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, value_name = "PATH")]
    pub map_prior: PathBuf,
    #[command(flatten)]
    pub mode: ServeMode,
    /// Session log (pipe mode): every message in and out, flushed per message
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    /// Study speed, m/s (overrides braking.v0)
    #[arg(long)]
    pub v0: Option<f64>,
    /// Maximum deceleration, m/s^2 (overrides braking.a_max)
    #[arg(long)]
    pub amax: Option<f64>,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
}

fn parse_xy(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let x: f64 = x.trim().parse().map_err(|e| format!("bad X: {e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("bad Y: {e}"))?;
    if !(x.is_finite() && y.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok((x, y))
}

fn parse_range(s: &str) -> Result<(Option<usize>, Option<usize>), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B")?;
    let end = |v: &str| -> Result<Option<usize>, String> {
        if v.is_empty() {
            Ok(None)
        } else {
            v.parse().map(Some).map_err(|e| format!("bad index `{v}`: {e}"))
        }
    };
    Ok((end(a)?, end(b)?))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Invalid(String),
    Io(String),
    Planning(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
            CliError::Planning(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Invalid(m) | CliError::Io(m) | CliError::Planning(m) => m,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<OccupancyError> for CliError {
    fn from(e: OccupancyError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::BadConfig(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Planning(e.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::Scenario(e) => e.into(),
            StudyError::Plan(e) => CliError::Planning(e.to_string()),
            StudyError::Geometry(m) => CliError::Invalid(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("RISKOCC_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
