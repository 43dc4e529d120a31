//! Command-line definitions and dispatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult, EXIT_ANALYSIS, EXIT_INPUT, EXIT_OK};
use crate::output::Format;
use crate::spec::SystemSpec;

#[derive(Debug, Parser)]
#[command(
    name = "perstab",
    version,
    about = "Stability analysis of periodic difference-delay systems"
)]
pub struct Cli {
    /// JSON file overriding the analysis defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Exit with status 1 when the analysis is inconclusive.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-domain solution from an initial history.
    Simulate(SimulateArgs),
    /// Kernel coefficients on the delay lattice.
    Kernel(KernelArgs),
    /// sigma_min of the truncated harmonic operator over a half-plane grid.
    Scan(ScanArgs),
    /// All stability tests with consistency flags.
    Stability(StabilityArgs),
    /// Harmonic transfer function blocks.
    Htf(HtfArgs),
    /// One-period discrete realization.
    Realize(RealizeArgs),
    /// Resolvent checks for the Stieltjes-Volterra form.
    #[command(name = "volterra-check")]
    VolterraCheck(VolterraArgs),
    /// Bundled demonstrations.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// Two-dimensional example whose frozen-time test passes although it is unstable.
    Counterexample {
        #[arg(long, default_value_t = 0.9)]
        alpha: f64,
        #[command(flatten)]
        out: ReportOutput,
    },
}

#[derive(Debug, Args)]
pub struct SystemArg {
    /// JSON system file.
    #[arg(long)]
    pub system: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Grid,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// const:v[,v..] | random:SEED | expr:e[;e..] | CSV file.
    #[arg(long)]
    pub phi: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub to: f64,
    #[arg(long, value_enum, default_value_t = BackendArg::Grid)]
    pub backend: BackendArg,
    /// Grid cells per largest delay (default from config).
    #[arg(long)]
    pub cells: Option<usize>,
    /// Output spacing for the exact backend (default tau_N / cells).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, value_enum, default_value_t = DataFormat::Csv)]
    pub format: DataFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub system: SystemArg,
    #[arg(long)]
    pub horizon: f64,
    /// Time grid points per period.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub system: SystemArg,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub remax: Option<f64>,
    /// Grid size: number of real and imaginary points.
    #[arg(long, num_args = 2, value_names = ["NRE", "NIM"])]
    pub grid: Option<Vec<usize>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportOutput {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub system: SystemArg,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long = "M-cells")]
    pub m_cells: Option<usize>,
    #[arg(long = "M-bound")]
    pub m_bound: Option<f64>,
    #[command(flatten)]
    pub out: ReportOutput,
}

#[derive(Debug, Args)]
pub struct HtfArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// Laplace variable as `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub p: (f64, f64),
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Compare with the Fourier coefficients of the instantaneous transfer function.
    #[arg(long)]
    pub consistency: bool,
    /// Kernel horizon for the consistency check (default 20 periods).
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RealizeArgs {
    #[command(flatten)]
    pub system: SystemArg,
    #[arg(long = "Mz")]
    pub m_z: usize,
    #[arg(long = "Mu")]
    pub m_u: usize,
    /// Compare the block impulse operator with the HTF at `re,im`.
    #[arg(long = "verify-lambda", value_parser = parse_complex, allow_hyphen_values = true)]
    pub verify_lambda: Option<(f64, f64)>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long, value_enum, default_value_t = DataFormat::Json)]
    pub format: DataFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VolterraArgs {
    #[command(flatten)]
    pub system: SystemArg,
    /// History to solve with the resolvent (same syntax as `simulate --phi`).
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub start: f64,
    /// Sample points per delay interval.
    #[arg(long, default_value_t = 24)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = DataFormat::Json)]
    pub format: DataFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_complex(s: &str) -> Result<(f64, f64), String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let re = re.trim().parse::<f64>().map_err(|e| format!("{re:?}: {e}"))?;
    let im = im.trim().parse::<f64>().map_err(|e| format!("{im:?}: {e}"))?;
    Ok((re, im))
}

/// Outcome of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    Inconclusive,
}

pub fn load_config(path: Option<&Path>) -> CliResult<AnalysisConfig> {
    match path {
        Some(p) => AnalysisConfig::load(p),
        None => Ok(AnalysisConfig::default()),
    }
}

impl Command {
    fn system_path(&self) -> Option<&Path> {
        let arg = match self {
            Command::Simulate(a) => &a.system,
            Command::Kernel(a) => &a.system,
            Command::Scan(a) => &a.system,
            Command::Stability(a) => &a.system,
            Command::Htf(a) => &a.system,
            Command::Realize(a) => &a.system,
            Command::VolterraCheck(a) => &a.system,
            Command::Demo { .. } => return None,
        };
        Some(&arg.system)
    }
}

/// `--config` wins over an `analysis` block in the system file; flags override both.
pub fn execute(cli: &Cli) -> CliResult<Status> {
    let cfg = match (cli.config.as_deref(), cli.command.system_path()) {
        (None, Some(sys)) => SystemSpec::load(sys)?.analysis.unwrap_or_default(),
        (path, _) => load_config(path)?,
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(&cfg, a),
        Command::Kernel(a) => commands::kernel(&cfg, a),
        Command::Scan(a) => commands::scan(&cfg, a),
        Command::Stability(a) => commands::stability(&cfg, a),
        Command::Htf(a) => commands::htf(&cfg, a),
        Command::Realize(a) => commands::realize(&cfg, a),
        Command::VolterraCheck(a) => commands::volterra_check(&cfg, a),
        Command::Demo {
            demo: Demo::Counterexample { alpha, out },
        } => commands::demo_counterexample(&cfg, *alpha, out),
    }
}

/// Parses `args` and runs the command, mapping outcomes to exit codes.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { EXIT_OK });
        }
    };
    match execute(&cli) {
        Ok(Status::Done) => ExitCode::from(EXIT_OK),
        Ok(Status::Inconclusive) => {
            if cli.strict {
                eprintln!("analysis inconclusive");
                ExitCode::from(EXIT_ANALYSIS)
            } else {
                ExitCode::from(EXIT_OK)
            }
        }
        Err(e) => {
            eprintln!("perstab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
