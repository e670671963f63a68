mod commands;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "pathtele", version)]
#[command(about = "Teleportation with superposed processes: sweeps, figure data and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PathChannel {
    K,
    L,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Plus,
    Minus,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum UnitaryArg {
    Hadamard,
    Matched,
}

#[derive(clap::Args, Clone, Debug)]
pub struct OutputArgs {
    /// Output file; stdout when omitted or "-"
    #[arg(long, short)]
    output: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Branch-averaged fidelities over the (X, y) plane for one path channel
    SweepXy {
        #[arg(long, value_enum, default_value = "k")]
        channel: PathChannel,

        /// Grid spacing for both X and y; must divide 1
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,

        /// Add Monte Carlo columns with this many draws per point
        #[arg(long)]
        samples: Option<usize>,

        #[arg(long, default_value_t = commands::DEFAULT_SEED)]
        seed: u64,

        #[command(flatten)]
        out: OutputArgs,
    },
    /// Advantage verdict (K, L or none) and margin over the (X, y) plane
    Regions {
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,

        #[command(flatten)]
        out: OutputArgs,
    },
    /// Werner-resource fidelities against the mixing probability
    Werner {
        /// Spacing in p; must divide 1
        #[arg(long, default_value_t = 0.01)]
        resolution: f64,

        /// Comma-separated interference values
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "-1,-0.5,0,0.5,1"
        )]
        x_values: Vec<f64>,

        #[arg(long, value_enum, default_value = "both")]
        branch: BranchArg,

        #[command(flatten)]
        out: OutputArgs,
    },
    /// Advantage against control coherence and phase
    Coherence {
        #[arg(long, value_enum, default_value = "hadamard")]
        unitary: UnitaryArg,

        /// Spacing in coherence C; must divide 1
        #[arg(long, default_value_t = 0.05)]
        resolution: f64,

        /// Number of control phases in [0, 2π); defaults to 32 for the
        /// Hadamard surface and 1 for the matched curve
        #[arg(long)]
        phi_points: Option<usize>,

        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the acceptance suite; exit status 1 if any criterion fails
    Verify {
        #[arg(long, default_value_t = commands::DEFAULT_SEED)]
        seed: u64,

        /// Monte Carlo draws per trial
        #[arg(long, default_value_t = 10_000)]
        samples: usize,

        /// Monte Carlo trials per configuration
        #[arg(long, default_value_t = 100)]
        trials: usize,

        /// Multiply every tolerance by this factor
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,

        /// Report file
        #[arg(long, short)]
        output: Option<PathBuf>,

        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Simulation(pathtele_core::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Simulation(e) => write!(f, "simulation error: {e}"),
        }
    }
}

impl From<pathtele_core::Error> for CliError {
    fn from(e: pathtele_core::Error) -> Self {
        match e {
            pathtele_core::Error::InvalidParameter(m) | pathtele_core::Error::InvalidConfig(m) => {
                CliError::Usage(m)
            }
            other => CliError::Simulation(other),
        }
    }
}

pub fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            let f = File::create(p)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn dispatch(cmd: Command) -> Result<bool, CliError> {
    match cmd {
        Command::SweepXy {
            channel,
            resolution,
            samples,
            seed,
            out,
        } => commands::sweep_xy(channel, resolution, samples, seed, &out).map(|_| true),
        Command::Regions { resolution, out } => commands::regions(resolution, &out).map(|_| true),
        Command::Werner {
            resolution,
            x_values,
            branch,
            out,
        } => commands::werner(resolution, &x_values, branch, &out).map(|_| true),
        Command::Coherence {
            unitary,
            resolution,
            phi_points,
            out,
        } => commands::coherence(unitary, resolution, phi_points, &out).map(|_| true),
        Command::Verify {
            seed,
            samples,
            trials,
            tolerance_scale,
            output,
            format,
        } => commands::verify(seed, samples, trials, tolerance_scale, &output, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("pathtele: {e}");
            ExitCode::from(2)
        }
    }
}
