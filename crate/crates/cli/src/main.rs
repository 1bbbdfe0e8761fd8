//! `lanechoice`: solve and design two-lane tolled freeway scenarios from
//! JSON scenario files.
//!
//! Exit codes: 0 success, 1 solver or verification failure, 2 invalid input
//! (malformed file, unknown key, violated parameter constraint, bad flag),
//! 3 output could not be written.

mod commands;
mod format;
mod scenario_file;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "lanechoice", version, about = "Lane-choice equilibria and toll design for a two-lane tolled freeway")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Emit machine-readable JSON instead of the text report
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the main output (report or CSV) to this path
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Spacing of the design or misbehavior grid
    #[arg(long, global = true, value_name = "STEP")]
    pub grid_step: Option<f64>,
    /// Tolerance for equilibrium verification
    #[arg(long, global = true, value_name = "TOL")]
    pub tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the lane-choice equilibrium of a scenario
    Solve {
        scenario: PathBuf,
        /// Check the flows in this JSON file (a flow or a `solve --json` report)
        #[arg(long, value_name = "FLOW_JSON")]
        verify: Option<PathBuf>,
    },
    /// Sweep the uniform toll and pick the best one
    DesignToll {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Objective::Worst)]
        objective: Objective,
    },
    /// Sweep the high-occupancy threshold under the 1/n carpool model
    DesignThreshold {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Objective::Worst)]
        objective: Objective,
        #[arg(long, default_value_t = 2.0)]
        n_min: f64,
        #[arg(long, default_value_t = 4.0)]
        n_max: f64,
    },
    /// Compare the toll framework with HOV lanes and dedicated AV lanes
    ComparePolicy {
        scenario: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Policy::Toll, Policy::Hovl, Policy::Dla])]
        policies: Vec<Policy>,
        /// Largest toll on the sweep grid
        #[arg(long)]
        tau_max: Option<f64>,
    },
    /// Turn a uniform toll into per-class tolls that pin its best-case equilibrium
    Differentiate {
        scenario: PathBuf,
        /// Uniform toll to start from; defaults to the scenario's toll
        #[arg(long)]
        tau_star: Option<f64>,
        #[arg(long)]
        tau_minus: Option<f64>,
        #[arg(long)]
        tau_plus: Option<f64>,
    },
    /// Sweep the misbehaving proportion of one class and map resilient regions
    Resilience {
        scenario: PathBuf,
        #[arg(long, default_value = "HV_LO")]
        class: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Objective {
    Best,
    Worst,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Policy {
    Toll,
    Hovl,
    Dla,
}

#[derive(Debug)]
pub enum CliError {
    /// Malformed or invalid input; exit code 2.
    Input(String),
    /// Output could not be written; exit code 3.
    Output(String),
    /// Anything else; exit code 1.
    Run(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Output(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Output(m) => f.write_str(m),
            CliError::Run(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<lanechoice::Error> for CliError {
    fn from(e: lanechoice::Error) -> Self {
        match e {
            lanechoice::Error::InvalidParameter { .. } => CliError::Input(e.to_string()),
            e => CliError::Run(e.into()),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
