//! `transportctl <command> --config file.json [--out dir] [--workers N]`

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Bands,
    Qnorm,
    Evolve,
    Exponents,
    BallisticCheck,
    DerivativeCheck,
    CorollaryProbe,
    Localization,
    XyVelocity,
    XyVerify,
    Lyapunov,
    Thouless,
    DtCriterion,
    Stability,
    Generic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Qnorm => "qnorm",
            Command::Evolve => "evolve",
            Command::Exponents => "exponents",
            Command::BallisticCheck => "ballistic-check",
            Command::DerivativeCheck => "derivative-check",
            Command::CorollaryProbe => "corollary-probe",
            Command::Localization => "localization",
            Command::XyVelocity => "xy-velocity",
            Command::XyVerify => "xy-verify",
            Command::Lyapunov => "lyapunov",
            Command::Thouless => "thouless",
            Command::DtCriterion => "dt-criterion",
            Command::Stability => "stability",
            Command::Generic => "generic",
        }
    }
}

/// Transport experiments for periodic block Jacobi matrices, XY chains and
/// limit-periodic Schrodinger operators.
#[derive(Debug, Parser)]
#[command(name = "transportctl", version)]
struct Args {
    command: Command,
    /// JSON configuration file, `-` for stdin.
    #[arg(long)]
    config: PathBuf,
    /// Directory for the output files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "TRANSPORTCTL_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Library(jacobi_transport::Error),
    Tolerance(String),
    Io(String),
}

impl From<jacobi_transport::Error> for CliError {
    fn from(e: jacobi_transport::Error) -> Self {
        CliError::Library(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Library(e) if e.is_validation() => 2,
            _ => 3,
        }
    }

    fn report(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Config(m) => ("ConfigInvalid", m.clone()),
            CliError::Library(e) => (e.kind(), e.to_string()),
            CliError::Tolerance(m) => ("ToleranceNotMet", m.clone()),
            CliError::Io(m) => ("Io", m.clone()),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() })
    }
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin()).map_err(|e| CliError::Config(format!("stdin: {e}")))
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    let text = read_config(&args.config)?;
    let outcome = commands::run(args.command, &text)?;
    output::emit(&outcome.artifacts, args.out.as_deref()).map_err(|e| CliError::Io(e.to_string()))?;
    match outcome.failure {
        Some(msg) => Err(CliError::Tolerance(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
