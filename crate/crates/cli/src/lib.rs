//! Batch front end for the `qqc_core` library. Every command produces a
//! [`RunReport`] and an [`ExitCode`].

pub mod commands;
pub mod files;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qqc_core::QqcError;
use serde::Serialize;
use serde_json::Value;

pub const SEED_ENV: &str = "QQC_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    InputError = 1,
    SemanticError = 2,
    Undecided = 3,
    PreconditionFailed = 4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: ExitCode::InputError, message: message.into() }
    }

    pub fn semantic(message: impl Into<String>) -> Self {
        CliError { code: ExitCode::SemanticError, message: message.into() }
    }

    pub fn from_core(e: QqcError) -> Self {
        let code = match e {
            QqcError::Io(_) | QqcError::SdpaParse { .. } | QqcError::InvalidEpsilon(_) => ExitCode::InputError,
            QqcError::SolverUndecided(_) => ExitCode::Undecided,
            QqcError::Infeasible => ExitCode::PreconditionFailed,
            _ => ExitCode::SemanticError,
        };
        CliError { code, message: e.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Timing {
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: Value,
    pub seed: u64,
    pub status: String,
    pub results: Value,
    pub residuals: Value,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only JSON values")
    }
}

#[derive(Debug, Parser)]
#[command(name = "qqc", version, about = "Quantum query complexity of finite sets of unitaries via semidefinite feasibility")]
pub struct Cli {
    /// Seed for every randomized step; the QQC_SEED environment variable overrides it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ProblemArg {
    /// Problem instance JSON file.
    pub problem: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a problem file describes a valid instance.
    Validate(ProblemArg),
    /// Decide feasibility of one program for a fixed query count and error.
    Feasible {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Use the pairwise-overlap relaxation.
        #[arg(long)]
        relaxed: bool,
        /// Solve the dual program instead of the primal.
        #[arg(long)]
        dual: bool,
        /// Write the primal program in SDPA sparse format.
        #[arg(long, value_name = "PATH")]
        export_sdpa: Option<PathBuf>,
    },
    /// Spectral adversary lower bound.
    Adversary {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Weight matrix JSON file, or "auto" to search for one.
        #[arg(long, default_value = "auto")]
        gamma: String,
        /// Bound evaluations allowed in the automatic search.
        #[arg(long, default_value_t = 60)]
        budget: usize,
    },
    /// Smallest query count with a feasible primal.
    Estimate {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 6)]
        qmax: usize,
    },
    /// Build an algorithm from a feasible primal solution.
    Reconstruct {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Run an algorithm file on every input and check its success.
    Simulate {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, value_name = "PATH")]
        alg: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Feasible { .. } => "feasible",
            Command::Adversary { .. } => "adversary",
            Command::Estimate { .. } => "estimate",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Simulate { .. } => "simulate",
        }
    }
}

/// What a command computed, before timing and identification are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    pub status: String,
    pub results: Value,
    pub residuals: Value,
    pub code: ExitCode,
}

impl CommandOutput {
    pub fn new(status: &str, results: Value, residuals: Value, code: ExitCode) -> Self {
        CommandOutput { status: status.to_string(), results, residuals, code }
    }
}

/// Resolves the seed: a parseable `env_seed` wins over the flag.
pub fn effective_seed(flag: u64, env_seed: Option<&str>) -> Result<u64, CliError> {
    match env_seed {
        None => Ok(flag),
        Some(s) => s.trim().parse().map_err(|_| CliError::input(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
    }
}

/// Runs a parsed command line and always returns a report.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> (RunReport, ExitCode) {
    let start = Instant::now();
    let parameters = commands::parameters(&cli.command);
    let seed = effective_seed(cli.seed, env_seed);
    let out = match &seed {
        Ok(seed) => commands::dispatch(&cli.command, *seed),
        Err(e) => Err(e.clone()),
    }
    .unwrap_or_else(|e| {
        CommandOutput::new("ERROR", serde_json::json!({ "error": e.message }), Value::Null, e.code)
    });
    let report = RunReport {
        tool: "qqc".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cli.command.name().to_string(),
        parameters,
        seed: seed.unwrap_or(cli.seed),
        status: out.status,
        results: out.results,
        residuals: out.residuals,
        timing: Timing { wall_ms: start.elapsed().as_secs_f64() * 1e3 },
    };
    (report, out.code)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// text for stdout, the text for stderr and the exit code.
pub fn run<I, T>(args: I, env_seed: Option<&str>) -> (String, String, ExitCode)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => {
            let (report, code) = execute(&cli, env_seed);
            (report.to_json() + "\n", String::new(), code)
        }
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => (text, String::new(), ExitCode::Success),
                _ => (String::new(), text, ExitCode::InputError),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn environment_seed_overrides_the_flag() {
        assert_eq!(effective_seed(3, None).unwrap(), 3);
        assert_eq!(effective_seed(3, Some("17")).unwrap(), 17);
        assert_eq!(effective_seed(3, Some("x")).unwrap_err().code, ExitCode::InputError);
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from_core(QqcError::Infeasible).code, ExitCode::PreconditionFailed);
        assert_eq!(CliError::from_core(QqcError::SolverUndecided(5)).code, ExitCode::Undecided);
        assert_eq!(CliError::from_core(QqcError::EmptyRelation).code, ExitCode::SemanticError);
        assert_eq!(CliError::from_core(QqcError::InvalidEpsilon(2.0)).code, ExitCode::InputError);
    }

    #[test]
    fn unknown_flags_are_input_errors() {
        let (out, err, code) = run(["qqc", "feasible", "x.json", "--bogus"], None);
        assert!(out.is_empty() && !err.is_empty());
        assert_eq!(code, ExitCode::InputError);
    }

    #[test]
    fn help_exits_cleanly() {
        let (out, _, code) = run(["qqc", "--help"], None);
        assert!(out.contains("estimate"));
        assert_eq!(code, ExitCode::Success);
    }
}
