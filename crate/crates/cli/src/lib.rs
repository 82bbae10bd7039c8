//! The `persuade` command line: solvers, evaluation, synthesis and
//! verification over JSON instances and mechanism trees.
//!
//! Everything goes through [`run`], which takes the argument vector and the
//! three standard streams and returns the process exit code.

mod commands;
mod input;
mod output;
mod verify;

use std::io::{Read, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};
use persuade_core::model::TIE_TOLERANCE;
use thiserror::Error;

pub use output::round_significant;

/// Exit code on success.
pub const EXIT_OK: i32 = 0;
/// Exit code when an instance, mechanism or verification check is invalid.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code when an LP solve or enumeration fails.
pub const EXIT_SOLVER: i32 = 2;
/// Exit code for bad arguments, unreadable inputs and unknown ids.
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "persuade", version, about = "Optimal persuasion mechanisms against credible agents")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct CliConfig {
    /// Slack allowed by verification checks and value comparisons.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Tie and probability tolerance used when simulating the agent.
    #[arg(long, global = true, default_value_t = TIE_TOLERANCE)]
    pub tie_tolerance: f64,
    /// Penalty M for the parameterized examples.
    #[arg(long, global = true)]
    pub big_m: Option<f64>,
    /// The ex3 delta.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// The ex5 size.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Seed for the `random` instance and mechanism.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Enumeration cap for imitation mappings and agent profiles.
    #[arg(long, global = true)]
    pub cap: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Agent type label (for `best-response`).
    #[arg(long = "type", global = true)]
    pub type_label: Option<String>,
    /// Instance source, overriding any instance embedded in other inputs.
    #[arg(long, global = true)]
    pub instance: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SolveKind {
    Noncredible,
    Ic,
    Enses,
    EsBruteforce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExampleKind {
    Instance,
    Mechanism,
}

/// Inputs are file paths, `-` for stdin, or example ids such as `ex1`,
/// `ex4_pie` and `random`. Missing inputs are read from stdin.
#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve for an optimal mechanism.
    Solve {
        #[arg(value_enum)]
        kind: SolveKind,
        instance: Option<String>,
        /// Write the LP in CPLEX-LP text format to this path.
        #[arg(long)]
        lp_dump: Option<String>,
    },
    /// Principal value of a mechanism under the agent's credible best responses.
    Eval {
        #[arg(num_args = 0..=2)]
        inputs: Vec<String>,
    },
    /// One type's optimal plan through a mechanism.
    BestResponse {
        #[arg(num_args = 0..=2)]
        inputs: Vec<String>,
    },
    /// Build the gadget instance for a graph (file, `-`, or a name like `C5`).
    ReduceMis { graph: Option<String> },
    /// Print a built-in instance or mechanism.
    Example {
        #[arg(value_enum)]
        kind: ExampleKind,
        id: String,
    },
    /// Run every available check on a mechanism or a solver output.
    Verify {
        #[arg(num_args = 0..=2)]
        inputs: Vec<String>,
    },
    /// Re-emit a mechanism, as DOT with `--format dot`.
    Export {
        #[arg(num_args = 0..=2)]
        inputs: Vec<String>,
    },
}

impl CliConfig {
    fn check(&self) -> Result<(), CliError> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(CliError::Usage("--tolerance must be positive".into()));
        }
        if self.tie_tolerance.is_nan() || self.tie_tolerance <= 0.0 {
            return Err(CliError::Usage("--tie-tolerance must be positive".into()));
        }
        if self.cap == Some(0) {
            return Err(CliError::Usage("--cap must be positive".into()));
        }
        Ok(())
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = cli
        .config
        .check()
        .and_then(|()| commands::dispatch(&cli, &mut input::Stdin::new(stdin)))
        .and_then(|o| output::render(&o, cli.config.format).map(|text| (o, text)));
    match result {
        Ok((o, text)) => {
            if out.write_all(text.as_bytes()).is_err() {
                return EXIT_USAGE;
            }
            if let Some(note) = &o.diagnostic {
                let _ = writeln!(err, "persuade: {note}");
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "persuade: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str], stdin: &str) -> (i32, String, String) {
        let mut input = stdin.as_bytes();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("persuade").chain(args.iter().copied());
        let code = run(argv, &mut input, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn in_process_pipeline() {
        let (code, inst, _) = call(&["example", "instance", "ex1"], "");
        assert_eq!(code, EXIT_OK);
        let (code, out, err) = call(&["solve", "noncredible", "-"], &inst);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(out.contains("\"value\": 0.5"), "{out}");
    }

    #[test]
    fn empty_stdin_is_bad_usage() {
        let (code, _, err) = call(&["eval"], "");
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("stdin"));
    }
}
