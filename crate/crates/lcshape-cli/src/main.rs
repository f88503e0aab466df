//! `lcshape`: batch analysis of sample-wise learning curves.
//!
//! Subcommands ingest per-repeat observation files (JSONL or CSV), run the
//! library's detectors, fitters, crossing statistics, and Successive
//! Halving simulations, and emit plot-ready CSV tables plus a run manifest
//! into the output directory. Diagnostics go to stderr; data only ever
//! goes to files or stdout.
//!
//! Exit codes: 0 success, 1 internal error, 2 input or schema error,
//! 3 empty input or empty result.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcshape::curves::{FileFormat, Metric, Split};
use lcshape::Error;

#[derive(Parser)]
#[command(name = "lcshape", version, about = "Learning-curve shape analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the curve-consuming commands. Every default is shown in
/// `--help`, so the manifest digest over the effective values is
/// explainable.
#[derive(Args, Debug, Clone)]
struct CommonOpts {
    /// Observation file to analyze.
    #[arg(long)]
    input: std::path::PathBuf,

    /// Input file format.
    #[arg(long, default_value = "jsonl")]
    format: FileFormatArg,

    /// Metric to select from the input.
    #[arg(long, default_value = "error_rate")]
    metric: MetricArg,

    /// Split to select from the input (`sh` always uses both).
    #[arg(long, default_value = "validation")]
    split: SplitArg,

    /// Output directory; created if missing.
    #[arg(long)]
    out: std::path::PathBuf,

    /// Worker threads for per-curve analysis (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

macro_rules! arg_enum_wrapper {
    ($wrapper:ident, $inner:ty) => {
        #[derive(Debug, Clone, Copy)]
        struct $wrapper($inner);

        impl std::str::FromStr for $wrapper {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                s.parse().map($wrapper)
            }
        }

        impl std::fmt::Display for $wrapper {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

arg_enum_wrapper!(MetricArg, Metric);
arg_enum_wrapper!(SplitArg, Split);

#[derive(Debug, Clone, Copy)]
struct FileFormatArg(FileFormat);

impl std::str::FromStr for FileFormatArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.parse().map(FileFormatArg)
    }
}

impl std::fmt::Display for FileFormatArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            FileFormat::Jsonl => write!(f, "jsonl"),
            FileFormat::Csv => write!(f, "csv"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect flat, non-monotone, non-convex, peaking, and dipping curves.
    Detect(commands::detect::DetectArgs),
    /// Fit parametric models and stratify MSE by curve shape.
    Fit(commands::fit::FitArgs),
    /// Pairwise crossing-probability matrices over (dataset, fold) cells.
    Crossing(commands::crossing::CrossingArgs),
    /// Simulate Successive Halving over a config grid.
    Sh(commands::sh::ShArgs),
    /// Generate synthetic fixture curves from a spec file.
    Synth(commands::synth::SynthArgs),
    /// Merge detect/fit/crossing/sh outputs into one summary table.
    Report(commands::report::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect(args) => commands::detect::run(args),
        Command::Fit(args) => commands::fit::run(args),
        Command::Crossing(args) => commands::crossing::run(args),
        Command::Sh(args) => commands::sh::run(args),
        Command::Synth(args) => commands::synth::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("lcshape: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Empty input gets its own code so batch pipelines can tell "nothing to
/// do" apart from broken inputs.
pub(crate) const EXIT_INTERNAL: u8 = 1;
pub(crate) const EXIT_INPUT: u8 = 2;
pub(crate) const EXIT_EMPTY: u8 = 3;

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::EmptyCurve | Error::EmptyCandidates => EXIT_EMPTY,
        Error::InvalidArgument(msg) if msg.starts_with("empty input") => EXIT_EMPTY,
        Error::Parse { .. }
        | Error::Schema { .. }
        | Error::DuplicateObservation { .. }
        | Error::MismatchedGroup(_)
        | Error::IncompleteGroup(_)
        | Error::ScheduleMismatch(_)
        | Error::InvalidSpec(_)
        | Error::InvalidArgument(_)
        | Error::Csv(_)
        | Error::Json(_) => EXIT_INPUT,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_INPUT,
        Error::Cell { source, .. } => exit_code_for(source),
        _ => EXIT_INTERNAL,
    }
}

pub(crate) fn empty_input_error(what: &str) -> Error {
    Error::InvalidArgument(format!("empty input: {what}"))
}

/// Runs `f` inside a rayon pool with the requested thread count
/// (0 = library default).
pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_map_error_classes() {
        assert_eq!(exit_code_for(&Error::EmptyCurve), EXIT_EMPTY);
        assert_eq!(exit_code_for(&empty_input_error("nothing")), EXIT_EMPTY);
        assert_eq!(
            exit_code_for(&Error::Parse {
                path: "x".into(),
                line: 3,
                msg: "bad".into()
            }),
            EXIT_INPUT
        );
        assert_eq!(
            exit_code_for(&Error::Io(std::io::Error::from(
                std::io::ErrorKind::NotFound
            ))),
            EXIT_INPUT
        );
        assert_eq!(
            exit_code_for(&Error::Io(std::io::Error::other("disk on fire"))),
            EXIT_INTERNAL
        );
        // Cell wrappers inherit the inner classification.
        assert_eq!(
            exit_code_for(&Error::Cell {
                cell: "d#0".into(),
                source: Box::new(Error::ScheduleMismatch("x".into()))
            }),
            EXIT_INPUT
        );
    }
}
