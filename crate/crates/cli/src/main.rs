mod args;
mod commands;
mod output;

use std::fmt;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use zsr_core::Error;

use args::{Cli, Command};

/// Anything that ends a command early, mapped onto the documented exit codes.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
}

impl Failure {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Failure::Core(Error::Io { path: path.to_path_buf(), source })
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Core(Error::InvalidArgument(_)) => 2,
            Failure::Core(Error::Io { .. } | Error::Format { .. } | Error::Corrupt { .. }) => 3,
            Failure::Core(Error::DimMismatch { .. } | Error::Validation(_)) => 4,
            Failure::Core(Error::Numeric(_)) => 5,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;
    let seed = cli.seed;
    match cli.command {
        Command::BuildIndex(a) => commands::build_index(&a, seed),
        Command::Retrieve(a) => commands::retrieve(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Ablate(a) => commands::ablate(&a),
        Command::Sensitivity(a) => commands::sensitivity(&a),
        Command::Fewshot(a) => commands::fewshot(&a, seed),
        Command::Classify(a) => commands::classify(&a),
        Command::ExportCsv(a) => commands::export_csv(&a),
        Command::Validate(a) => commands::validate(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
