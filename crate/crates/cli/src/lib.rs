//! Command-line front end for the scorelab sampling laboratory.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical-domain error,
//! 3 total divergence, 4 verification failure.

pub mod args;
pub mod commands;
pub mod oraclespec;
pub mod sweep;

use clap::Parser;
use std::ffi::OsString;

/// A command failure carrying the process exit code and a message for stderr.
#[derive(Debug, Clone)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: String) -> Self {
        Failure { code, message }
    }

    /// Appends a usage line to usage-class (exit 1) failures.
    pub fn with_usage(mut self, usage: &str) -> Self {
        if self.code == 1 && !self.message.contains("usage:") {
            self.message.push('\n');
            self.message.push_str(usage);
        }
        self
    }
}

impl From<scorelab::Error> for Failure {
    fn from(e: scorelab::Error) -> Self {
        let code = match &e {
            scorelab::Error::Parse(_) | scorelab::Error::NonAffine(_) => 1,
            _ => 2,
        };
        Failure::new(code, e.to_string())
    }
}

/// Parses `argv` and runs the selected command, returning the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.cmd {
        args::Cmd::Sample(a) => commands::cmd_sample(a),
        args::Cmd::Diagnose(a) => commands::cmd_diagnose(a),
        args::Cmd::Verify(a) => commands::cmd_verify(a),
        args::Cmd::Sweep(a) => commands::cmd_sweep(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
