//! Command-line front end: `simulate`, `filter`, `sample` and `diagnose`.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! degeneracy, 4 file system errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use clap::Parser;

pub use commands::Cli;
pub use config::RunConfig;
pub use error::CliError;

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Errors are reported on stderr.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { error::EXIT_VALIDATION } else { error::EXIT_OK };
        }
    };
    match commands::execute(&cli, argv) {
        Ok(()) => error::EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
