//! Command-line front end: selection runs, runtime benchmarks, filter-bank
//! generation and classification experiments. Every report embeds the fully
//! resolved configuration.

pub mod args;
pub mod commands;
pub mod error;
pub mod instance;
pub mod output;

use args::{Cli, Command};
pub use error::CliError;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Select(a) => commands::cmd_select(a),
        Command::Bench(a) => commands::cmd_bench(a),
        Command::Classify(a) => commands::cmd_classify(a),
        Command::GenFilters(a) => commands::cmd_gen_filters(a),
    }
}
