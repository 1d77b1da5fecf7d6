//! Command-line front end of the `varsphere` library: CSV ingestion through
//! TOML manifests, and the `cluster`, `average`, `simulate` and `mds` commands.

pub mod args;
pub mod commands;
pub mod error;
pub mod ingest;
pub mod manifest;
pub mod output;

pub use args::{Cli, Command};
pub use commands::Outcome;
pub use error::{CliError, Result};

/// Runs one parsed command.
pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Cluster(a) => commands::cluster::run(a),
        Command::Average(a) => commands::average::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Mds(a) => commands::mds::run(a),
    }
}
