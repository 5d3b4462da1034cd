//! Command-line workflows over the `superstab` library: simulate data,
//! synthesize and verify compensators, report problem sizes, and run the
//! horizon/noise/order sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use clap::{Parser, Subcommand};

use commands::{complexity, experiment, simulate, synth, verify};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "superstab",
    version,
    about = "Superstabilizing compensators from noisy ARX data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a plant under uniform excitation and write a noisy dataset.
    Simulate(simulate::SimulateArgs),
    /// Synthesize a compensator from a dataset.
    Synth(synth::SynthArgs),
    /// Check a compensator against plants sampled from the consistency set.
    Verify(verify::VerifyArgs),
    /// Print multiplier counts and Gram sizes of both programs.
    Complexity(complexity::ComplexityArgs),
    /// Seeded sweeps over horizon, noise level and controller order.
    Experiment(experiment::ExperimentArgs),
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Verify(a) => verify::run(a),
        Command::Complexity(a) => complexity::run(a),
        Command::Experiment(a) => experiment::run(a),
    }
}
