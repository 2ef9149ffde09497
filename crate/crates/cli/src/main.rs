use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod failure;
mod io;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bounds(a) => commands::bounds::run(a),
        Command::Interim(a) => commands::interim::run(a),
        Command::Final(a) => commands::finalize::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::FitSpline(a) => commands::fit_spline::run(a),
        Command::Calibrate(a) => commands::calibrate::run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
