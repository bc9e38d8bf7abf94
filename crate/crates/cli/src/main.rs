//! `rdd`: evaluation and inspection tool for road-damage detections.

mod args;
mod error;
mod fmap;
mod inspect;
mod io;
mod render;
mod scoring;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Evaluate(a) => scoring::evaluate(a),
        Command::Postprocess(a) => scoring::postprocess(a),
        Command::Nms(a) => scoring::nms(a),
        Command::Anchors(a) => inspect::anchors(a),
        Command::Roialign(a) => inspect::roialign(a),
        Command::Transform(a) => inspect::transform(a),
        Command::Render(a) => render::render(a),
        Command::Validate(a) => scoring::validate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };

    let result = match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(format!("cannot start worker pool: {e}")))
            .and_then(|pool| pool.install(|| run(cli.command))),
        None => run(cli.command),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rdd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
