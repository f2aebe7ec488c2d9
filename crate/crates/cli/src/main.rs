//! `mmpde-mesh`: mesh smoothing and adaptation by MMPDE gradient flows.
//!
//! Exit status: 0 when every checked property held, 1 on a property
//! violation, 2 on usage or I/O errors.

mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::Settings;

#[derive(Parser, Debug)]
#[command(name = "mmpde-mesh", version, about = "Simplicial mesh smoothing and adaptation by moving-mesh gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Smooth a mesh with M = I.
    Smooth,
    /// Adapt a mesh to the metric of a scalar field.
    Adapt,
    /// Print quality statistics of a mesh.
    Stats,
    /// Sample the altitude/diameter lemmas and report the volume floors.
    Verify,
    /// Compare assembled velocities with finite-difference gradients.
    Gradcheck,
    /// Fit |K|_min against the element count over several resolutions.
    Study,
}

/// Whether all checks of a command held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Violation,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let run = cli.settings.merged().and_then(|s| match cli.command {
        Command::Smooth => commands::smooth(&s),
        Command::Adapt => commands::adapt(&s),
        Command::Stats => commands::stats(&s),
        Command::Verify => commands::verify(&s),
        Command::Gradcheck => commands::gradcheck(&s),
        Command::Study => commands::study(&s),
    });
    match run {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
