use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluxcirc_cli::{error_line, execute, output_dir, validate, ExperimentConfig, Status};

#[derive(Parser)]
#[command(name = "fluxcirc", version, about = "Fluxon-ring circulator simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Worker threads (default: every core, or `numerics.workers`).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: `output.directory`, then $FLUXCIRC_OUT, then ./results).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in self-checks and print one PASS/FAIL line each.
    Validate,
}

fn fail(status: Status, message: &str) -> ExitCode {
    eprintln!("{}", error_line(status, message));
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate => {
            let checks = validate::run_checks();
            print!("{}", validate::report(&checks));
            if checks.iter().all(|c| c.passed()) {
                ExitCode::SUCCESS
            } else {
                fail(Status::Numerical, "self-check failed")
            }
        }
        Command::Run { config, workers, out } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(Status::Config, &format!("{e:#}")),
            };
            if workers == Some(0) {
                return fail(Status::Config, "--workers must be at least 1");
            }
            let dir = output_dir(out.as_deref(), cfg.output.directory.as_deref());
            let report = match execute(&cfg, workers, &dir) {
                Ok(r) => r,
                Err(e) => return fail(Status::Io, &format!("{e:#}")),
            };
            for p in &report.written {
                println!("{}", p.display());
            }
            for m in &report.messages {
                eprintln!("{m}");
            }
            match report.status {
                Status::Ok => ExitCode::SUCCESS,
                s => fail(s, report.messages.first().map_or("failed", String::as_str)),
            }
        }
    }
}
