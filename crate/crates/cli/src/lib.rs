//! Command-line front end: configuration files, experiment runners and CSV output.

pub mod config;
pub mod experiments;
pub mod table;
pub mod validate;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;

pub use config::ExperimentConfig;
pub use experiments::{Outcome, RunError};
pub use table::ResultTable;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FLUXCIRC_OUT";
pub const DEFAULT_OUT_DIR: &str = "results";

/// `--out`, then the configuration, then the environment, then `results/`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Config,
    Numerical,
    Io,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Io => 1,
            Status::Config => 2,
            Status::Numerical => 3,
        }
    }
}

/// Result of [`execute`]: the files written and the failures met on the way.
#[derive(Debug)]
pub struct Report {
    pub status: Status,
    pub written: Vec<PathBuf>,
    pub messages: Vec<String>,
}

/// Runs a loaded configuration and writes one CSV per table into `out`.
/// Finished points are written even when others failed.
pub fn execute(cfg: &ExperimentConfig, workers: Option<usize>, out: &Path) -> anyhow::Result<Report> {
    let start = Instant::now();
    let (outcome, status, mut messages) = match experiments::run(cfg, workers) {
        Ok(o) => {
            let status = if o.failures.is_empty() { Status::Ok } else { Status::Numerical };
            let msgs = o.failures.clone();
            (o, status, msgs)
        }
        Err(e @ RunError::Config(_)) => (Outcome::default(), Status::Config, vec![e.to_string()]),
        Err(e @ RunError::Numerical(_)) => (Outcome::default(), Status::Numerical, vec![e.to_string()]),
    };
    let wall = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut written = Vec::new();
    for mut t in outcome.tables {
        t.meta("version", env!("CARGO_PKG_VERSION"));
        t.meta("wall_time_s", format!("{wall:.3}"));
        t.meta("failed_points", outcome.failures.len());
        t.meta("config", cfg.to_toml());
        let path = out.join(format!("{}.csv", t.name));
        t.emit_csv(&path, cfg.output.precision)?;
        written.push(path);
    }
    if status == Status::Ok && written.is_empty() {
        messages.push("experiment produced no tables".into());
    }
    Ok(Report {
        status,
        written,
        messages,
    })
}

/// One line a script can parse: `fluxcirc-error kind=<kind> code=<n> message=<json string>`.
pub fn error_line(status: Status, message: &str) -> String {
    let kind = match status {
        Status::Ok => "none",
        Status::Config => "config",
        Status::Numerical => "numerical",
        Status::Io => "io",
    };
    format!("fluxcirc-error kind={kind} code={} message={message:?}", status.code())
}
