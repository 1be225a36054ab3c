//! Library side of the `avsup` command: option parsing, scenario loading,
//! CSV export and SVG plots. `main.rs` only maps results to exit codes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod export;
pub mod options;
pub mod plots;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use avsup_core::backend::{build_backend, record_transcript, BackendError};
use avsup_core::sim::{reference_scenario, run, Scenario, ScenarioError, SimError, SimLog};
use avsup_core::sweep::{sweep_periods, PeriodOutcome};

pub use options::{parse_args, RunOptions, ScenarioSource, UsageError};

/// Process exit statuses.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const COLLISION: i32 = 3;
    pub const BACKEND: i32 = 4;
}

pub const CSV_FILE: &str = "run.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error("invalid scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("cannot parse scenario {path}: {source}")]
    ScenarioFormat {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("run aborted at t = {time:.2} s: {source}")]
    Aborted {
        time: f64,
        #[source]
        source: SimError,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Scenario(_) | CliError::ScenarioFormat { .. } => exit_code::USAGE,
            CliError::Io { .. } | CliError::Backend(BackendError::Io(_)) => exit_code::IO,
            CliError::Backend(_) => exit_code::BACKEND,
            CliError::Aborted { source, .. } => match source {
                SimError::Scenario(_) => exit_code::USAGE,
                _ => exit_code::BACKEND,
            },
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    serde_json::from_str(&text).map_err(|source| CliError::ScenarioFormat {
        path: path.to_path_buf(),
        source,
    })
}

/// Scenario from the chosen source with command-line overrides applied.
pub fn resolve_scenario(opts: &RunOptions) -> Result<Scenario, CliError> {
    let mut s = match &opts.source {
        ScenarioSource::Reference => reference_scenario(options::DEFAULT_PERIOD),
        ScenarioSource::File(p) => load_scenario(p)?,
    };
    if let Some(p) = opts.decision_period {
        s.decision_period = p;
    }
    if let Some(dt) = opts.dt {
        s.dt = dt;
    }
    if let Some(d) = opts.duration {
        s.duration = d;
    }
    s.validate()?;
    Ok(s)
}

#[derive(Debug)]
pub enum Outcome {
    Run {
        log: Box<SimLog>,
        files: Vec<PathBuf>,
    },
    Sweep {
        outcomes: Vec<PeriodOutcome>,
        file: PathBuf,
    },
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Run { log, .. } if log.summary.collided => exit_code::COLLISION,
            _ => exit_code::OK,
        }
    }
}

fn write_run_files(log: &SimLog, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let dir = &opts.output_directory;
    let mut files = Vec::new();

    let csv = dir.join(CSV_FILE);
    export::export_csv(log, &csv).map_err(io_err(format!("writing {}", csv.display())))?;
    files.push(csv);

    let summary = dir.join(SUMMARY_FILE);
    export::export_summary(log, &summary).map_err(io_err(format!("writing {}", summary.display())))?;
    files.push(summary);

    if opts.record_transcript {
        let path = dir.join(TRANSCRIPT_FILE);
        record_transcript(&log.transcript, &path).map_err(|e| CliError::Io {
            context: format!("writing {}", path.display()),
            source: io::Error::other(e.to_string()),
        })?;
        files.push(path);
    }
    if opts.emit_plots {
        files.extend(plots::emit_plots(log, dir).map_err(io_err("writing plots"))?);
    }
    Ok(files)
}

// Same float spelling as the per-step CSV ("2.0", not "2").
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_sweep_csv(outcomes: &[PeriodOutcome], path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io::Error::other)?;
    w.write_record([
        "decision_period",
        "collided",
        "min_speed",
        "final_speed",
        "min_distance",
        "error",
    ])
    .map_err(io::Error::other)?;
    for o in outcomes {
        let rec = match &o.result {
            Ok(s) => vec![
                num(o.decision_period),
                u8::from(s.collided).to_string(),
                num(s.min_speed),
                num(s.final_speed),
                num(s.min_distance),
                String::new(),
            ],
            Err(e) => vec![
                num(o.decision_period),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                e.to_string(),
            ],
        };
        w.write_record(&rec).map_err(io::Error::other)?;
    }
    w.flush()
}

/// Runs what the options ask for and writes every output file. A run that
/// aborts still leaves its partial CSV (and transcript, if requested).
pub fn execute(opts: &RunOptions) -> Result<Outcome, CliError> {
    let scenario = resolve_scenario(opts)?;
    let dir = &opts.output_directory;
    fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;

    if let Some(periods) = &opts.sweep_periods {
        let outcomes = sweep_periods(&scenario, periods);
        let file = dir.join(SWEEP_FILE);
        write_sweep_csv(&outcomes, &file).map_err(io_err(format!("writing {}", file.display())))?;
        return Ok(Outcome::Sweep { outcomes, file });
    }

    let mut backend = build_backend(&opts.backend)?;
    match run(&scenario, backend.as_mut()) {
        Ok(log) => {
            let files = write_run_files(&log, opts)?;
            Ok(Outcome::Run {
                log: Box::new(log),
                files,
            })
        }
        Err(abort) => {
            if let Err(e) = write_run_files(&abort.log, opts) {
                log::error!("could not save partial log: {e}");
            }
            Err(CliError::Aborted {
                time: abort.log.summary.end_time,
                source: abort.error,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(args: &str, out: &Path) -> RunOptions {
        let argv: Vec<String> = std::iter::once("avsup".to_string())
            .chain(args.split_whitespace().map(str::to_string))
            .chain(["--out".to_string(), out.display().to_string()])
            .collect();
        parse_args(argv).unwrap()
    }

    #[test]
    fn clean_run_exit_zero() {
        let dir = tempfile::tempdir().unwrap();
        let out = execute(&opts(
            "--paper-scenario --period 0.5 --plots --record-transcript",
            dir.path(),
        ))
        .unwrap();
        assert_eq!(out.exit_code(), exit_code::OK);
        for f in [
            CSV_FILE,
            SUMMARY_FILE,
            TRANSCRIPT_FILE,
            "speed.svg",
            "lateral.svg",
            "topdown.svg",
        ] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn collision_run_exit_three() {
        let dir = tempfile::tempdir().unwrap();
        let out = execute(&opts("--paper-scenario --period 2", dir.path())).unwrap();
        assert_eq!(out.exit_code(), exit_code::COLLISION);
    }

    #[test]
    fn scenario_file_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        fs::write(&path, serde_json::to_string(&reference_scenario(1.0)).unwrap()).unwrap();
        let o = opts(&format!("--scenario {} --duration 3", path.display()), dir.path());
        let s = resolve_scenario(&o).unwrap();
        assert_eq!(s.decision_period, 1.0);
        assert_eq!(s.duration, 3.0);
    }

    #[test]
    fn file_period_must_fit_file_dt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        let mut s = reference_scenario(0.5);
        s.dt = 0.2;
        fs::write(&path, serde_json::to_string(&s).unwrap()).unwrap();
        let err = resolve_scenario(&opts(&format!("--scenario {}", path.display()), dir.path())).unwrap_err();
        assert_eq!(err.exit_code(), exit_code::USAGE);
    }

    #[test]
    fn missing_scenario_file_is_io() {
        let dir = tempfile::tempdir().unwrap();
        let err = resolve_scenario(&opts("--scenario /nonexistent/s.json", dir.path())).unwrap_err();
        assert_eq!(err.exit_code(), exit_code::IO);
    }

    #[test]
    fn missing_key_is_backend_failure() {
        let dir = tempfile::tempdir().unwrap();
        let err = execute(&opts(
            "--paper-scenario --backend llm --api-key-env AVSUP_CLI_TEST_UNSET_KEY",
            dir.path(),
        ))
        .unwrap_err();
        assert!(matches!(err, CliError::Backend(BackendError::MissingApiKey { .. })));
        assert_eq!(err.exit_code(), exit_code::BACKEND);
    }

    #[test]
    fn sweep_writes_table() {
        let dir = tempfile::tempdir().unwrap();
        let out = execute(&opts("--paper-scenario --sweep-periods 0.5,2", dir.path())).unwrap();
        let Outcome::Sweep { outcomes, file } = out else {
            panic!("expected a sweep")
        };
        assert_eq!(outcomes.len(), 2);
        let text = fs::read_to_string(file).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("2.0,1,"));
    }
}
