//! Command-line flags and their validation.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgGroup, Parser};
use thiserror::Error;

use avsup_core::backend::{BackendConfig, BackendKind, DEFAULT_API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_MODEL};
use avsup_core::sim::steps_per_period;

pub const DEFAULT_PERIOD: f64 = 0.5;

#[derive(Debug, Parser)]
#[command(
    name = "avsup",
    version,
    about = "Simulate an AV supervisory monitor around jaywalking pedestrians",
    group(ArgGroup::new("source").required(true).args(["paper_scenario", "scenario"]))
)]
pub struct Cli {
    /// Run the built-in two-pedestrian crossing scenario.
    #[arg(long)]
    pub paper_scenario: bool,

    /// Load a scenario from a JSON file.
    #[arg(long, value_name = "PATH")]
    pub scenario: Option<PathBuf>,

    /// Decision source.
    #[arg(long, default_value = "oracle", value_parser = ["oracle", "llm", "replay"])]
    pub backend: String,

    /// Seconds between supervisory decisions [default: 0.5, or the scenario file's value].
    #[arg(long, value_name = "SECONDS")]
    pub period: Option<f64>,

    /// Integration step in seconds [default: 0.01, or the scenario file's value].
    #[arg(long, value_name = "SECONDS")]
    pub dt: Option<f64>,

    /// Simulated duration in seconds [default: 15, or the scenario file's value].
    #[arg(long, value_name = "SECONDS")]
    pub duration: Option<f64>,

    /// Output directory for CSV, plots and transcripts.
    #[arg(long, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,

    /// Write speed, lateral and top-down SVG plots.
    #[arg(long)]
    pub plots: bool,

    /// Write every question and reply to transcript.jsonl in the output directory.
    #[arg(long)]
    pub record_transcript: bool,

    /// Transcript to play back (replay backend).
    #[arg(long, value_name = "PATH")]
    pub transcript: Option<PathBuf>,

    /// Hosted model identifier (llm backend).
    #[arg(long, default_value = DEFAULT_MODEL)]
    pub model: String,

    /// Environment variable holding the API key (llm backend).
    #[arg(long, default_value = DEFAULT_API_KEY_ENV, value_name = "VAR")]
    pub api_key_env: String,

    /// API base URL (llm backend).
    #[arg(long, default_value = DEFAULT_ENDPOINT, value_name = "URL")]
    pub endpoint: String,

    /// Minimum seconds between outbound requests (llm backend).
    #[arg(long, default_value_t = 4.0, value_name = "SECONDS")]
    pub min_interval: f64,

    /// Per-request timeout in seconds (llm backend).
    #[arg(long, default_value_t = 30.0, value_name = "SECONDS")]
    pub timeout: f64,

    /// Instead of a single run, sweep these decision periods with the oracle
    /// backend and write sweep.csv.
    #[arg(long, value_delimiter = ',', value_name = "P1,P2,...")]
    pub sweep_periods: Option<Vec<f64>>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Reference,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub source: ScenarioSource,
    pub backend: BackendConfig,
    pub decision_period: Option<f64>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub output_directory: PathBuf,
    pub emit_plots: bool,
    pub record_transcript: bool,
    pub sweep_periods: Option<Vec<f64>>,
    pub verbosity: u8,
}

#[derive(Debug, Error)]
pub enum UsageError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("--{flag} must be a positive number, got {value}")]
    NotPositive { flag: &'static str, value: f64 },
    #[error("--period {period} is not an integer multiple of --dt {dt}")]
    PeriodNotMultiple { period: f64, dt: f64 },
    #[error("--backend replay needs --transcript PATH")]
    MissingTranscript,
}

impl UsageError {
    /// `--help` and `--version` are reported through clap but are not failures.
    pub fn is_informational(&self) -> bool {
        matches!(self, UsageError::Clap(e) if !e.use_stderr())
    }
}

fn positive(flag: &'static str, v: Option<f64>) -> Result<Option<f64>, UsageError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(UsageError::NotPositive { flag, value: x }),
        other => Ok(other),
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<RunOptions, UsageError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let period = positive("period", cli.period)?;
    let dt = positive("dt", cli.dt)?;
    let duration = positive("duration", cli.duration)?;
    positive("timeout", Some(cli.timeout))?;
    if !(cli.min_interval >= 0.0) {
        return Err(UsageError::NotPositive {
            flag: "min-interval",
            value: cli.min_interval,
        });
    }
    // A file scenario may carry its own dt; the full check is repeated once
    // the scenario is loaded.
    if let Some(p) = period {
        let dt = dt.unwrap_or(avsup_core::dynamics::DEFAULT_DT);
        if steps_per_period(p, dt).is_none() {
            return Err(UsageError::PeriodNotMultiple { period: p, dt });
        }
    }
    if let Some(ps) = &cli.sweep_periods {
        for &p in ps {
            positive("sweep-periods", Some(p))?;
        }
    }

    let kind: BackendKind = cli.backend.parse().expect("restricted by clap");
    if kind == BackendKind::Replay && cli.transcript.is_none() {
        return Err(UsageError::MissingTranscript);
    }
    let backend = BackendConfig {
        kind,
        api_key_env_name: cli.api_key_env,
        model_identifier: cli.model,
        endpoint: cli.endpoint,
        min_request_interval: cli.min_interval,
        request_timeout: cli.timeout,
        transcript_path: cli.transcript,
        ..BackendConfig::default()
    };

    let source = match cli.scenario {
        Some(p) => ScenarioSource::File(p),
        None => ScenarioSource::Reference,
    };

    Ok(RunOptions {
        source,
        backend,
        decision_period: period,
        dt,
        duration,
        output_directory: cli.out,
        emit_plots: cli.plots,
        record_transcript: cli.record_transcript,
        sweep_periods: cli.sweep_periods,
        verbosity: cli.verbose,
    })
}
