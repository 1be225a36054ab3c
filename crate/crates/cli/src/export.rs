//! Per-step CSV export and the run summary written beside it.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use avsup_core::sim::{CollisionEvent, SimLog, SimSummary, StepRecord};

/// Bumped whenever a column is added, removed or reordered.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 15] = [
    "time",
    "x",
    "y",
    "yaw",
    "vx",
    "vy",
    "yaw_rate",
    "accel_cmd",
    "steer_cmd",
    "req_id",
    "nudge",
    "lateral_ref",
    "ped1_y",
    "ped2_y",
    "collision_flag",
];

/// One CSV line. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub accel_cmd: f64,
    pub steer_cmd: f64,
    /// 0 when no requirement is in force.
    pub req_id: u8,
    pub nudge: u8,
    pub lateral_ref: f64,
    /// Empty when the scenario has fewer pedestrians.
    pub ped1_y: Option<f64>,
    pub ped2_y: Option<f64>,
    pub collision_flag: u8,
}

impl From<&StepRecord> for CsvRow {
    fn from(r: &StepRecord) -> Self {
        let ped = |i: usize| r.pedestrians.get(i).map(|p| p.y);
        Self {
            time: r.time,
            x: r.state.x_world,
            y: r.state.y_world,
            yaw: r.state.yaw,
            vx: r.state.vx_body,
            vy: r.state.vy_body,
            yaw_rate: r.state.yaw_rate,
            accel_cmd: r.accel_cmd,
            steer_cmd: r.steer_cmd,
            req_id: r.verdict.requirement_id().unwrap_or(0),
            nudge: r.verdict.nudge().code(),
            lateral_ref: r.lateral_ref,
            ped1_y: ped(0),
            ped2_y: ped(1),
            collision_flag: u8::from(r.collision),
        }
    }
}

pub fn write_csv<W: Write>(log: &SimLog, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for rec in &log.steps {
        w.serialize(CsvRow::from(rec))?;
    }
    if log.steps.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(log: &SimLog, path: &Path) -> io::Result<()> {
    let file = io::BufWriter::new(File::create(path)?);
    write_csv(log, file).map_err(io::Error::other)
}

pub fn read_csv(path: &Path) -> csv::Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(csv::Error::from(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unexpected CSV header {header:?}"),
        )));
    }
    r.deserialize().collect()
}

#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub csv_schema_version: u32,
    pub decision_period: f64,
    pub dt: f64,
    pub pedestrians: &'a [String],
    pub summary: &'a SimSummary,
    pub collisions: &'a [CollisionEvent],
    pub requirement_sequence: Vec<Option<u8>>,
}

impl<'a> RunSummary<'a> {
    pub fn new(log: &'a SimLog) -> Self {
        Self {
            csv_schema_version: CSV_SCHEMA_VERSION,
            decision_period: log.decision_period,
            dt: log.dt,
            pedestrians: &log.pedestrian_names,
            summary: &log.summary,
            collisions: &log.collisions,
            requirement_sequence: log.requirement_sequence(),
        }
    }
}

pub fn export_summary(log: &SimLog, path: &Path) -> io::Result<()> {
    let file = io::BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, &RunSummary::new(log)).map_err(io::Error::other)
}
