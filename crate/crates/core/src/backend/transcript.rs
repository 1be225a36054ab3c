//! Line-delimited JSON transcripts: one exchange per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BackendError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub sim_time: f64,
    pub question: String,
    pub response: String,
    pub latency: f64,
    pub backend_kind: String,
}

pub fn record_transcript(entries: &[TranscriptEntry], path: &Path) -> Result<(), BackendError> {
    let io = |e: std::io::Error| BackendError::Io(format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for entry in entries {
        let line = serde_json::to_string(entry).map_err(|e| BackendError::Io(e.to_string()))?;
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a transcript, rejecting negative or decreasing `sim_time`.
pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptEntry>, BackendError> {
    let io = |e: std::io::Error| BackendError::Io(format!("{}: {e}", path.display()));
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut entries: Vec<TranscriptEntry> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: TranscriptEntry = serde_json::from_str(&line)
            .map_err(|e| BackendError::Io(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        let previous = entries.last().map_or(0.0, |e| e.sim_time);
        if !(entry.sim_time >= previous) {
            return Err(BackendError::Io(format!(
                "{}:{}: sim_time {} precedes {}",
                path.display(),
                lineno + 1,
                entry.sim_time,
                previous
            )));
        }
        entries.push(entry);
    }
    Ok(entries)
}
