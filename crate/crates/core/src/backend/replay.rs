//! Transcript playback.

use std::path::Path;

use super::transcript::{read_transcript, TranscriptEntry};
use super::{BackendError, BackendKind, DecisionBackend, Query, Reply};
use crate::context::RawResponse;

/// Collapses runs of whitespace so recordings survive reflowing.
pub fn normalize_question(q: &str) -> String {
    q.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Returns recorded replies in order. Latency and backend kind are taken
/// from the recording so a replayed run logs exactly what was recorded.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    entries: Vec<TranscriptEntry>,
    cursor: usize,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        Self { entries, cursor: 0 }
    }

    pub fn from_path(path: &Path) -> Result<Self, BackendError> {
        Ok(Self::new(read_transcript(path)?))
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.cursor
    }
}

impl DecisionBackend for ReplayBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn decide(&mut self, query: &Query<'_>) -> Result<Reply, BackendError> {
        let index = self.cursor;
        let entry = self.entries.get(index).ok_or(BackendError::ReplayExhausted { index })?;
        if normalize_question(&entry.question) != normalize_question(query.question) {
            return Err(BackendError::ReplayMismatch {
                index,
                expected: entry.question.clone(),
                actual: query.question.to_string(),
            });
        }
        self.cursor += 1;
        Ok(Reply {
            response: RawResponse::new(entry.response.clone()),
            latency: entry.latency,
            backend_kind: entry.backend_kind.clone(),
            structured: None,
        })
    }
}
