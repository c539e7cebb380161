//! Record/replay transcripts: wrap any backend to capture (request digest,
//! response) pairs, then serve them back hermetically. Transcript files are
//! line-delimited JSON with a metadata header line.

use super::{OracleBackend, OracleError, OracleRequest, OracleResponse, TaskKind};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub digest: String,
    pub task_kind: TaskKind,
    pub response: serde_json::Value,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub oracle_name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub created_unix: Option<u64>,
}

/// Ordered capture of one oracle session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub meta: TranscriptMeta,
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn write_jsonl(&self, path: &Path) -> Result<(), OracleError> {
        let mut out = Vec::new();
        writeln!(out, "{}", serde_json::to_string(&self.meta).expect("meta serializes"))
            .expect("vec write");
        for record in &self.records {
            writeln!(out, "{}", serde_json::to_string(record).expect("record serializes"))
                .expect("vec write");
        }
        std::fs::write(path, out)
            .map_err(|e| OracleError::Config(format!("cannot write transcript {path:?}: {e}")))
    }

    pub fn read_jsonl(path: &Path) -> Result<Transcript, OracleError> {
        let file = std::fs::File::open(path)
            .map_err(|e| OracleError::Config(format!("cannot read transcript {path:?}: {e}")))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let meta_line = lines
            .next()
            .ok_or_else(|| OracleError::Config(format!("transcript {path:?} is empty")))?
            .map_err(|e| OracleError::Config(format!("transcript read error: {e}")))?;
        let meta: TranscriptMeta = serde_json::from_str(&meta_line)
            .map_err(|e| OracleError::Config(format!("bad transcript metadata: {e}")))?;
        let mut records = Vec::new();
        for line in lines {
            let line = line.map_err(|e| OracleError::Config(format!("transcript read error: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TranscriptRecord = serde_json::from_str(&line)
                .map_err(|e| OracleError::Config(format!("bad transcript record: {e}")))?;
            records.push(record);
        }
        Ok(Transcript { meta, records })
    }
}

/// Shared handle onto a recording backend's captured records; lets the
/// transcript be extracted after the backend moved into a client.
pub type RecordsHandle = std::sync::Arc<Mutex<Vec<TranscriptRecord>>>;

/// Wraps a backend and captures every (digest, response) pair.
pub struct RecordingBackend {
    inner: Box<dyn OracleBackend>,
    records: RecordsHandle,
}

impl RecordingBackend {
    pub fn new(inner: Box<dyn OracleBackend>) -> RecordingBackend {
        RecordingBackend { inner, records: RecordsHandle::default() }
    }

    pub fn records_handle(&self) -> RecordsHandle {
        std::sync::Arc::clone(&self.records)
    }

    pub fn transcript(&self) -> Transcript {
        transcript_from_handle(&self.records, self.inner.name())
    }
}

/// Builds a transcript snapshot from a records handle.
pub fn transcript_from_handle(handle: &RecordsHandle, oracle_name: &str) -> Transcript {
    let records = handle.lock().unwrap_or_else(|e| e.into_inner()).clone();
    Transcript {
        meta: TranscriptMeta {
            oracle_name: oracle_name.to_string(),
            model: None,
            seed: None,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
        },
        records,
    }
}

impl OracleBackend for RecordingBackend {
    fn complete(&self, req: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let response = self.inner.complete(req)?;
        let record = TranscriptRecord {
            digest: req.digest(),
            task_kind: req.task_kind,
            response: response.result.clone(),
            raw_text: response.raw_text.clone(),
        };
        self.records.lock().unwrap_or_else(|e| e.into_inner()).push(record);
        Ok(response)
    }

    fn name(&self) -> &str {
        "recording"
    }
}

/// Serves only recorded responses, keyed by request digest. A request whose
/// digest was never captured is a transcript miss.
pub struct ReplayBackend {
    by_digest: HashMap<String, TranscriptRecord>,
}

impl ReplayBackend {
    pub fn new(transcript: Transcript) -> ReplayBackend {
        let by_digest =
            transcript.records.into_iter().map(|r| (r.digest.clone(), r)).collect();
        ReplayBackend { by_digest }
    }

    pub fn from_file(path: &Path) -> Result<ReplayBackend, OracleError> {
        Ok(ReplayBackend::new(Transcript::read_jsonl(path)?))
    }
}

impl OracleBackend for ReplayBackend {
    fn complete(&self, req: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let digest = req.digest();
        match self.by_digest.get(&digest) {
            Some(record) => Ok(OracleResponse {
                task_kind: record.task_kind,
                result: record.response.clone(),
                raw_text: record.raw_text.clone(),
            }),
            None => Err(OracleError::TranscriptMiss { digest }),
        }
    }

    fn name(&self) -> &str {
        "replay"
    }
}
