//! Transport-agnostic interface to a reasoning oracle (an LLM in
//! production), with an HTTP chat-completions backend, a deterministic
//! scripted backend, and record/replay transcripts for hermetic tests.
//!
//! Every response is validated against its task's schema before any
//! downstream module sees it; malformed output surfaces as a typed error
//! and the caller decides the fallback.

pub mod http;
pub mod schema;
pub mod scripted;
pub mod transcript;

pub use http::{HttpOracleBackend, HttpOracleConfig};
pub use scripted::{builtin_fixture, ScriptedFixture, ScriptedOracle};
pub use transcript::{
    transcript_from_handle, RecordingBackend, ReplayBackend, Transcript, TranscriptRecord,
};

use schema::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    /// The backend's output failed schema validation after any allowed
    /// repair attempts. The caller decides the fallback.
    #[error("malformed oracle output for {task:?}: {detail}")]
    MalformedOutput { task: TaskKind, detail: String },
    /// Replay backend has no recorded response for this request digest.
    #[error("transcript miss for digest {digest}")]
    TranscriptMiss { digest: String },
    #[error("oracle transport error: {0}")]
    Transport(String),
    #[error("oracle configuration error: {0}")]
    Config(String),
}

/// The oracle-mediated steps of the pipeline, one per task schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    InferHypotheses,
    PlanEvent,
    JudgeStep,
    SummarizeStep,
    DraftProperty,
    TranslateProperty,
    DiagnoseViolation,
    RefineProperty,
}

impl TaskKind {
    pub const ALL: [TaskKind; 8] = [
        TaskKind::InferHypotheses,
        TaskKind::PlanEvent,
        TaskKind::JudgeStep,
        TaskKind::SummarizeStep,
        TaskKind::DraftProperty,
        TaskKind::TranslateProperty,
        TaskKind::DiagnoseViolation,
        TaskKind::RefineProperty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::InferHypotheses => "infer_hypotheses",
            TaskKind::PlanEvent => "plan_event",
            TaskKind::JudgeStep => "judge_step",
            TaskKind::SummarizeStep => "summarize_step",
            TaskKind::DraftProperty => "draft_property",
            TaskKind::TranslateProperty => "translate_property",
            TaskKind::DiagnoseViolation => "diagnose_violation",
            TaskKind::RefineProperty => "refine_property",
        }
    }
}

/// A request to the oracle: the task kind, a structured payload matching the
/// task's request schema, and optional opaque image attachments passed
/// through to multimodal backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub task_kind: TaskKind,
    pub context_payload: serde_json::Value,
    /// Base64-encoded image blobs; ignored by text-only backends.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attachments: Vec<String>,
}

impl OracleRequest {
    pub fn new(task_kind: TaskKind, payload: impl Serialize) -> OracleRequest {
        OracleRequest {
            task_kind,
            context_payload: serde_json::to_value(payload).expect("payload serializes"),
            attachments: Vec::new(),
        }
    }

    /// Content hash of the canonicalized request. `serde_json` maps are
    /// ordered, so equal payloads digest identically regardless of field
    /// construction order.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&serde_json::json!({
            "task": self.task_kind.as_str(),
            "payload": self.context_payload,
            "attachments": self.attachments,
        }))
        .expect("request canonicalizes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A schema-validated oracle reply: the structured result plus the raw text
/// kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub task_kind: TaskKind,
    pub result: serde_json::Value,
    pub raw_text: String,
}

impl OracleResponse {
    pub fn from_value(task_kind: TaskKind, result: serde_json::Value) -> OracleResponse {
        let raw_text = result.to_string();
        OracleResponse { task_kind, result, raw_text }
    }
}

/// Validates a response value against the task's response schema.
pub fn validate_response(task: TaskKind, value: &serde_json::Value) -> Result<(), OracleError> {
    fn check<T: for<'de> Deserialize<'de>>(
        task: TaskKind,
        value: &serde_json::Value,
    ) -> Result<(), OracleError> {
        serde_json::from_value::<T>(value.clone())
            .map(|_| ())
            .map_err(|e| OracleError::MalformedOutput { task, detail: e.to_string() })
    }
    match task {
        TaskKind::InferHypotheses => check::<InferHypothesesResponse>(task, value),
        TaskKind::PlanEvent => check::<PlanEventResponse>(task, value),
        TaskKind::JudgeStep => check::<JudgeStepResponse>(task, value),
        TaskKind::SummarizeStep => check::<SummarizeStepResponse>(task, value),
        TaskKind::DraftProperty => check::<DraftPropertyResponse>(task, value),
        TaskKind::TranslateProperty => check::<TranslatePropertyResponse>(task, value),
        TaskKind::DiagnoseViolation => check::<DiagnoseViolationResponse>(task, value),
        TaskKind::RefineProperty => check::<RefinePropertyResponse>(task, value),
    }
}

/// One oracle transport. Implementations must be deterministic functions of
/// the request content where the backend kind allows it (scripted, replay).
pub trait OracleBackend: Send + Sync {
    fn complete(&self, req: &OracleRequest) -> Result<OracleResponse, OracleError>;
    fn name(&self) -> &str;
}

/// Front door used by the pipeline: dispatches requests to the configured
/// backend, enforces schema validation, and counts calls per task kind.
pub struct OracleClient {
    backend: Box<dyn OracleBackend>,
    calls: Mutex<BTreeMap<TaskKind, u64>>,
}

impl OracleClient {
    pub fn new(backend: Box<dyn OracleBackend>) -> OracleClient {
        OracleClient { backend, calls: Mutex::new(BTreeMap::new()) }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Calls issued so far, per task kind.
    pub fn call_counts(&self) -> BTreeMap<TaskKind, u64> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn calls_for(&self, task: TaskKind) -> u64 {
        self.call_counts().get(&task).copied().unwrap_or(0)
    }

    pub fn complete(&self, req: &OracleRequest) -> Result<OracleResponse, OracleError> {
        {
            let mut calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
            *calls.entry(req.task_kind).or_insert(0) += 1;
        }
        let response = self.backend.complete(req)?;
        validate_response(req.task_kind, &response.result)?;
        Ok(response)
    }

    fn call_typed<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        task: TaskKind,
        req: &Req,
    ) -> Result<Resp, OracleError> {
        let response = self.complete(&OracleRequest::new(task, req))?;
        serde_json::from_value(response.result)
            .map_err(|e| OracleError::MalformedOutput { task, detail: e.to_string() })
    }

    pub fn infer_hypotheses(
        &self,
        req: &InferHypothesesRequest,
    ) -> Result<InferHypothesesResponse, OracleError> {
        self.call_typed(TaskKind::InferHypotheses, req)
    }

    pub fn plan_event(&self, req: &PlanEventRequest) -> Result<PlanEventResponse, OracleError> {
        self.call_typed(TaskKind::PlanEvent, req)
    }

    pub fn judge_step(&self, req: &JudgeStepRequest) -> Result<JudgeStepResponse, OracleError> {
        self.call_typed(TaskKind::JudgeStep, req)
    }

    pub fn summarize_step(
        &self,
        req: &SummarizeStepRequest,
    ) -> Result<SummarizeStepResponse, OracleError> {
        self.call_typed(TaskKind::SummarizeStep, req)
    }

    pub fn draft_property(
        &self,
        req: &DraftPropertyRequest,
    ) -> Result<DraftPropertyResponse, OracleError> {
        self.call_typed(TaskKind::DraftProperty, req)
    }

    pub fn translate_property(
        &self,
        req: &TranslatePropertyRequest,
    ) -> Result<TranslatePropertyResponse, OracleError> {
        self.call_typed(TaskKind::TranslateProperty, req)
    }

    pub fn diagnose_violation(
        &self,
        req: &DiagnoseViolationRequest,
    ) -> Result<DiagnoseViolationResponse, OracleError> {
        self.call_typed(TaskKind::DiagnoseViolation, req)
    }

    pub fn refine_property(
        &self,
        req: &RefinePropertyRequest,
    ) -> Result<RefinePropertyResponse, OracleError> {
        self.call_typed(TaskKind::RefineProperty, req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_payload_sensitive() {
        let a = OracleRequest::new(
            TaskKind::JudgeStep,
            serde_json::json!({"goal": "x", "event": "click(1)"}),
        );
        let b = OracleRequest::new(
            TaskKind::JudgeStep,
            serde_json::json!({"event": "click(1)", "goal": "x"}),
        );
        let c = OracleRequest::new(
            TaskKind::JudgeStep,
            serde_json::json!({"goal": "x", "event": "click(2)"}),
        );
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn validation_rejects_wrong_shape() {
        let bad = serde_json::json!({"unexpected": true});
        assert!(validate_response(TaskKind::JudgeStep, &bad).is_err());
        let good = serde_json::json!({"outcome": "success"});
        assert!(validate_response(TaskKind::JudgeStep, &good).is_ok());
    }
}
