//! OpenAI-compatible chat-completions backend.
//!
//! Transient failures (transport errors, 429, 5xx) retry up to a configured
//! limit with backoff. A schema-invalid reply gets exactly one reprompt that
//! restates the expected JSON shape; a second invalid reply surfaces as a
//! malformed-output error. The auth token is read from an environment
//! variable, never from flags or config files.

use super::{validate_response, OracleBackend, OracleError, OracleRequest, OracleResponse, TaskKind};
use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

pub const DEFAULT_TOKEN_ENV: &str = "PROPFORGE_ORACLE_TOKEN";

#[derive(Debug, Clone)]
pub struct HttpOracleConfig {
    /// Base URL up to and including the API root, e.g.
    /// `https://api.example.com/v1` or `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Sampling temperature; `None` leaves the provider default in place.
    pub temperature: Option<f64>,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub timeout_secs: u64,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
}

impl HttpOracleConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> HttpOracleConfig {
        HttpOracleConfig {
            base_url: base_url.into(),
            model: model.into(),
            temperature: None,
            max_retries: 2,
            retry_backoff_ms: 200,
            timeout_secs: 60,
            token_env: DEFAULT_TOKEN_ENV.to_string(),
        }
    }
}

/// Per-task system prompt, shipped as a versioned resource file.
pub fn prompt_template(task: TaskKind) -> &'static str {
    match task {
        TaskKind::InferHypotheses => include_str!("../../prompts/infer_hypotheses.md"),
        TaskKind::PlanEvent => include_str!("../../prompts/plan_event.md"),
        TaskKind::JudgeStep => include_str!("../../prompts/judge_step.md"),
        TaskKind::SummarizeStep => include_str!("../../prompts/summarize_step.md"),
        TaskKind::DraftProperty => include_str!("../../prompts/draft_property.md"),
        TaskKind::TranslateProperty => include_str!("../../prompts/translate_property.md"),
        TaskKind::DiagnoseViolation => include_str!("../../prompts/diagnose_violation.md"),
        TaskKind::RefineProperty => include_str!("../../prompts/refine_property.md"),
    }
}

/// One-line reminder of the response shape, used in the repair reprompt.
fn schema_reminder(task: TaskKind) -> &'static str {
    match task {
        TaskKind::InferHypotheses => {
            r#"{"hypotheses": [{"description": string, "trigger_label": integer, "main": boolean}]}"#
        }
        TaskKind::PlanEvent => {
            r#"{"event_type": "click"|"long-click"|"edit"|"swipe"|"back", "target_label": integer?, "data": {"text": string}|{"direction": "up"|"down"|"left"|"right"}?}"#
        }
        TaskKind::JudgeStep => r#"{"outcome": "success"|"fail"|"complete"}"#,
        TaskKind::SummarizeStep => {
            r#"{"pre_summary": string, "event_summary": string, "post_summary": string, "diff_summary": string}"#
        }
        TaskKind::DraftProperty => {
            r#"{"precondition_text": string, "interaction_text": string, "postcondition_text": string, "cited_steps": [integer]}"#
        }
        TaskKind::TranslateProperty => {
            r#"{"precondition": <predicate>, "interaction": {"steps": [...]}, "postcondition": <predicate>}"#
        }
        TaskKind::DiagnoseViolation => {
            r#"{"verdict": "imprecise_precondition"|"imprecise_interaction"|"imprecise_postcondition"|"likely_bug"|"automation_failure", "rationale": string}"#
        }
        TaskKind::RefineProperty => {
            r#"{"component": "precondition"|"interaction"|"postcondition", "new_precondition"?: <predicate>, "new_interaction"?: {"steps": [...]}, "new_postcondition"?: <predicate>, "rationale": string}"#
        }
    }
}

pub struct HttpOracleBackend {
    cfg: HttpOracleConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChatCompletionReply {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Debug, Deserialize)]
struct ChatMessage {
    content: String,
}

/// Strips a Markdown code fence if the model wrapped its JSON in one.
fn strip_code_fence(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(inner) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    let inner = inner.strip_prefix("json").unwrap_or(inner);
    let inner = inner.strip_prefix('\n').unwrap_or(inner);
    inner.strip_suffix("```").map(str::trim).unwrap_or(trimmed)
}

impl HttpOracleBackend {
    pub fn new(cfg: HttpOracleConfig) -> Result<HttpOracleBackend, OracleError> {
        let token = std::env::var(&cfg.token_env).ok().filter(|t| !t.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| OracleError::Config(format!("cannot build http client: {e}")))?;
        Ok(HttpOracleBackend { cfg, client, token })
    }

    fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn user_content(&self, req: &OracleRequest) -> serde_json::Value {
        let payload_text = serde_json::to_string_pretty(&req.context_payload)
            .expect("payload serializes");
        if req.attachments.is_empty() {
            return json!(payload_text);
        }
        let mut parts = vec![json!({"type": "text", "text": payload_text})];
        for blob in &req.attachments {
            parts.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{blob}")}
            }));
        }
        json!(parts)
    }

    /// One chat call with transient-failure retries. Returns the assistant
    /// message content.
    fn chat(&self, messages: &[serde_json::Value]) -> Result<String, OracleError> {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": messages,
        });
        if let Some(t) = self.cfg.temperature {
            body["temperature"] = json!(t);
        }
        let mut last_error = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.cfg.retry_backoff_ms.saturating_mul(attempt as u64),
                ));
            }
            let mut request = self.client.post(self.completions_url()).json(&body);
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let reply: ChatCompletionReply = response.json().map_err(|e| {
                            OracleError::Transport(format!("bad completion body: {e}"))
                        })?;
                        let content = reply
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| {
                                OracleError::Transport("completion had no choices".into())
                            })?;
                        return Ok(content);
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_error = format!("transient status {status}");
                        continue;
                    }
                    return Err(OracleError::Transport(format!(
                        "chat completion failed with status {status}"
                    )));
                }
                Err(e) => {
                    last_error = e.to_string();
                    continue;
                }
            }
        }
        Err(OracleError::Transport(format!(
            "chat completion failed after {} attempts: {last_error}",
            self.cfg.max_retries + 1
        )))
    }

    fn parse_and_validate(
        task: TaskKind,
        content: &str,
    ) -> Result<serde_json::Value, OracleError> {
        let value: serde_json::Value = serde_json::from_str(strip_code_fence(content))
            .map_err(|e| OracleError::MalformedOutput { task, detail: format!("not JSON: {e}") })?;
        validate_response(task, &value)?;
        Ok(value)
    }
}

impl OracleBackend for HttpOracleBackend {
    fn complete(&self, req: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let system = json!({"role": "system", "content": prompt_template(req.task_kind)});
        let user = json!({"role": "user", "content": self.user_content(req)});
        let mut messages = vec![system, user];

        let first = self.chat(&messages)?;
        match Self::parse_and_validate(req.task_kind, &first) {
            Ok(value) => {
                return Ok(OracleResponse {
                    task_kind: req.task_kind,
                    result: value,
                    raw_text: first,
                })
            }
            Err(_) => {
                // One repair attempt: restate the expected shape.
                messages.push(json!({"role": "assistant", "content": first}));
                messages.push(json!({
                    "role": "user",
                    "content": format!(
                        "That reply did not validate. Respond with ONLY a JSON object matching: {}",
                        schema_reminder(req.task_kind)
                    ),
                }));
            }
        }
        let second = self.chat(&messages)?;
        let value = Self::parse_and_validate(req.task_kind, &second)?;
        Ok(OracleResponse { task_kind: req.task_kind, result: value, raw_text: second })
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Minimal canned-response HTTP server: serves the given bodies in
    /// order, one per connection, then stops.
    fn spawn_server(bodies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind test server");
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen_requests = Vec::new();
            for (status, body) in bodies {
                let (mut stream, _) = listener.accept().expect("accept");
                let mut buf = [0u8; 65536];
                let mut request = Vec::new();
                // Read until the end of the JSON body (headers + content).
                loop {
                    let n = stream.read(&mut buf).expect("read");
                    request.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&request);
                    if let Some(header_end) = text.find("\r\n\r\n") {
                        let content_length: usize = text
                            .lines()
                            .find(|l| l.to_ascii_lowercase().starts_with("content-length:"))
                            .and_then(|l| l.split(':').nth(1))
                            .and_then(|v| v.trim().parse().ok())
                            .unwrap_or(0);
                        if request.len() >= header_end + 4 + content_length {
                            break;
                        }
                    }
                }
                seen_requests.push(String::from_utf8_lossy(&request).to_string());
                let reason = if status == 200 { "OK" } else { "ERR" };
                let response = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len(),
                );
                stream.write_all(response.as_bytes()).expect("write");
            }
            seen_requests
        });
        (format!("http://{addr}/v1"), handle)
    }

    fn chat_body(content: &str) -> String {
        serde_json::to_string(&json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        }))
        .unwrap()
    }

    fn judge_request() -> OracleRequest {
        OracleRequest::new(
            TaskKind::JudgeStep,
            json!({
                "goal": "g", "event": "click(1)", "pre_screen": "a", "post_screen": "b",
                "pre_listing": "", "post_listing": "", "state_changed": true, "history": []
            }),
        )
    }

    fn backend(base_url: &str) -> HttpOracleBackend {
        let mut cfg = HttpOracleConfig::new(base_url, "test-model");
        cfg.retry_backoff_ms = 1;
        cfg.token_env = "PROPFORGE_TEST_TOKEN_UNSET".into();
        HttpOracleBackend::new(cfg).unwrap()
    }

    #[test]
    fn parses_valid_response() {
        let (url, server) =
            spawn_server(vec![(200, chat_body(r#"{"outcome": "success"}"#))]);
        let response = backend(&url).complete(&judge_request()).unwrap();
        assert_eq!(response.result["outcome"], "success");
        server.join().unwrap();
    }

    #[test]
    fn retries_transient_server_error() {
        let (url, server) = spawn_server(vec![
            (500, "oops".into()),
            (200, chat_body(r#"{"outcome": "complete"}"#)),
        ]);
        let response = backend(&url).complete(&judge_request()).unwrap();
        assert_eq!(response.result["outcome"], "complete");
        server.join().unwrap();
    }

    #[test]
    fn reprompts_once_on_invalid_output_then_succeeds() {
        let (url, server) = spawn_server(vec![
            (200, chat_body("the step went well, great success")),
            (200, chat_body(r#"```json
{"outcome": "success"}
```"#)),
        ]);
        let response = backend(&url).complete(&judge_request()).unwrap();
        assert_eq!(response.result["outcome"], "success");
        let requests = server.join().unwrap();
        assert_eq!(requests.len(), 2);
        assert!(requests[1].contains("did not validate"));
    }

    #[test]
    fn persistent_invalid_output_is_malformed() {
        let (url, server) = spawn_server(vec![
            (200, chat_body("not json")),
            (200, chat_body("still not json")),
        ]);
        let err = backend(&url).complete(&judge_request()).unwrap_err();
        assert!(matches!(err, OracleError::MalformedOutput { .. }));
        server.join().unwrap();
    }

    #[test]
    fn bearer_token_header_comes_from_env() {
        let var = "PROPFORGE_TEST_TOKEN_SET_ONCE";
        std::env::set_var(var, "sekrit-token");
        let (url, server) =
            spawn_server(vec![(200, chat_body(r#"{"outcome": "fail"}"#))]);
        let mut cfg = HttpOracleConfig::new(&url, "test-model");
        cfg.token_env = var.into();
        cfg.retry_backoff_ms = 1;
        let be = HttpOracleBackend::new(cfg).unwrap();
        be.complete(&judge_request()).unwrap();
        let requests = server.join().unwrap();
        assert!(requests[0].to_ascii_lowercase().contains("authorization: bearer sekrit-token"));
        std::env::remove_var(var);
    }

    #[test]
    fn code_fence_stripping() {
        assert_eq!(strip_code_fence("{\"a\":1}"), "{\"a\":1}");
        assert_eq!(strip_code_fence("```json\n{\"a\":1}\n```"), "{\"a\":1}");
        assert_eq!(strip_code_fence("```\n{\"a\":1}\n```"), "{\"a\":1}");
    }
}
