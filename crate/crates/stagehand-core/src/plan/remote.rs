//! Remote planning backend: a JSON-over-HTTP chat-completion endpoint.
//!
//! One request per plan, temperature 0, single user message. Transport
//! failures and retriable HTTP statuses are retried up to three attempts with
//! doubling backoff; credential problems fail immediately.

use std::time::Duration;

use crate::error::PlanError;

const ATTEMPTS: u32 = 3;

fn default_timeout_secs() -> u64 {
    30
}

fn default_backoff_ms() -> u64 {
    250
}

/// Connection settings for the remote backend.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    /// Model name sent in the request body.
    pub model: String,
    /// Name of the environment variable holding the API credential. The
    /// credential itself never appears in config files.
    pub api_key_env: String,
    /// Whole-request timeout.
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Initial retry backoff; doubles per attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

/// Why a single attempt did not produce a reply.
enum Failure {
    /// Transient: transport error or retriable HTTP status.
    Retry(String),
    /// Permanent: bad credential or an unusable response body.
    Fatal(PlanError),
}

/// Send `prompt` and return the first choice's message text.
pub(crate) fn complete(cfg: &RemoteConfig, prompt: &str) -> Result<String, PlanError> {
    let key = std::env::var(&cfg.api_key_env).map_err(|_| PlanError::AuthError {
        msg: format!("environment variable `{}` is not set", cfg.api_key_env),
    })?;
    let body = serde_json::json!({
        "model": cfg.model,
        "messages": [{ "role": "user", "content": prompt }],
        "temperature": 0,
    })
    .to_string();
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();

    let mut last = String::new();
    for attempt in 0..ATTEMPTS {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(cfg.backoff_ms << (attempt - 1)));
        }
        match attempt_once(&agent, cfg, &key, &body) {
            Ok(text) => return Ok(text),
            Err(Failure::Fatal(e)) => return Err(e),
            Err(Failure::Retry(msg)) => last = msg,
        }
    }
    Err(PlanError::BackendUnavailable { attempts: ATTEMPTS, msg: last })
}

fn attempt_once(
    agent: &ureq::Agent,
    cfg: &RemoteConfig,
    key: &str,
    body: &str,
) -> Result<String, Failure> {
    let mut response = agent
        .post(&cfg.endpoint)
        .header("Authorization", format!("Bearer {key}"))
        .header("Content-Type", "application/json")
        .send(body)
        .map_err(|e| Failure::Retry(e.to_string()))?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| Failure::Retry(e.to_string()))?;
    match status {
        200..=299 => extract_message(&text).map_err(Failure::Fatal),
        401 | 403 => Err(Failure::Fatal(PlanError::AuthError {
            msg: format!("HTTP {status}: {}", excerpt(&text)),
        })),
        _ => Err(Failure::Retry(format!("HTTP {status}: {}", excerpt(&text)))),
    }
}

/// Pull `choices[0].message.content` out of a chat-completion response.
fn extract_message(text: &str) -> Result<String, PlanError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| PlanError::MalformedReply { msg: e.to_string() })?;
    value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(|s| s.as_str())
        .map(str::to_string)
        .ok_or_else(|| PlanError::MalformedReply {
            msg: format!("missing choices[0].message.content in {}", excerpt(text)),
        })
}

fn excerpt(text: &str) -> String {
    let one_line: String = text.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
    if one_line.len() > 200 {
        let cut = one_line
            .char_indices()
            .take_while(|(i, _)| *i <= 200)
            .last()
            .map(|(i, _)| i)
            .unwrap_or(0);
        format!("{}…", &one_line[..cut])
    } else {
        one_line
    }
}
