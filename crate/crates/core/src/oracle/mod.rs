//! Text generation behind a common interface: a rule-based offline provider, a scripted
//! one for fixed replies, and an HTTP client for chat-completion backends.

mod mock;
pub mod prompt;
mod remote;
mod scripted;

pub use mock::RuleOracle;
pub use prompt::{Message, PromptId, PromptTemplate};
pub use remote::{RemoteConfig, RemoteOracle};
pub use scripted::ScriptedOracle;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("prompt template error: {0}")]
    Template(String),
    #[error("no reply after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("provider unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for Decoding {
    fn default() -> Self {
        Self { temperature: 0.0, top_p: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRequest {
    pub template: PromptId,
    pub substitutions: BTreeMap<String, String>,
    #[serde(default)]
    pub decoding: Decoding,
    pub max_tokens: u32,
}

impl OracleRequest {
    pub fn new(template: PromptId) -> Self {
        Self { template, substitutions: BTreeMap::new(), decoding: Decoding::default(), max_tokens: 2048 }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.substitutions.insert(key.to_string(), value.into());
        self
    }

    pub fn sub(&self, key: &str) -> &str {
        self.substitutions.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn messages(&self) -> Result<Vec<Message>, OracleError> {
        self.template.template().render(&self.substitutions)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderMeta {
    pub provider: String,
    pub latency_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub raw_text: String,
    /// The reply as a JSON object carrying every key its template requires.
    pub parsed: Value,
    pub meta: ProviderMeta,
}

/// Raw reply text from a provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub text: String,
    pub attempts: u32,
}

pub trait Oracle: Send + Sync {
    fn name(&self) -> &str;

    /// Produces the raw reply for an already validated request.
    fn generate(&self, request: &OracleRequest, messages: &[Message]) -> Result<Generation, OracleError>;

    /// Renders the prompt, asks the provider and strictly parses the reply.
    fn complete(&self, request: &OracleRequest) -> Result<OracleResponse, OracleError> {
        let messages = request.messages()?;
        let start = Instant::now();
        let generation = self.generate(request, &messages)?;
        let parsed = parse_reply(request.template, &generation.text)?;
        Ok(OracleResponse {
            raw_text: generation.text,
            parsed,
            meta: ProviderMeta {
                provider: self.name().to_string(),
                latency_ms: start.elapsed().as_millis() as u64,
                attempts: generation.attempts,
            },
        })
    }
}

/// Parses a reply as a single JSON object with all keys the template requires. Nothing
/// is repaired: surrounding text or missing keys make the reply malformed.
pub fn parse_reply(template: PromptId, raw: &str) -> Result<Value, OracleError> {
    let value: Value = serde_json::from_str(raw.trim())
        .map_err(|e| OracleError::MalformedResponse(format!("{template}: not a JSON object: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| OracleError::MalformedResponse(format!("{template}: reply is not an object")))?;
    if let Some(missing) = template.required_keys().iter().find(|k| !obj.contains_key(**k)) {
        return Err(OracleError::MalformedResponse(format!("{template}: missing key `{missing}`")));
    }
    Ok(value)
}

/// String field of a parsed reply.
pub fn str_field<'a>(value: &'a Value, key: &str) -> Result<&'a str, OracleError> {
    value[key]
        .as_str()
        .ok_or_else(|| OracleError::MalformedResponse(format!("`{key}` is not a string")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_key_is_malformed() {
        let raw = r#"{"task_quality": "good", "complete_judgement": "", "quality_judgement": ""}"#;
        assert!(matches!(parse_reply(PromptId::Evaluate, raw), Err(OracleError::MalformedResponse(_))));
    }

    #[test]
    fn surrounding_text_is_malformed() {
        let raw = "```json\n{\"task\": \"x\", \"plan\": []}\n```";
        assert!(parse_reply(PromptId::Evolve, raw).is_err());
        assert!(parse_reply(PromptId::Evolve, "{\"task\": \"x\", \"plan\": []}").is_ok());
    }
}
