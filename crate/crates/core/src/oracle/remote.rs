//! Chat-completion client for OpenAI-compatible HTTP backends.

use super::{Generation, Message, Oracle, OracleError, OracleRequest};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; unset means no auth header.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Total tries per request, including the first.
    pub max_attempts: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: "LAM_ORACLE_API_KEY".into(),
            timeout_secs: 60,
            max_attempts: 3,
            backoff_ms: 500,
        }
    }
}

pub struct RemoteOracle {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

enum Failure {
    Retryable { timeout: bool, message: String },
    Fatal(OracleError),
}

impl RemoteOracle {
    pub fn new(config: RemoteConfig) -> Result<Self, OracleError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| OracleError::Unavailable(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retryable { timeout: e.is_timeout(), message: e.to_string() })?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retryable { timeout: false, message: format!("HTTP {status}") });
        }
        if !status.is_success() {
            return Err(Failure::Fatal(OracleError::Unavailable(format!("HTTP {status}"))));
        }
        let text = resp.text().map_err(|e| Failure::Retryable { timeout: e.is_timeout(), message: e.to_string() })?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(OracleError::MalformedResponse(format!("body is not JSON: {e}"))))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal(OracleError::MalformedResponse("no choices[0].message.content".into())))
    }
}

impl Oracle for RemoteOracle {
    fn name(&self) -> &str {
        "remote"
    }

    fn generate(&self, request: &OracleRequest, messages: &[Message]) -> Result<Generation, OracleError> {
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.decoding.temperature,
            "top_p": request.decoding.top_p,
            "max_tokens": request.max_tokens,
        });
        let attempts = self.config.max_attempts.max(1);
        let mut last = String::new();
        let mut timed_out = false;
        for n in 1..=attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(Generation { text, attempts: n }),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable { timeout, message }) => {
                    tracing::warn!(attempt = n, %message, "oracle request failed");
                    timed_out = timeout;
                    last = message;
                    if n < attempts {
                        std::thread::sleep(Duration::from_millis(self.config.backoff_ms << (n - 1)));
                    }
                }
            }
        }
        if timed_out {
            Err(OracleError::Timeout { attempts })
        } else {
            Err(OracleError::Unavailable(format!("{last} after {attempts} attempts")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Oracle, OracleRequest, PromptId};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// Serves canned (status, body) replies in order, one per connection.
    fn stub(replies: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((mut stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let resp = format!(
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        (url, hits)
    }

    fn oracle(url: String) -> RemoteOracle {
        RemoteOracle::new(RemoteConfig { endpoint: url, backoff_ms: 1, timeout_secs: 5, ..Default::default() }).unwrap()
    }

    fn request() -> OracleRequest {
        OracleRequest::new(PromptId::Evolve).with("task", "t").with("plan", "[]").with("variant", "0").with("max_extra_words", "20")
    }

    fn completion(content: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, hits) = stub(vec![
            (500, "{}".into()),
            (200, completion(r#"{"task": "t2", "plan": ["a"]}"#)),
        ]);
        let r = oracle(url).complete(&request()).unwrap();
        assert_eq!(r.parsed["task"], "t2");
        assert_eq!(r.meta.attempts, 2);
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn malformed_content_is_not_repaired() {
        let (url, _) = stub(vec![(200, completion("Sure! {\"task\": \"t2\"}"))]);
        assert!(matches!(oracle(url).complete(&request()), Err(OracleError::MalformedResponse(_))));
    }

    #[test]
    fn gives_up_after_max_attempts() {
        let (url, hits) = stub(vec![(503, "{}".into()), (503, "{}".into()), (503, "{}".into())]);
        assert!(oracle(url).complete(&request()).is_err());
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, hits) = stub(vec![(401, "{}".into()), (200, completion("{}"))]);
        assert!(matches!(oracle(url).complete(&request()), Err(OracleError::Unavailable(_))));
        assert_eq!(hits.load(Ordering::SeqCst), 1);
    }
}
