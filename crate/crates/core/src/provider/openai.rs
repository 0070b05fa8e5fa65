use std::fmt;
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, Message, Provider, ProviderError};

#[derive(Debug, Clone, PartialEq)]
pub struct OpenAiConfig {
    /// Scheme and host, e.g. `http://127.0.0.1:8080`. `/v1/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout: Duration,
    /// Extra attempts after the first for transient failures.
    pub retries: u32,
    /// Base delay; attempt `n` waits `backoff * 2^n`.
    pub backoff: Duration,
}

impl Default for OpenAiConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            model: "default".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(250),
        }
    }
}

/// Chat-completions client for any OpenAI-compatible endpoint.
pub struct OpenAiProvider {
    config: OpenAiConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl fmt::Debug for OpenAiProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpenAiProvider")
            .field("base_url", &self.config.base_url)
            .field("model", &self.config.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl OpenAiProvider {
    pub fn new(config: OpenAiConfig) -> Self {
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Self {
            config,
            api_key,
            agent,
        }
    }

    pub fn endpoint(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    /// Request body with keys in sorted order, so identical requests are
    /// byte-identical on the wire.
    pub fn request_body(&self, req: &CompletionRequest) -> String {
        let messages: Vec<Value> = req
            .messages()
            .iter()
            .map(|m| json!({"role": m.role.to_string(), "content": m.content}))
            .collect();
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_output,
        });
        body.to_string()
    }

    fn attempt(&self, body: &str) -> Result<Message, ProviderError> {
        let mut call = self
            .agent
            .post(&self.endpoint())
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        match call.send_string(body) {
            Ok(resp) => {
                let text = resp
                    .into_string()
                    .map_err(|e| ProviderError::Transport(e.to_string()))?;
                parse_completion_body(&text).map(Message::assistant)
            }
            Err(ureq::Error::Status(429, _)) => Err(ProviderError::RateLimited),
            Err(ureq::Error::Status(code, _)) => Err(ProviderError::BadStatus(code)),
            Err(ureq::Error::Transport(t)) => Err(ProviderError::Transport(t.to_string())),
        }
    }
}

fn is_transient(err: &ProviderError) -> bool {
    match err {
        ProviderError::Transport(_) | ProviderError::RateLimited => true,
        ProviderError::BadStatus(code) => *code >= 500,
        _ => false,
    }
}

impl Provider for OpenAiProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<Message, ProviderError> {
        let body = self.request_body(req);
        let attempts = self.config.retries + 1;
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(m) => return Ok(m),
                Err(e) if is_transient(&e) => {
                    attempt += 1;
                    if attempt >= attempts {
                        return Err(ProviderError::Exhausted {
                            attempts,
                            last: e.to_string(),
                        });
                    }
                    thread::sleep(self.config.backoff * 2u32.saturating_pow(attempt - 1));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn name(&self) -> &str {
        &self.config.model
    }
}

/// Extracts `choices[0].message.content` from a chat-completions response.
pub fn parse_completion_body(text: &str) -> Result<String, ProviderError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| ProviderError::MalformedReply(e.to_string()))?;
    value
        .get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::MalformedReply("missing choices[0].message.content".into()))
}
