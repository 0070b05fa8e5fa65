//! Reasoning backends.
//!
//! Every stage that needs a model (event generation, candidate generation,
//! dispatch) talks to a [`Provider`]. The remote flavor speaks the
//! OpenAI-compatible chat-completions protocol; the scripted flavor replays
//! canned replies and is what the test suite and the benchmark harness use.

#[cfg(feature = "remote")]
mod openai;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[cfg(feature = "remote")]
pub use openai::{parse_completion_body, OpenAiConfig, OpenAiProvider};
pub use scripted::{FailingProvider, Reply, Script, ScriptEntry, ScriptedProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

pub const DEFAULT_MAX_OUTPUT: u32 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    messages: Vec<Message>,
    pub temperature: f64,
    pub max_output: u32,
}

impl CompletionRequest {
    /// System prompt followed by one user turn, at temperature 0.
    pub fn new(system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            messages: vec![Message::system(system), Message::user(user)],
            temperature: 0.0,
            max_output: DEFAULT_MAX_OUTPUT,
        }
    }

    /// Checks that the first message is a system message and that system and
    /// user messages carry content.
    pub fn from_messages(messages: Vec<Message>) -> Result<Self, ProviderError> {
        match messages.first() {
            Some(m) if m.role == Role::System => {}
            _ => {
                return Err(ProviderError::InvalidRequest(
                    "first message must have role system".into(),
                ))
            }
        }
        if messages
            .iter()
            .any(|m| m.role != Role::Assistant && m.content.is_empty())
        {
            return Err(ProviderError::InvalidRequest(
                "system and user messages must be non-empty".into(),
            ));
        }
        Ok(Self {
            messages,
            temperature: 0.0,
            max_output: DEFAULT_MAX_OUTPUT,
        })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn last_user(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected status {0}")]
    BadStatus(u16),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("rate limited")]
    RateLimited,
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// A reasoning backend. Implementations must be safe to share across threads.
pub trait Provider: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<Message, ProviderError>;

    /// Short label for reports.
    fn name(&self) -> &str {
        "provider"
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn complete(&self, req: &CompletionRequest) -> Result<Message, ProviderError> {
        (**self).complete(req)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}
