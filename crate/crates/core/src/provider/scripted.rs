use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, Message, Provider, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reply {
    Text(String),
    /// Simulates a transport failure.
    Fail(String),
}

/// One `(matcher, reply)` pair. The matcher is a plain substring tested
/// against the last user message; an empty matcher matches everything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: String,
    pub reply: Reply,
    #[serde(default)]
    pub once: bool,
}

impl ScriptEntry {
    pub fn text(matcher: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            matcher: matcher.into(),
            reply: Reply::Text(reply.into()),
            once: false,
        }
    }

    pub fn once(matcher: impl Into<String>, reply: impl Into<String>) -> Self {
        Self {
            once: true,
            ..Self::text(matcher, reply)
        }
    }

    pub fn fail(matcher: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            matcher: matcher.into(),
            reply: Reply::Fail(detail.into()),
            once: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
    #[serde(default)]
    pub default: Option<String>,
}

impl Script {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        Self {
            entries,
            default: None,
        }
    }

    pub fn with_default(mut self, reply: impl Into<String>) -> Self {
        self.default = Some(reply.into());
        self
    }

    /// Decodes `{"entries": [{"match": .., "reply": {"text": ..}, "once": ..}], "default": ..}`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Returns the reply of the first entry whose matcher occurs in the last
    /// user message, consuming it if it is one-shot. Falls back to the
    /// default reply, or fails with [`ProviderError::ScriptExhausted`].
    pub fn next_reply(&mut self, req: &CompletionRequest) -> Result<Message, ProviderError> {
        let prompt = req.last_user().unwrap_or("");
        let hit = self
            .entries
            .iter()
            .position(|e| prompt.contains(e.matcher.as_str()));
        match hit {
            Some(i) => {
                let reply = if self.entries[i].once {
                    self.entries.remove(i).reply
                } else {
                    self.entries[i].reply.clone()
                };
                match reply {
                    Reply::Text(t) => Ok(Message::assistant(t)),
                    Reply::Fail(detail) => Err(ProviderError::Transport(detail)),
                }
            }
            None => match &self.default {
                Some(d) => Ok(Message::assistant(d.clone())),
                None => Err(ProviderError::ScriptExhausted),
            },
        }
    }
}

/// Deterministic provider replaying a [`Script`]. Every request is recorded
/// so tests can assert on what was asked.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    name: String,
    state: Mutex<ScriptState>,
}

#[derive(Debug, Default)]
struct ScriptState {
    script: Script,
    calls: Vec<CompletionRequest>,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        Self::named("scripted", script)
    }

    pub fn named(name: impl Into<String>, script: Script) -> Self {
        Self {
            name: name.into(),
            state: Mutex::new(ScriptState {
                script,
                calls: Vec::new(),
            }),
        }
    }

    pub fn calls(&self) -> Vec<CompletionRequest> {
        self.state.lock().expect("script poisoned").calls.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().expect("script poisoned").calls.len()
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().expect("script poisoned").script.entries.len()
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<Message, ProviderError> {
        let mut state = self.state.lock().expect("script poisoned");
        state.calls.push(req.clone());
        state.script.next_reply(req)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Fails every request with a transport error.
#[derive(Debug, Default)]
pub struct FailingProvider {
    calls: std::sync::atomic::AtomicUsize,
}

impl FailingProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl Provider for FailingProvider {
    fn complete(&self, _req: &CompletionRequest) -> Result<Message, ProviderError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Err(ProviderError::Transport("provider unavailable".into()))
    }

    fn name(&self) -> &str {
        "failing"
    }
}
