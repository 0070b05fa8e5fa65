use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::json;

use crate::model::{Action, Event, Feedback};
use crate::trace::Tracer;

use super::{parse_context_reply, MemoryContext, MemoryError, MemoryStore};

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteMemoryConfig {
    pub base_url: String,
    pub timeout: Duration,
    /// Return an empty context instead of an error when the service fails.
    pub fallback: bool,
}

impl Default for RemoteMemoryConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8001".into(),
            timeout: Duration::from_secs(5),
            fallback: true,
        }
    }
}

/// Client for an external context service.
///
/// Retrieval POSTs the serialized event to `{base_url}/context`. The service
/// owns storage, so `record_*` only advance the local version counter that
/// the runtime audits.
pub struct RemoteMemory {
    config: RemoteMemoryConfig,
    agent: ureq::Agent,
    version: AtomicU64,
    tracer: Tracer,
}

impl RemoteMemory {
    pub fn new(config: RemoteMemoryConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Self {
            config,
            agent,
            version: AtomicU64::new(0),
            tracer: Tracer::disabled(),
        }
    }

    pub fn with_tracer(mut self, tracer: Tracer) -> Self {
        self.tracer = tracer;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/context", self.config.base_url.trim_end_matches('/'))
    }

    /// One request, no fallback.
    pub fn fetch_context(&self, e: &Event) -> Result<MemoryContext, MemoryError> {
        let body = serde_json::to_string(e)?;
        let resp = self
            .agent
            .post(&self.endpoint())
            .set("Content-Type", "application/json")
            .send_string(&body);
        match resp {
            Ok(r) => {
                let text = r
                    .into_string()
                    .map_err(|e| MemoryError::Transport(e.to_string()))?;
                parse_context_reply(&text)
            }
            Err(ureq::Error::Status(code, _)) => Err(MemoryError::BadStatus(code)),
            Err(ureq::Error::Transport(t)) => Err(MemoryError::Transport(t.to_string())),
        }
    }
}

impl std::fmt::Debug for RemoteMemory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteMemory")
            .field("config", &self.config)
            .field("version", &self.version.load(Ordering::SeqCst))
            .finish()
    }
}

impl MemoryStore for RemoteMemory {
    fn record_event(&self, _e: &Event) -> u64 {
        self.version.fetch_add(1, Ordering::SeqCst) + 1
    }

    fn record_outcome(&self, _a: &Action, _f: &Feedback) -> u64 {
        self.version.fetch_add(1, Ordering::SeqCst) + 1
    }

    fn retrieve(&self, e: &Event, k_old: usize, k_short: usize) -> Result<MemoryContext, MemoryError> {
        match self.fetch_context(e) {
            Ok(ctx) => Ok(ctx.capped(k_old, k_short)),
            Err(err) if self.config.fallback => {
                self.tracer.emit(
                    "memory_fallback",
                    json!({"event_id": e.id, "error": err.to_string()}),
                );
                Ok(MemoryContext::empty(self.version()))
            }
            Err(err) => Err(err),
        }
    }

    fn version(&self) -> u64 {
        self.version.load(Ordering::SeqCst)
    }

    fn name(&self) -> &str {
        "remote"
    }
}
