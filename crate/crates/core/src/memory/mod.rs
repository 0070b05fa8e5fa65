//! Retrieval-augmented memory backing the model description.
//!
//! Stores implement [`MemoryStore`]. [`LocalMemory`] is the in-process
//! reference; [`RemoteMemory`] fetches context from an external service over
//! HTTP. The runtime picks one by configuration.

mod embed;
#[cfg(feature = "remote")]
mod remote;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, Event, Feedback};

pub use embed::{bucket, embed, fnv1a64, similarity, tokenize, DEFAULT_DIM};
#[cfg(feature = "remote")]
pub use remote::{RemoteMemory, RemoteMemoryConfig};
pub use store::{
    event_summary, outcome_summary, query_text, LocalMemory, LocalMemoryConfig, MemoryItem,
    MemoryKind, DEFAULT_K_OLD, DEFAULT_K_SHORT, DEFAULT_THRESHOLD, DEFAULT_WINDOW,
};

/// Retrieved context handed to the decision stages.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MemoryContext {
    pub old_facts: Vec<String>,
    pub short_term: Vec<String>,
    pub version: u64,
}

impl MemoryContext {
    pub fn empty(version: u64) -> Self {
        Self {
            old_facts: Vec::new(),
            short_term: Vec::new(),
            version,
        }
    }

    /// Keeps at most `k_old` old facts and `k_short` short-term items.
    pub fn capped(mut self, k_old: usize, k_short: usize) -> Self {
        self.old_facts.truncate(k_old);
        self.short_term.truncate(k_short);
        self
    }
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("text has no tokens to embed")]
    EmptyText,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected status {0}")]
    BadStatus(u16),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PartialEq for MemoryError {
    fn eq(&self, other: &Self) -> bool {
        use MemoryError::*;
        match (self, other) {
            (EmptyText, EmptyText) => true,
            (DimensionMismatch(a, b), DimensionMismatch(c, d)) => a == c && b == d,
            (Transport(a), Transport(b)) | (MalformedReply(a), MalformedReply(b)) => a == b,
            (BadStatus(a), BadStatus(b)) => a == b,
            _ => false,
        }
    }
}

/// Memory backend. Single writer (the decision loop), concurrent readers.
///
/// Every `record_*` call bumps the version by exactly one and returns the new
/// version. Nothing else changes the version.
pub trait MemoryStore: Send + Sync {
    fn record_event(&self, e: &Event) -> u64;
    fn record_outcome(&self, a: &Action, f: &Feedback) -> u64;
    fn retrieve(&self, e: &Event, k_old: usize, k_short: usize) -> Result<MemoryContext, MemoryError>;
    fn version(&self) -> u64;

    fn name(&self) -> &str {
        "memory"
    }
}

impl<M: MemoryStore + ?Sized> MemoryStore for std::sync::Arc<M> {
    fn record_event(&self, e: &Event) -> u64 {
        (**self).record_event(e)
    }

    fn record_outcome(&self, a: &Action, f: &Feedback) -> u64 {
        (**self).record_outcome(a, f)
    }

    fn retrieve(&self, e: &Event, k_old: usize, k_short: usize) -> Result<MemoryContext, MemoryError> {
        (**self).retrieve(e, k_old, k_short)
    }

    fn version(&self) -> u64 {
        (**self).version()
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Decodes `{"old_facts": [..], "short_term": [..], "version": n}`.
pub fn parse_context_reply(text: &str) -> Result<MemoryContext, MemoryError> {
    serde_json::from_str(text).map_err(|e| MemoryError::MalformedReply(e.to_string()))
}
