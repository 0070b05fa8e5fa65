//! Two-stage action selection.
//!
//! The candidate stage asks the provider for up to [`CANDIDATE_CAP`] actions
//! for the newest event and keeps only those that parse and that the event
//! permits. The dispatch stage asks the provider to pick one candidate by
//! 1-based index, or `noop`. Whatever the provider does, the chosen action is
//! always one of the candidates or `noop`.

mod prompt;

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::memory::{MemoryContext, MemoryStore};
use crate::model::{parse_action, Action, Clock, Event, IdGen, Timestamp};
use crate::pipeline::{strip_code_fence, EventQueue};
use crate::provider::{CompletionRequest, Provider, ProviderError};
use crate::trace::Tracer;

pub use prompt::{
    candidate_prompt, dispatch_prompt, CANDIDATE_HEADER, CANDIDATE_TEMPLATE, DISPATCH_HEADER,
    DISPATCH_TEMPLATE,
};

pub const CANDIDATE_CAP: usize = 5;
pub const DEFAULT_MAX_PEERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub event_id: String,
    pub candidates: Vec<Action>,
    pub rationales: Vec<String>,
}

impl CandidateSet {
    pub fn empty(event_id: impl Into<String>) -> Self {
        Self {
            event_id: event_id.into(),
            candidates: Vec::new(),
            rationales: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, a: &Action) -> bool {
        self.candidates.contains(a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub event_id: String,
    pub chosen: Action,
    pub candidate_count: usize,
    pub memory_version: u64,
    pub decided_at: Timestamp,
}

/// One full selection cycle's output.
#[derive(Debug, Clone, PartialEq)]
pub enum Cycle {
    Idle,
    Decided {
        event: Event,
        candidates: CandidateSet,
        decision: Decision,
    },
}

/// What the dispatcher's reply selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchChoice {
    /// Zero-based candidate index.
    Index(usize),
    Noop,
}

/// Raw candidate as proposed by the provider, before grammar checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposedAction {
    pub action: String,
    pub rationale: String,
}

/// Decodes a candidate reply: a JSON array whose items are action strings or
/// `{"action": .., "rationale": ..}` objects. Items of any other shape are
/// skipped.
pub fn parse_candidate_reply(text: &str) -> Result<Vec<ProposedAction>, String> {
    let value: Value = serde_json::from_str(strip_code_fence(text)).map_err(|e| e.to_string())?;
    let Value::Array(items) = value else {
        return Err("expected a JSON array of candidates".into());
    };
    Ok(items
        .into_iter()
        .filter_map(|item| match item {
            Value::String(action) => Some(ProposedAction {
                action,
                rationale: String::new(),
            }),
            Value::Object(map) => {
                let action = map.get("action")?.as_str()?.to_string();
                let rationale = map
                    .get("rationale")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string();
                Some(ProposedAction { action, rationale })
            }
            _ => None,
        })
        .collect())
}

/// Strict dispatcher reply: a bare 1-based index in `1..=n`, or `noop`.
/// Surrounding whitespace is ignored; anything else is rejected.
pub fn parse_dispatch_reply(text: &str, n: usize) -> Result<DispatchChoice, String> {
    let t = text.trim();
    if t == "noop" {
        return Ok(DispatchChoice::Noop);
    }
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("expected an index or noop, got {t:?}"));
    }
    let idx: usize = t.parse().map_err(|_| format!("index out of range: {t}"))?;
    if idx == 0 || idx > n {
        return Err(format!("index {idx} outside 1..={n}"));
    }
    Ok(DispatchChoice::Index(idx - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionConfig {
    pub k_old: usize,
    pub k_short: usize,
    pub max_peers: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            k_old: crate::memory::DEFAULT_K_OLD,
            k_short: crate::memory::DEFAULT_K_SHORT,
            max_peers: DEFAULT_MAX_PEERS,
        }
    }
}

pub struct DecisionEngine {
    provider: Arc<dyn Provider>,
    candidate_template: String,
    dispatch_template: String,
    config: DecisionConfig,
    ids: IdGen,
    clock: Arc<Clock>,
    tracer: Tracer,
    readmitted: Mutex<HashSet<String>>,
}

impl DecisionEngine {
    pub fn new(provider: Arc<dyn Provider>, clock: Arc<Clock>) -> Self {
        Self {
            provider,
            candidate_template: CANDIDATE_TEMPLATE.to_string(),
            dispatch_template: DISPATCH_TEMPLATE.to_string(),
            config: DecisionConfig::default(),
            ids: IdGen::new("dec"),
            clock,
            tracer: Tracer::disabled(),
            readmitted: Mutex::new(HashSet::new()),
        }
    }

    pub fn with_config(mut self, config: DecisionConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_templates(mut self, candidate: impl Into<String>, dispatch: impl Into<String>) -> Self {
        self.candidate_template = candidate.into();
        self.dispatch_template = dispatch.into();
        self
    }

    pub fn with_tracer(mut self, tracer: Tracer) -> Self {
        self.tracer = tracer;
        self
    }

    /// Asks the provider for candidates and filters the reply.
    ///
    /// Only a provider failure is an error; a reply that cannot be decoded
    /// yields an empty set.
    pub fn generate_candidates(
        &self,
        event: &Event,
        ctx: &MemoryContext,
        peers: &[Event],
        tasks: &[String],
    ) -> Result<CandidateSet, ProviderError> {
        let req = CompletionRequest::new(
            self.candidate_template.clone(),
            candidate_prompt(event, ctx, peers, tasks),
        );
        let reply = self.provider.complete(&req)?.content;
        let proposed = match parse_candidate_reply(&reply) {
            Ok(p) => p,
            Err(reason) => {
                self.tracer.emit(
                    "candidate_reply_malformed",
                    json!({"event_id": event.id, "reason": reason}),
                );
                Vec::new()
            }
        };

        let mut set = CandidateSet::empty(event.id.clone());
        for p in proposed {
            let action = match parse_action(&p.action) {
                Ok(a) => a,
                Err(e) => {
                    self.tracer.emit(
                        "candidate_filtered",
                        json!({"event_id": event.id, "action": p.action, "reason": e.to_string()}),
                    );
                    continue;
                }
            };
            if !event.permits(&action) {
                self.tracer.emit(
                    "candidate_filtered",
                    json!({"event_id": event.id, "action": p.action, "reason": "not available"}),
                );
                continue;
            }
            if set.contains(&action) {
                self.tracer.emit(
                    "candidate_filtered",
                    json!({"event_id": event.id, "action": p.action, "reason": "duplicate"}),
                );
                continue;
            }
            if set.len() == CANDIDATE_CAP {
                self.tracer.emit(
                    "candidate_truncated",
                    json!({"event_id": event.id, "action": p.action}),
                );
                continue;
            }
            set.candidates.push(action);
            set.rationales.push(p.rationale);
        }
        Ok(set)
    }

    /// Picks exactly one candidate or `noop`. Never fails: provider errors and
    /// unusable replies become `noop` with a trace record.
    pub fn dispatch(
        &self,
        cs: &CandidateSet,
        event: &Event,
        ctx: &MemoryContext,
        tasks: &[String],
    ) -> Decision {
        let chosen = if cs.is_empty() {
            Action::noop()
        } else {
            let req = CompletionRequest::new(
                self.dispatch_template.clone(),
                dispatch_prompt(event, cs, ctx, tasks),
            );
            match self.provider.complete(&req) {
                Ok(reply) => match parse_dispatch_reply(&reply.content, cs.len()) {
                    Ok(DispatchChoice::Index(i)) => cs.candidates[i].clone(),
                    Ok(DispatchChoice::Noop) => Action::noop(),
                    Err(reason) => {
                        self.tracer.emit(
                            "dispatch_rejected",
                            json!({"event_id": event.id, "reply": reply.content, "reason": reason}),
                        );
                        Action::noop()
                    }
                },
                Err(e) => {
                    self.tracer.emit(
                        "dispatch_provider_error",
                        json!({"event_id": event.id, "error": e.to_string()}),
                    );
                    Action::noop()
                }
            }
        };
        self.decision(event, chosen, cs.len(), ctx.version)
    }

    fn decision(&self, event: &Event, chosen: Action, candidate_count: usize, memory_version: u64) -> Decision {
        Decision {
            id: self.ids.next_id(),
            event_id: event.id.clone(),
            chosen,
            candidate_count,
            memory_version,
            decided_at: self.clock.now(),
        }
    }

    /// Runs one cycle: pop the newest event, retrieve memory, generate
    /// candidates, dispatch.
    ///
    /// If candidate generation fails at the provider, the event is pushed back
    /// once (keeping its wall time) and the cycle yields a `noop` decision; a
    /// second failure for the same event drops it.
    pub fn select_action(
        &self,
        queue: &EventQueue,
        memory: &dyn MemoryStore,
        tasks: &[String],
        now: Timestamp,
    ) -> Cycle {
        let popped = queue.pop_latest(now);
        for e in &popped.expired {
            self.tracer.emit("event_expired", json!({"event_id": e.id}));
        }
        let Some(event) = popped.event else {
            return Cycle::Idle;
        };

        let ctx = match memory.retrieve(&event, self.config.k_old, self.config.k_short) {
            Ok(ctx) => ctx,
            Err(e) => {
                self.tracer.emit(
                    "memory_error",
                    json!({"event_id": event.id, "error": e.to_string()}),
                );
                MemoryContext::empty(memory.version())
            }
        };

        let mut peers = queue.snapshot();
        peers.reverse();
        peers.truncate(self.config.max_peers);

        match self.generate_candidates(&event, &ctx, &peers, tasks) {
            Ok(candidates) => {
                let decision = self.dispatch(&candidates, &event, &ctx, tasks);
                Cycle::Decided {
                    event,
                    candidates,
                    decision,
                }
            }
            Err(err) => {
                let first_failure = self
                    .readmitted
                    .lock()
                    .expect("readmission set poisoned")
                    .insert(event.id.clone());
                if first_failure {
                    queue.push(event.clone());
                    self.tracer.emit(
                        "event_readmitted",
                        json!({"event_id": event.id, "error": err.to_string()}),
                    );
                } else {
                    self.tracer.emit(
                        "event_dropped",
                        json!({"event_id": event.id, "error": err.to_string()}),
                    );
                }
                let decision = self.decision(&event, Action::noop(), 0, ctx.version);
                Cycle::Decided {
                    candidates: CandidateSet::empty(event.id.clone()),
                    event,
                    decision,
                }
            }
        }
    }
}
