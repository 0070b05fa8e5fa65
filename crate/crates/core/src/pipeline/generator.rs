use std::sync::Arc;

use serde_json::{json, Value};

use crate::model::{validate_event, Clock, Event, EventDefaults, IdGen, RawInput};
use crate::provider::{CompletionRequest, Provider, ProviderError};
use crate::trace::Tracer;

pub const DEFAULT_K_MAX: usize = 8;
pub const STAGE_HEADER: &str = "## Event generation";
pub const DEFAULT_TEMPLATE: &str = include_str!("../../assets/prompts/event_generator.txt");

/// Turns raw inputs into validated events through a reasoning provider.
pub struct EventGenerator {
    provider: Arc<dyn Provider>,
    template: String,
    k_max: usize,
    fallback: bool,
    ids: Arc<IdGen>,
    clock: Arc<Clock>,
    tracer: Tracer,
}

impl EventGenerator {
    pub fn new(provider: Arc<dyn Provider>, ids: Arc<IdGen>, clock: Arc<Clock>) -> Self {
        Self {
            provider,
            template: DEFAULT_TEMPLATE.to_string(),
            k_max: DEFAULT_K_MAX,
            fallback: true,
            ids,
            clock,
            tracer: Tracer::disabled(),
        }
    }

    /// Panics if `k_max` is zero.
    pub fn with_k_max(mut self, k_max: usize) -> Self {
        assert!(k_max >= 1, "k_max must be at least 1");
        self.k_max = k_max;
        self
    }

    pub fn with_fallback(mut self, enabled: bool) -> Self {
        self.fallback = enabled;
        self
    }

    pub fn with_template(mut self, template: impl Into<String>) -> Self {
        self.template = template.into();
        self
    }

    pub fn with_tracer(mut self, tracer: Tracer) -> Self {
        self.tracer = tracer;
        self
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn user_prompt(raw: &RawInput) -> String {
        format!(
            "{STAGE_HEADER}\nsource: {}\npayload:\n{}",
            raw.source, raw.payload
        )
    }

    /// Returns between 1 and `k_max` events for `raw`.
    ///
    /// Malformed reply items are dropped and traced. When nothing usable comes
    /// back (or the provider fails and fallback is on) a single event whose
    /// intent is the raw payload is returned instead.
    pub fn generate(&self, raw: &RawInput) -> Result<Vec<Event>, ProviderError> {
        let req = CompletionRequest::new(self.template.clone(), Self::user_prompt(raw));
        let reply = match self.provider.complete(&req) {
            Ok(m) => m.content,
            Err(e) if self.fallback => {
                self.tracer.emit(
                    "event_provider_error",
                    json!({"source": raw.source, "error": e.to_string()}),
                );
                return Ok(vec![self.fallback_event(raw)]);
            }
            Err(e) => return Err(e),
        };

        let items = match parse_event_reply(&reply) {
            Ok(items) => items,
            Err(reason) => {
                self.tracer
                    .emit("event_reply_malformed", json!({"reason": reason}));
                Vec::new()
            }
        };

        let defaults = EventDefaults {
            ids: &self.ids,
            now: raw.received_at,
            source: raw.source,
        };
        let mut events = Vec::new();
        for (index, mut item) in items.into_iter().enumerate() {
            if let Value::Object(map) = &mut item {
                // Items that omit observations carry the raw payload.
                if map.get("observations").is_none_or(Value::is_null) {
                    map.insert("observations".into(), json!([raw.payload]));
                }
            }
            match validate_event(&item, &defaults) {
                Ok(e) if events.len() < self.k_max => events.push(e),
                Ok(e) => self
                    .tracer
                    .emit("event_item_truncated", json!({"index": index, "id": e.id})),
                Err(err) => self.tracer.emit(
                    "event_item_dropped",
                    json!({"index": index, "field": err.field, "reason": err.reason}),
                ),
            }
        }

        if events.is_empty() {
            self.tracer
                .emit("event_fallback", json!({"source": raw.source}));
            events.push(self.fallback_event(raw));
        }
        Ok(events)
    }

    fn fallback_event(&self, raw: &RawInput) -> Event {
        Event {
            id: self.ids.next_id(),
            ts: raw.received_at,
            source: raw.source,
            intent: raw.payload.clone(),
            instruction: String::new(),
            observations: Vec::new(),
            available_actions: Vec::new(),
            context: Default::default(),
        }
    }

    pub fn clock(&self) -> &Arc<Clock> {
        &self.clock
    }
}

/// Decodes an event-generation reply: a JSON array of event objects (a bare
/// object is accepted as a one-element array). Markdown code fences around
/// the JSON are ignored.
pub fn parse_event_reply(text: &str) -> Result<Vec<Value>, String> {
    let body = strip_code_fence(text);
    match serde_json::from_str::<Value>(body) {
        Ok(Value::Array(items)) => Ok(items),
        Ok(obj @ Value::Object(_)) => Ok(vec![obj]),
        Ok(_) => Err("expected a JSON array of events".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Removes a surrounding ```` ``` ```` / ```` ```json ```` fence if present.
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
        if let Some(inner) = rest.trim_end().strip_suffix("```") {
            return inner.trim();
        }
    }
    t
}
