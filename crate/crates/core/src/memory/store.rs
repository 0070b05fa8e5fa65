use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::model::{render_action, Action, Clock, Event, Feedback};

use super::embed::{embed, similarity, DEFAULT_DIM};
use super::{MemoryContext, MemoryError, MemoryStore};

pub const DEFAULT_WINDOW: usize = 32;
pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_K_OLD: usize = 4;
pub const DEFAULT_K_SHORT: usize = 8;
const SUMMARY_OBS_CHARS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    OldFact,
    ShortTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryItem {
    pub id: u64,
    pub kind: MemoryKind,
    pub text: String,
    pub embedding: Vec<f64>,
    pub stored_at: crate::model::Timestamp,
    pub session: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMemoryConfig {
    pub dim: usize,
    /// Short-term items kept before the oldest are promoted to old facts.
    pub window: usize,
    /// Items must score strictly above this to be retrieved.
    pub threshold: f64,
    pub session: String,
}

impl Default for LocalMemoryConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            window: DEFAULT_WINDOW,
            threshold: DEFAULT_THRESHOLD,
            session: "session-1".into(),
        }
    }
}

#[derive(Debug, Default)]
struct State {
    items: Vec<MemoryItem>,
    version: u64,
    next_id: u64,
}

/// In-process memory store: short-term window plus promoted old facts,
/// retrieved by embedding similarity.
#[derive(Debug)]
pub struct LocalMemory {
    config: LocalMemoryConfig,
    clock: Arc<Clock>,
    state: RwLock<State>,
}

/// `"[source] intent | obs: <first 200 chars of observations>"`
pub fn event_summary(e: &Event) -> String {
    let obs: String = e.joined_observations().chars().take(SUMMARY_OBS_CHARS).collect();
    format!("[{}] {} | obs: {}", e.source, e.intent, obs)
}

/// `"<rendered action> -> <outcome>"`
pub fn outcome_summary(a: &Action, f: &Feedback) -> String {
    format!("{} -> {}", render_action(a), f.outcome)
}

/// Text used as the retrieval query for an event.
pub fn query_text(e: &Event) -> String {
    format!("{} {}", e.intent, e.joined_observations())
}

impl LocalMemory {
    pub fn new(config: LocalMemoryConfig, clock: Arc<Clock>) -> Self {
        assert!(config.dim > 0 && config.window > 0);
        Self {
            config,
            clock,
            state: RwLock::new(State {
                next_id: 1,
                ..State::default()
            }),
        }
    }

    pub fn config(&self) -> &LocalMemoryConfig {
        &self.config
    }

    /// Copy of every stored item in insertion order.
    pub fn items(&self) -> Vec<MemoryItem> {
        self.state.read().expect("memory poisoned").items.clone()
    }

    fn append(&self, text: String) -> u64 {
        let embedding = embed(&text, self.config.dim).unwrap_or_else(|_| vec![0.0; self.config.dim]);
        let stored_at = self.clock.now();
        let mut st = self.state.write().expect("memory poisoned");
        let id = st.next_id;
        st.next_id += 1;
        st.items.push(MemoryItem {
            id,
            kind: MemoryKind::ShortTerm,
            text,
            embedding,
            stored_at,
            session: self.config.session.clone(),
        });
        let short = st
            .items
            .iter()
            .filter(|i| i.kind == MemoryKind::ShortTerm)
            .count();
        let excess = short.saturating_sub(self.config.window);
        // items are in insertion order, so the first short-term ones are oldest
        for item in st
            .items
            .iter_mut()
            .filter(|i| i.kind == MemoryKind::ShortTerm)
            .take(excess)
        {
            item.kind = MemoryKind::OldFact;
        }
        st.version += 1;
        st.version
    }

    /// Ranked `(id, score)` pairs of `kind` for the query text, best first,
    /// at most `k`.
    pub fn rank(&self, query: &str, kind: MemoryKind, k: usize) -> Vec<(u64, f64)> {
        let Ok(q) = embed(query, self.config.dim) else {
            return Vec::new();
        };
        let st = self.state.read().expect("memory poisoned");
        rank_items(&st.items, &q, kind, k, self.config.threshold)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), MemoryError> {
        let st = self.state.read().expect("memory poisoned");
        let mut w = BufWriter::new(File::create(path)?);
        let header = SnapshotHeader {
            version: st.version,
            next_id: st.next_id,
        };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for item in &st.items {
            writeln!(w, "{}", serde_json::to_string(item)?)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_snapshot(
        path: &Path,
        config: LocalMemoryConfig,
        clock: Arc<Clock>,
    ) -> Result<Self, MemoryError> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header: SnapshotHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(MemoryError::MalformedReply("empty snapshot".into())),
        };
        let mut items = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let item: MemoryItem = serde_json::from_str(&line)?;
            if item.embedding.len() != config.dim {
                return Err(MemoryError::DimensionMismatch(item.embedding.len(), config.dim));
            }
            items.push(item);
        }
        let store = Self::new(config, clock);
        {
            let mut st = store.state.write().expect("memory poisoned");
            st.items = items;
            st.version = header.version;
            st.next_id = header.next_id;
        }
        Ok(store)
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    version: u64,
    next_id: u64,
}

/// Scores are compared at this resolution. Similarities that are equal in
/// exact arithmetic can differ in the last bits depending on how the vectors
/// were normalized; snapping them to a grid makes them tie, so the recency
/// rule decides.
const SCORE_RESOLUTION: f64 = 1e9;

fn quantize(score: f64) -> f64 {
    (score * SCORE_RESOLUTION).round() / SCORE_RESOLUTION
}

/// Orders by score descending, then newer `stored_at` first, then id.
fn compare_ranked(a: &(f64, &MemoryItem), b: &(f64, &MemoryItem)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| b.1.stored_at.cmp(&a.1.stored_at))
        .then_with(|| a.1.id.cmp(&b.1.id))
}

fn rank_items(
    items: &[MemoryItem],
    query: &[f64],
    kind: MemoryKind,
    k: usize,
    threshold: f64,
) -> Vec<(u64, f64)> {
    let mut scored: Vec<(f64, &MemoryItem)> = items
        .iter()
        .filter(|i| i.kind == kind)
        .filter_map(|i| similarity(query, &i.embedding).ok().map(|s| (quantize(s), i)))
        .filter(|(s, _)| *s > threshold)
        .collect();
    scored.sort_by(compare_ranked);
    scored.truncate(k);
    scored.into_iter().map(|(s, i)| (i.id, s)).collect()
}

impl MemoryStore for LocalMemory {
    fn record_event(&self, e: &Event) -> u64 {
        self.append(event_summary(e))
    }

    fn record_outcome(&self, a: &Action, f: &Feedback) -> u64 {
        self.append(outcome_summary(a, f))
    }

    fn retrieve(&self, e: &Event, k_old: usize, k_short: usize) -> Result<MemoryContext, MemoryError> {
        let st = self.state.read().expect("memory poisoned");
        let Ok(q) = embed(&query_text(e), self.config.dim) else {
            return Ok(MemoryContext::empty(st.version));
        };
        let text_of = |id: u64| {
            st.items
                .iter()
                .find(|i| i.id == id)
                .map(|i| i.text.clone())
                .unwrap_or_default()
        };
        let old_facts = rank_items(&st.items, &q, MemoryKind::OldFact, k_old, self.config.threshold)
            .into_iter()
            .map(|(id, _)| text_of(id))
            .collect();
        let short_term = rank_items(&st.items, &q, MemoryKind::ShortTerm, k_short, self.config.threshold)
            .into_iter()
            .map(|(id, _)| text_of(id))
            .collect();
        Ok(MemoryContext {
            old_facts,
            short_term,
            version: st.version,
        })
    }

    fn version(&self) -> u64 {
        self.state.read().expect("memory poisoned").version
    }

    fn name(&self) -> &str {
        "local"
    }
}
