//! Reference models shared by the property and acceptance tests. None of
//! these call into the code they check, beyond reading its outputs.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use eventide::decision::{CANDIDATE_HEADER, DISPATCH_HEADER};
use eventide::memory::{MemoryItem, MemoryKind};
use eventide::model::{Action, ActionPattern, Clock, Event, Source, Timestamp, Verb};
use eventide::provider::{Reply, Script, ScriptEntry, ScriptedProvider};
use rand::seq::SliceRandom;
use rand::Rng;

// ---------------------------------------------------------------- queue

/// Sort-based model of the event queue.
#[derive(Debug, Default)]
pub struct RefQueue {
    items: Vec<(u64, u64, String)>,
    seq: u64,
    pub capacity: usize,
    pub ttl: u64,
}

impl RefQueue {
    pub fn new(capacity: usize, ttl: u64) -> Self {
        Self {
            capacity,
            ttl,
            ..Self::default()
        }
    }

    /// Returns the id evicted by the push, if any.
    pub fn push(&mut self, id: &str, wall: u64) -> Option<String> {
        self.seq += 1;
        self.items.push((wall, self.seq, id.to_string()));
        if self.items.len() > self.capacity {
            self.items.sort();
            return Some(self.items.remove(0).2);
        }
        None
    }

    /// Returns (popped id, expired ids in ascending order).
    pub fn pop(&mut self, now: u64) -> (Option<String>, Vec<String>) {
        self.items.sort();
        let mut expired = Vec::new();
        if now >= self.ttl {
            let cutoff = now - self.ttl;
            let (old, live): (Vec<_>, Vec<_>) = self.items.drain(..).partition(|(w, _, _)| *w < cutoff);
            expired = old.into_iter().map(|(_, _, id)| id).collect();
            self.items = live;
        }
        (self.items.pop().map(|(_, _, id)| id), expired)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut v = self.items.clone();
        v.sort();
        v.into_iter().map(|(_, _, id)| id).collect()
    }
}

pub fn bare_event(id: &str, wall: u64) -> Event {
    Event {
        id: id.into(),
        ts: Timestamp::new(wall, 0),
        source: Source::Client,
        intent: format!("intent {id}"),
        instruction: String::new(),
        observations: vec![],
        available_actions: vec![],
        context: Default::default(),
    }
}

// ---------------------------------------------------------------- grammar

pub fn random_arg(rng: &mut impl Rng) -> String {
    const POOL: &[char] = &[
        'a', 'b', 'Z', '0', '9', ' ', '"', '\\', '[', ']', '*', '\'', '-', '$', '.', 'é', '日', '\t',
    ];
    let len = rng.gen_range(1..12);
    (0..len).map(|_| *POOL.choose(rng).unwrap()).collect()
}

pub fn random_action(rng: &mut impl Rng) -> Action {
    match rng.gen_range(0..5) {
        0 => Action::noop(),
        1 | 2 => Action::search(random_arg(rng)),
        _ => Action::click(random_arg(rng)),
    }
}

/// Independent renderer: verb, then `["` + escaped argument + `"]`.
pub fn oracle_render(a: &Action) -> String {
    match a.arg() {
        None => a.verb().as_str().to_string(),
        Some(arg) => {
            let escaped = arg.replace('\\', "\\\\").replace('"', "\\\"");
            format!("{}[\"{escaped}\"]", a.verb().as_str())
        }
    }
}

/// Random edits of a valid rendering.
pub fn mutate(rng: &mut impl Rng, s: &str) -> String {
    const NOISE: &[char] = &['"', '\\', '[', ']', ' ', 'x', '*', 'n', '\n', 'ü'];
    let mut chars: Vec<char> = s.chars().collect();
    for _ in 0..rng.gen_range(1..4) {
        let pos = rng.gen_range(0..=chars.len());
        match rng.gen_range(0..3) {
            0 => chars.insert(pos, *NOISE.choose(rng).unwrap()),
            1 if !chars.is_empty() => {
                chars.remove(pos.min(chars.len() - 1));
            }
            _ if !chars.is_empty() => {
                let i = pos.min(chars.len() - 1);
                chars[i] = *NOISE.choose(rng).unwrap();
            }
            _ => chars.push('x'),
        }
    }
    chars.into_iter().collect()
}

// ---------------------------------------------------------------- retrieval

const FNV_OFFSET: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;

pub fn fnv(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub fn oracle_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in s.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Integer bucket counts of the hashed bag of tokens.
pub fn counts(text: &str, dim: usize) -> BTreeMap<usize, u64> {
    let mut m = BTreeMap::new();
    for t in oracle_tokens(text) {
        *m.entry((fnv(t.as_bytes()) % dim as u64) as usize).or_insert(0) += 1;
    }
    m
}

/// Exact cosine as (dot, |item|^2); the query norm is shared by all items so
/// it drops out of comparisons.
fn exact_score(q: &BTreeMap<usize, u64>, item: &BTreeMap<usize, u64>) -> (u128, u128) {
    let dot: u64 = q.iter().map(|(b, c)| c * item.get(b).copied().unwrap_or(0)).sum();
    let norm: u64 = item.values().map(|c| c * c).sum();
    (dot as u128, norm as u128)
}

/// Brute-force retrieval: items of `kind` with cosine strictly above 1/10,
/// best first, newer first on exact ties, then id. `window` decides the
/// kind of each item independently of what the store says.
pub fn oracle_retrieve(
    items: &[MemoryItem],
    window: usize,
    query: &str,
    kind: MemoryKind,
    k: usize,
    dim: usize,
) -> Vec<u64> {
    let q = counts(query, dim);
    let qn: u128 = q.values().map(|c| (c * c) as u128).sum();
    if qn == 0 {
        return vec![];
    }
    let first_short = items.len().saturating_sub(window);
    let mut hits: Vec<(u128, u128, Timestamp, u64)> = items
        .iter()
        .enumerate()
        .filter(|(i, _)| (*i >= first_short) == (kind == MemoryKind::ShortTerm))
        .filter_map(|(_, it)| {
            let (d, n) = exact_score(&q, &counts(&it.text, dim));
            // d / sqrt(n * qn) > 1/10  <=>  100 d^2 > n qn
            (n > 0 && 100 * d * d > n * qn).then_some((d, n, it.stored_at, it.id))
        })
        .collect();
    hits.sort_by(|a, b| {
        // a before b when d_a^2 n_b > d_b^2 n_a
        (b.0 * b.0 * a.1)
            .cmp(&(a.0 * a.0 * b.1))
            .then_with(|| b.2.cmp(&a.2))
            .then_with(|| a.3.cmp(&b.3))
    });
    hits.into_iter().take(k).map(|h| h.3).collect()
}

pub const VOCAB: &[&str] = &[
    "tea", "green", "organic", "coat", "wool", "shoes", "running", "size", "click", "search",
    "buy", "now", "results", "sausage", "gift", "box", "navy", "cotton", "bottle", "water",
];

pub fn random_text(rng: &mut impl Rng, max_words: usize) -> String {
    let n = rng.gen_range(1..=max_words);
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------- dispatcher

/// One adversarial selection case with the outcome the contract requires.
pub struct DispatchCase {
    pub event: Event,
    pub provider: Arc<ScriptedProvider>,
    /// Expected candidates after filtering; `None` when the candidate stage
    /// fails at the provider.
    pub expected_candidates: Option<Vec<Action>>,
    pub expected_choice: Action,
}

fn valid_pool() -> Vec<Action> {
    vec![
        Action::search("tea"),
        Action::search("green tea"),
        Action::click("P01"),
        Action::click("P02"),
        Action::click("Buy Now"),
        Action::click("Back"),
        Action::click("navy"),
        Action::noop(),
    ]
}

const BAD_ACTIONS: &[&str] = &[
    "jump", "click[P01]", "search[\"\"]", "click[\"x\"", "noop[\"x\"]", "search[*]", "CLICK[\"a\"]",
    "click [\"a\"]", "click[\"a\"] extra", "", "click[\"bad\\q\"]",
];

pub fn dispatch_case(rng: &mut impl Rng, n: usize) -> DispatchCase {
    let pool = valid_pool();

    // availability: unconstrained, wildcard, or an explicit subset
    let available: Vec<ActionPattern> = match rng.gen_range(0..3) {
        0 => vec![],
        1 => vec![ActionPattern::AnyArg(Verb::Search), ActionPattern::Exact(Action::click("P01"))],
        _ => {
            let take = rng.gen_range(1..pool.len());
            pool.choose_multiple(rng, take)
            .cloned()
                .map(ActionPattern::Exact)
                .collect()
        }
    };
    let permitted = |a: &Action| {
        available.is_empty()
            || available.iter().any(|p| match p {
                ActionPattern::Exact(x) => x == a,
                ActionPattern::AnyArg(v) => a.verb() == *v && !a.is_noop(),
            })
    };

    // proposals: (text, parsed action when grammatical)
    let mut proposals: Vec<(String, Option<Action>)> = Vec::new();
    for _ in 0..rng.gen_range(0..10) {
        if rng.gen_bool(0.7) {
            let a = pool.choose(rng).unwrap().clone();
            proposals.push((oracle_render(&a), Some(a)));
        } else {
            proposals.push((BAD_ACTIONS.choose(rng).unwrap().to_string(), None));
        }
    }

    let mut decodable = false;
    let candidate_reply: Option<String> = match rng.gen_range(0..10) {
        0 => None, // provider failure
        1 => Some("I think you should click the button".into()),
        2 => Some("{\"action\": \"noop\"}".into()),
        _ => {
            decodable = true;
            let items: Vec<serde_json::Value> = proposals
                .iter()
                .map(|(t, _)| {
                    if rng.gen_bool(0.5) {
                        serde_json::json!({"action": t, "rationale": "r"})
                    } else {
                        serde_json::json!(t)
                    }
                })
                .collect();
            let body = serde_json::Value::Array(items).to_string();
            Some(if rng.gen_bool(0.2) { format!("```json\n{body}\n```") } else { body })
        }
    };

    let expected_candidates = candidate_reply.as_ref().map(|_| {
        let mut out: Vec<Action> = Vec::new();
        if decodable {
            for (_, parsed) in &proposals {
                if let Some(a) = parsed {
                    if permitted(a) && !out.contains(a) && out.len() < 5 {
                        out.push(a.clone());
                    }
                }
            }
        }
        out
    });

    let m = expected_candidates.as_ref().map_or(0, Vec::len);
    let (dispatch_reply, expected_index): (Option<String>, Option<usize>) = match rng.gen_range(0..12) {
        0 => (None, None),
        1 => (Some("noop".into()), None),
        2 => (Some("0".into()), None),
        3 => (Some(format!("{}", m + 1)), None),
        4 => (Some("-1".into()), None),
        5 => (Some("1 2".into()), None),
        6 => (Some("click[\"P01\"]".into()), None),
        7 => (Some("first".into()), None),
        8 => (Some("99999999999999999999999".into()), None),
        _ if m > 0 => {
            let i = rng.gen_range(1..=m);
            let pad = if rng.gen_bool(0.3) { " \n" } else { "" };
            (Some(format!("{pad}{i}{pad}")), Some(i - 1))
        }
        _ => (Some("1".into()), None),
    };

    let expected_choice = match (&expected_candidates, expected_index) {
        (Some(c), Some(i)) => c[i].clone(),
        _ => Action::noop(),
    };

    let reply = |r: Option<String>| match r {
        Some(t) => Reply::Text(t),
        None => Reply::Fail("injected".into()),
    };
    let entries = vec![
        ScriptEntry {
            matcher: CANDIDATE_HEADER.into(),
            reply: reply(candidate_reply),
            once: false,
        },
        ScriptEntry {
            matcher: DISPATCH_HEADER.into(),
            reply: reply(dispatch_reply),
            once: false,
        },
    ];

    let mut event = bare_event(&format!("case-{n}"), 100);
    event.available_actions = available;
    DispatchCase {
        event,
        provider: Arc::new(ScriptedProvider::new(Script::new(entries))),
        expected_candidates,
        expected_choice,
    }
}

pub fn virtual_clock() -> Arc<Clock> {
    Arc::new(Clock::virtual_ms())
}

// ---------------------------------------------------------------- reward

/// Hand-computed reward cases on the fixture data:
/// (task, product, chosen options, numerator, denominator).
pub const REWARD_CASES: &[(&str, &str, &[(&str, &str)], u32, u32)] = &[
    // T01: 3 attrs, 1 option, cap 30 -> denominator 5
    ("T01", "P01", &[("size", "24 oz")], 5, 5),
    ("T01", "P01", &[("size", "12 oz")], 4, 5),
    ("T01", "P01", &[], 4, 5),
    ("T01", "P02", &[], 2, 5),
    // T02: 2 attrs, no options, cap 15 -> 3
    ("T02", "P02", &[], 3, 3),
    ("T02", "P01", &[("size", "24 oz")], 1, 3),
    ("T02", "P12", &[], 1, 3),
    // T03: 2 attrs, 1 option, cap 10 -> 4
    ("T03", "P03", &[("count", "100")], 4, 4),
    ("T03", "P03", &[("count", "50")], 3, 4),
    ("T03", "P04", &[], 1, 4),
    // T05: 2 attrs, 2 options, cap 20 -> 5
    ("T05", "P05", &[("color", "navy"), ("size", "L")], 5, 5),
    ("T05", "P05", &[("color", "navy"), ("size", "M")], 4, 5),
    ("T05", "P05", &[], 3, 5),
    ("T05", "P06", &[("color", "grey"), ("size", "8")], 0, 5),
    // T08: 2 attrs, 2 options, cap 150 -> 5
    ("T08", "P08", &[("color", "camel"), ("size", "medium")], 4, 5),
    ("T08", "P11", &[("color", "black")], 1, 5),
    // T07: 2 attrs, 1 option, cap 100 -> 4
    ("T07", "P07", &[("size", "9")], 3, 4),
    ("T07", "P06", &[("size", "8")], 1, 4),
];
