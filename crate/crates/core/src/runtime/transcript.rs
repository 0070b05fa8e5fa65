use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decision::{CandidateSet, Decision};
use crate::model::{Event, Feedback, RawInput};

/// One cycle of an episode. A transcript is one of these per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub task: String,
    pub cycle: u32,
    /// Raw inputs ingested at the start of the cycle.
    pub inputs: Vec<RawInput>,
    /// Events the generator produced from those inputs.
    pub generated: Vec<String>,
    /// Event the selector worked on; absent on idle cycles.
    pub event: Option<Event>,
    pub candidates: Option<CandidateSet>,
    pub decision: Option<Decision>,
    pub feedback: Option<Feedback>,
    pub memory_version: u64,
    pub done: bool,
    pub reward: Option<f64>,
}

impl CycleRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("cycle record serializes")
    }
}

pub fn parse_line(line: &str) -> Result<CycleRecord, serde_json::Error> {
    serde_json::from_str(line)
}

/// Parses a whole transcript, skipping blank lines. Errors carry the line
/// number.
pub fn parse_transcript(text: &str) -> Result<Vec<CycleRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| parse_line(l).map_err(|e| format!("line {}: {e}", n + 1)))
        .collect()
}

fn first_line(s: &str) -> &str {
    s.lines().next().unwrap_or("")
}

/// Human-readable listing, one block per cycle.
pub fn render_transcript(records: &[CycleRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "[{}] cycle {}", r.task, r.cycle);
        for input in &r.inputs {
            let _ = writeln!(out, "  in   {:<8} {}", input.source.as_str(), first_line(&input.payload));
        }
        match (&r.event, &r.decision) {
            (Some(e), Some(d)) => {
                let _ = writeln!(out, "  evt  {} {}", e.id, first_line(&e.intent));
                if let Some(cs) = &r.candidates {
                    let list: Vec<String> = cs.candidates.iter().map(|a| a.render()).collect();
                    let _ = writeln!(out, "  cand [{}]", list.join(", "));
                }
                let _ = writeln!(out, "  pick {}", d.chosen);
            }
            _ => {
                let _ = writeln!(out, "  idle");
            }
        }
        if let Some(f) = &r.feedback {
            let status = if f.success { "ok" } else { "failed" };
            let _ = writeln!(out, "  out  {status}: {}", first_line(&f.outcome));
        }
        if r.done {
            let _ = writeln!(out, "  done reward={:.3}", r.reward.unwrap_or(0.0));
        }
    }
    out
}
