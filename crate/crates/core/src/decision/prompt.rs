use std::fmt::Write;

use crate::memory::MemoryContext;
use crate::model::Event;

use super::CandidateSet;

pub const CANDIDATE_HEADER: &str = "## Candidate generation";
pub const DISPATCH_HEADER: &str = "## Dispatch";
pub const CANDIDATE_TEMPLATE: &str = include_str!("../../assets/prompts/candidate_generator.txt");
pub const DISPATCH_TEMPLATE: &str = include_str!("../../assets/prompts/dispatcher.txt");

fn list(out: &mut String, title: &str, items: impl IntoIterator<Item = impl AsRef<str>>) {
    let _ = writeln!(out, "{title}:");
    let mut any = false;
    for item in items {
        any = true;
        let _ = writeln!(out, "- {}", item.as_ref());
    }
    if !any {
        out.push_str("- (none)\n");
    }
}

fn event_block(out: &mut String, e: &Event) {
    let _ = writeln!(out, "event: {} ({})", e.id, e.source);
    let _ = writeln!(out, "intent: {}", e.intent);
    if !e.instruction.is_empty() {
        let _ = writeln!(out, "instruction: {}", e.instruction);
    }
    list(out, "observations", &e.observations);
    if e.available_actions.is_empty() {
        out.push_str("available actions: any\n");
    } else {
        let rendered: Vec<String> = e.available_actions.iter().map(|p| p.render()).collect();
        let _ = writeln!(out, "available actions: {}", rendered.join(", "));
    }
}

fn context_block(out: &mut String, ctx: &MemoryContext, tasks: &[String]) {
    list(out, "active tasks", tasks);
    list(out, "memory (old facts)", &ctx.old_facts);
    list(out, "memory (short term)", &ctx.short_term);
}

pub fn candidate_prompt(e: &Event, ctx: &MemoryContext, peers: &[Event], tasks: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CANDIDATE_HEADER}");
    event_block(&mut out, e);
    context_block(&mut out, ctx, tasks);
    list(
        &mut out,
        "other pending events",
        peers.iter().map(|p| format!("[{}] {}", p.source, p.intent)),
    );
    out
}

pub fn dispatch_prompt(e: &Event, cs: &CandidateSet, ctx: &MemoryContext, tasks: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DISPATCH_HEADER}");
    event_block(&mut out, e);
    context_block(&mut out, ctx, tasks);
    out.push_str("candidates:\n");
    for (i, (a, why)) in cs.candidates.iter().zip(&cs.rationales).enumerate() {
        if why.is_empty() {
            let _ = writeln!(out, "{}. {}", i + 1, a);
        } else {
            let _ = writeln!(out, "{}. {} ({})", i + 1, a, why);
        }
    }
    out
}
