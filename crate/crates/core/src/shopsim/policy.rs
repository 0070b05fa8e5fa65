//! Scripted providers for shop episodes.
//!
//! Both policies answer event generation with the task instruction and
//! dispatch with candidate `1`; they differ only in how candidates are
//! proposed:
//!
//! * **optimal** keys each proposal on what the current page shows (the
//!   search page, the results for its query, the product page with the
//!   options picked so far), so it reacts to observations and feedback.
//! * **single-shot** writes its whole plan at reset from the instruction
//!   alone and replays it blindly: search with the instruction, click the
//!   hit it expects, buy. It never sees the product page, so it never picks
//!   options.

use serde_json::json;

use crate::decision::{CANDIDATE_HEADER, DISPATCH_HEADER};
use crate::model::{render_action, Action};
use crate::pipeline::EVENT_STAGE_HEADER;
use crate::provider::{Script, ScriptEntry};

use super::catalog::{Catalog, Product, TaskSpec, BUY_NOW};
use super::env::{rank_products, reward, selected_line};
use super::ShopError;

/// The product and option choices with the highest reward for `spec`, ties
/// broken by product id.
pub fn best_purchase<'a>(
    spec: &TaskSpec,
    catalog: &'a Catalog,
) -> Option<(&'a Product, Vec<(String, String)>)> {
    let mut best: Option<(f64, &Product, Vec<(String, String)>)> = None;
    for p in catalog.products() {
        let picks: Vec<(String, String)> = spec
            .target_options
            .iter()
            .filter(|(k, v)| p.options.get(*k).is_some_and(|vals| vals.contains(v)))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let r = reward(p, &picks.iter().cloned().collect(), spec);
        if best.as_ref().is_none_or(|(br, _, _)| r > *br) {
            best = Some((r, p, picks));
        }
    }
    best.map(|(_, p, picks)| (p, picks))
}

fn event_entry(spec: &TaskSpec) -> ScriptEntry {
    let reply = json!([{"intent": spec.instruction, "instruction": spec.instruction}]);
    ScriptEntry::text(EVENT_STAGE_HEADER, reply.to_string())
}

fn propose(action: &Action, rationale: &str) -> String {
    json!([{"action": render_action(action), "rationale": rationale}]).to_string()
}

fn candidate(matcher: String, action: Action, rationale: &str) -> ScriptEntry {
    ScriptEntry::once(matcher, propose(&action, rationale))
}

/// Reactive plan reaching the best purchase for `spec`.
pub fn optimal_script(spec: &TaskSpec, catalog: &Catalog, top_k: usize) -> Result<Script, ShopError> {
    let (product, picks) = best_purchase(spec, catalog).ok_or(ShopError::EmptyCatalog)?;

    let query = [product.title.clone()]
        .into_iter()
        .chain(std::iter::once(format!(
            "{} {}",
            product.title,
            product.attributes.iter().cloned().collect::<Vec<_>>().join(" ")
        )))
        .find(|q| rank_products(catalog, q, top_k).iter().any(|(id, _)| *id == product.id))
        .ok_or_else(|| ShopError::Unreachable(product.id.clone()))?;

    let mut entries = vec![
        event_entry(spec),
        ScriptEntry::text(DISPATCH_HEADER, "1"),
        candidate("[search_home]".into(), Action::search(query.clone()), "look up the target product"),
        candidate(
            format!("[results] Results for \"{query}\""),
            Action::click(product.id.clone()),
            "open the matching product",
        ),
    ];

    let mut chosen = std::collections::BTreeMap::new();
    let mut page_marker = format!("[product] {}:", product.id);
    for (key, value) in &picks {
        entries.push(candidate(
            page_marker.clone(),
            Action::click(value.clone()),
            &format!("select {key}"),
        ));
        chosen.insert(key.clone(), value.clone());
        page_marker = format!("Selected: {}", selected_line(&chosen));
    }
    entries.push(candidate(page_marker, Action::click(BUY_NOW), "all requirements met"));
    Ok(Script::new(entries).with_default("[]"))
}

/// Blind plan written once from the instruction.
pub fn single_shot_script(spec: &TaskSpec, catalog: &Catalog, top_k: usize) -> Script {
    let mut plan = vec![Action::search(spec.instruction.clone())];
    if let Some((id, _)) = rank_products(catalog, &spec.instruction, top_k).into_iter().next() {
        plan.push(Action::click(id));
    }
    plan.push(Action::click(BUY_NOW));

    let mut entries = vec![event_entry(spec), ScriptEntry::text(DISPATCH_HEADER, "1")];
    entries.extend(
        plan.into_iter()
            .map(|a| candidate(CANDIDATE_HEADER.into(), a, "planned at reset")),
    );
    Script::new(entries).with_default("[]")
}
