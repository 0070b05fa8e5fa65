use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::memory::tokenize;
use crate::model::{Action, ActionPattern, Verb};

use super::catalog::{Catalog, Product, TaskSpec, BACK, BUY_NOW};
use super::ShopError;

pub const DEFAULT_STEP_CAP: u32 = 15;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Page {
    SearchHome,
    Results,
    Product,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShopState {
    pub page: Page,
    pub query: Option<String>,
    pub results: Vec<String>,
    pub selected: Option<String>,
    pub chosen_options: BTreeMap<String, String>,
    pub steps: u32,
    pub step_cap: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShopConfig {
    pub step_cap: u32,
    pub top_k: usize,
}

impl Default for ShopConfig {
    fn default() -> Self {
        Self {
            step_cap: DEFAULT_STEP_CAP,
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: String,
    pub available: Vec<ActionPattern>,
    pub done: bool,
    /// Set once the episode ends.
    pub reward: Option<f64>,
}

/// Distinct query tokens that also occur in the product's title or
/// attributes.
pub fn overlap_score(query: &str, product: &Product) -> usize {
    let q: BTreeSet<String> = tokenize(query).into_iter().collect();
    let mut text = product.title.clone();
    for a in &product.attributes {
        text.push(' ');
        text.push_str(a);
    }
    let p: BTreeSet<String> = tokenize(&text).into_iter().collect();
    q.intersection(&p).count()
}

/// Products with a positive overlap score, best first, ties by id
/// ascending, at most `top_k`.
pub fn rank_products(catalog: &Catalog, query: &str, top_k: usize) -> Vec<(String, usize)> {
    let mut scored: Vec<(String, usize)> = catalog
        .products()
        .map(|p| (p.id.clone(), overlap_score(query, p)))
        .filter(|(_, s)| *s > 0)
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(top_k);
    scored
}

/// Purchase reward in [0, 1]:
///
/// `(|attrs ∩ target_attrs| + |matching option pairs| + price_ok)
///   / (|target_attrs| + |target_options| + 1)`
pub fn reward(product: &Product, chosen_options: &BTreeMap<String, String>, spec: &TaskSpec) -> f64 {
    let attr_hits = product
        .attributes
        .intersection(&spec.target_attributes)
        .count();
    let option_hits = spec
        .target_options
        .iter()
        .filter(|(k, v)| chosen_options.get(*k) == Some(*v))
        .count();
    let price_ok = usize::from(product.price <= spec.price_cap);
    let denom = spec.target_attributes.len() + spec.target_options.len() + 1;
    (attr_hits + option_hits + price_ok) as f64 / denom as f64
}

/// One shopping episode.
#[derive(Debug, Clone)]
pub struct ShopEnv {
    catalog: Arc<Catalog>,
    spec: TaskSpec,
    config: ShopConfig,
    state: ShopState,
    reward: Option<f64>,
    bought: bool,
}

impl ShopEnv {
    /// Starts an episode on the search page. Returns the environment, the
    /// first observation and the available patterns (`search[*]`).
    pub fn reset(
        spec: TaskSpec,
        catalog: Arc<Catalog>,
        config: ShopConfig,
    ) -> Result<(Self, String, Vec<ActionPattern>), ShopError> {
        if catalog.is_empty() {
            return Err(ShopError::EmptyCatalog);
        }
        let env = Self {
            catalog,
            spec,
            config,
            state: ShopState {
                page: Page::SearchHome,
                query: None,
                results: Vec::new(),
                selected: None,
                chosen_options: BTreeMap::new(),
                steps: 0,
                step_cap: config.step_cap,
            },
            reward: None,
            bought: false,
        };
        let obs = env.observation();
        let avail = env.available();
        Ok((env, obs, avail))
    }

    pub fn state(&self) -> &ShopState {
        &self.state
    }

    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn is_done(&self) -> bool {
        self.state.page == Page::Done
    }

    /// Final reward once done.
    pub fn final_reward(&self) -> Option<f64> {
        self.reward
    }

    fn selected_product(&self) -> Option<&Product> {
        self.state
            .selected
            .as_deref()
            .and_then(|id| self.catalog.get(id))
    }

    /// Advertised patterns for the current page. `noop` is accepted on every
    /// page before the episode ends and is not listed.
    pub fn available(&self) -> Vec<ActionPattern> {
        match self.state.page {
            Page::SearchHome => vec![ActionPattern::AnyArg(Verb::Search)],
            Page::Results => {
                let mut v = vec![ActionPattern::AnyArg(Verb::Search)];
                v.extend(
                    self.state
                        .results
                        .iter()
                        .map(|id| ActionPattern::Exact(Action::click(id.clone()))),
                );
                v
            }
            Page::Product => {
                let mut v = vec![
                    ActionPattern::Exact(Action::click(BUY_NOW)),
                    ActionPattern::Exact(Action::click(BACK)),
                ];
                if let Some(p) = self.selected_product() {
                    for values in p.options.values() {
                        v.extend(
                            values
                                .iter()
                                .map(|val| ActionPattern::Exact(Action::click(val.clone()))),
                        );
                    }
                }
                v
            }
            Page::Done => Vec::new(),
        }
    }

    pub fn accepts(&self, a: &Action) -> bool {
        if self.is_done() {
            return false;
        }
        a.is_noop() || self.available().iter().any(|p| p.matches(a))
    }

    pub fn step(&mut self, a: &Action) -> Result<StepOutcome, ShopError> {
        if self.is_done() {
            return Err(ShopError::EpisodeOver);
        }
        if !self.accepts(a) {
            return Err(ShopError::IllegalAction(a.render()));
        }
        self.state.steps += 1;
        let arg = a.arg().unwrap_or_default().to_string();
        match (self.state.page, a.verb()) {
            (_, Verb::Noop) => {}
            (Page::SearchHome | Page::Results, Verb::Search) => {
                self.state.results = rank_products(&self.catalog, &arg, self.config.top_k)
                    .into_iter()
                    .map(|(id, _)| id)
                    .collect();
                self.state.query = Some(arg);
                self.state.page = Page::Results;
            }
            (Page::Results, Verb::Click) => {
                self.state.selected = Some(arg);
                self.state.chosen_options.clear();
                self.state.page = Page::Product;
            }
            (Page::Product, Verb::Click) if arg == BUY_NOW => {
                let product = self.selected_product().expect("product page has a selection");
                let r = reward(product, &self.state.chosen_options, &self.spec);
                self.reward = Some(r);
                self.bought = true;
                self.state.page = Page::Done;
            }
            (Page::Product, Verb::Click) if arg == BACK => {
                self.state.selected = None;
                self.state.chosen_options.clear();
                self.state.page = Page::Results;
            }
            (Page::Product, Verb::Click) => {
                let product = self.selected_product().expect("product page has a selection");
                let key = product
                    .option_for_value(&arg)
                    .expect("advertised option value")
                    .to_string();
                self.state.chosen_options.insert(key, arg);
            }
            (page, verb) => unreachable!("{verb} accepted on {page:?}"),
        }
        if !self.is_done() && self.state.steps >= self.state.step_cap {
            self.reward = Some(0.0);
            self.state.page = Page::Done;
        }
        Ok(StepOutcome {
            observation: self.observation(),
            available: self.available(),
            done: self.is_done(),
            reward: self.reward,
        })
    }

    /// Text rendering of the current page. Every page starts with a
    /// `[page]` marker line.
    pub fn observation(&self) -> String {
        let mut out = String::new();
        let instr = &self.spec.instruction;
        match self.state.page {
            Page::SearchHome => {
                let _ = writeln!(out, "[search_home] WebShop");
                let _ = writeln!(out, "Instruction: {instr}");
                out.push_str("Use search[\"<query>\"] to look for products.");
            }
            Page::Results => {
                let q = self.state.query.as_deref().unwrap_or_default();
                let _ = writeln!(
                    out,
                    "[results] Results for \"{q}\" ({} shown)",
                    self.state.results.len()
                );
                let _ = writeln!(out, "Instruction: {instr}");
                if self.state.results.is_empty() {
                    out.push_str("No matching products.");
                }
                let lines: Vec<String> = self
                    .state
                    .results
                    .iter()
                    .enumerate()
                    .filter_map(|(i, id)| {
                        self.catalog.get(id).map(|p| {
                            format!("{}. {} | {} | ${:.2}", i + 1, p.id, p.title, p.price)
                        })
                    })
                    .collect();
                out.push_str(&lines.join("\n"));
            }
            Page::Product => {
                let Some(p) = self.selected_product() else {
                    return out;
                };
                let _ = writeln!(out, "[product] {}: {}", p.id, p.title);
                let _ = writeln!(out, "Instruction: {instr}");
                let _ = writeln!(out, "Price: ${:.2}", p.price);
                let attrs: Vec<&str> = p.attributes.iter().map(String::as_str).collect();
                let _ = writeln!(out, "Attributes: {}", attrs.join(", "));
                let opts: Vec<String> = p
                    .options
                    .iter()
                    .map(|(k, vs)| format!("{k}: {}", vs.join(", ")))
                    .collect();
                let _ = writeln!(
                    out,
                    "Options: {}",
                    if opts.is_empty() { "(none)".into() } else { opts.join("; ") }
                );
                let _ = writeln!(out, "Selected: {}", selected_line(&self.state.chosen_options));
                let rendered: Vec<String> = self.available().iter().map(|a| a.render()).collect();
                out.push_str(&format!("Actions: {}", rendered.join(", ")));
            }
            Page::Done => {
                let r = self.reward.unwrap_or(0.0);
                match &self.state.selected {
                    Some(id) if self.bought => {
                        let title = self.catalog.get(id).map(|p| p.title.as_str()).unwrap_or("");
                        let _ = writeln!(out, "[done] Purchased {id}: {title}");
                        let _ = writeln!(out, "Selected: {}", selected_line(&self.state.chosen_options));
                    }
                    _ => {
                        let _ = writeln!(out, "[done] Step limit reached without a purchase.");
                    }
                }
                let _ = write!(out, "Reward: {r:.3}");
            }
        }
        out
    }

    /// Whether the episode ended with a purchase.
    pub fn bought(&self) -> bool {
        self.bought
    }
}

/// `color=red, size=M`, or `(none)`.
pub fn selected_line(chosen: &BTreeMap<String, String>) -> String {
    if chosen.is_empty() {
        return "(none)".into();
    }
    chosen
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}
