//! Deterministic WebShop-style environment.
//!
//! Pages form a small state machine:
//!
//! ```text
//! search_home --search[q]--> results --click[id]--> product --click["Buy Now"]--> done
//!                  ^            |  ^                  |  |
//!                  +--search[q]-+  +---click["Back"]--+  +--click[option value] (stays)
//! ```
//!
//! `noop` leaves the page unchanged but still costs a step; reaching the step
//! cap ends the episode with reward 0.

mod catalog;
mod env;
mod policy;

use thiserror::Error;

pub use catalog::{
    load_catalog, load_tasks, parse_catalog, parse_product_line, parse_task_line, parse_tasks,
    Catalog, Product, TaskSpec, BACK, BUY_NOW,
};
pub use env::{
    overlap_score, rank_products, reward, selected_line, Page, ShopConfig, ShopEnv, ShopState,
    StepOutcome, DEFAULT_STEP_CAP, DEFAULT_TOP_K,
};
pub use policy::{best_purchase, optimal_script, single_shot_script};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShopError {
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("action {0} is not available on this page")]
    IllegalAction(String),
    #[error("episode is over")]
    EpisodeOver,
    #[error("invalid product {id}: {reason}")]
    InvalidProduct { id: String, reason: String },
    #[error("invalid task {id}: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("product {0} cannot be reached by search")]
    Unreachable(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
