//! Event-driven agent runtime.
//!
//! Raw inputs become [`model::Event`]s, the newest event goes through a
//! two-stage selector (candidates, then dispatch), the chosen action runs on
//! an effector and the feedback goes back in as raw input. Memory is
//! refreshed after every generated event and every executed action.
//!
//! The [`shopsim`] module provides a deterministic shopping environment and
//! scripted policies, and [`runtime`] ties it all together into episodes.

pub mod decision;
pub mod effectors;
pub mod memory;
pub mod model;
pub mod pipeline;
pub mod provider;
pub mod runtime;
pub mod shopsim;
pub mod tasks;
pub mod trace;
