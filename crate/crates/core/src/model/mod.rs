//! Shared domain types and the action grammar.

mod action;
mod event;
mod time;

pub use action::{
    is_permitted, parse_action, parse_pattern, render_action, Action, ActionPattern, ParseError,
    ParseReason, Verb,
};
pub use event::{validate_event, Event, EventDefaults, Feedback, RawInput, SchemaError, Source};
pub use time::{Clock, IdGen, SystemClock, Timestamp, VirtualClock, WallClock};
