//! Event production: the time-ordered queue, the provider-backed event
//! generator and autonomous timer sources.

mod generator;
mod queue;
mod timer;

use thiserror::Error;

pub use generator::{
    parse_event_reply, strip_code_fence, EventGenerator, DEFAULT_K_MAX,
    DEFAULT_TEMPLATE as EVENT_TEMPLATE, STAGE_HEADER as EVENT_STAGE_HEADER,
};
pub use queue::{Admission, EventQueue, Popped, DEFAULT_CAPACITY, DEFAULT_TTL};
pub use timer::{TimerSource, TimerStream};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("timer interval must be positive")]
    ZeroInterval,
}
