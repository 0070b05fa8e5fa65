//! Action execution.
//!
//! An effector runs actions against one environment and reports a
//! [`Feedback`]. Every effector executes `noop` as a no-effect success, so the
//! dispatcher's noop fallback can never trip a capability check.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, MutexGuard};

use thiserror::Error;

use crate::model::{Action, Clock, Feedback, RawInput, Source, Timestamp, Verb};
use crate::shopsim::{ShopEnv, ShopError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EffectorError {
    #[error("effector `{effector}` cannot execute `{verb}`")]
    CapabilityMismatch { effector: String, verb: Verb },
    #[error("no effector bound for `{0}`")]
    Unbound(Verb),
}

pub trait Effector: Send {
    fn name(&self) -> &str;

    /// Verbs this effector executes besides `noop`.
    fn capabilities(&self) -> &BTreeSet<Verb>;

    fn execute(&mut self, action: &Action, clock: &Clock) -> Result<Feedback, EffectorError>;

    fn can_execute(&self, verb: Verb) -> bool {
        verb == Verb::Noop || self.capabilities().contains(&verb)
    }
}

fn mismatch(effector: &dyn Effector, verb: Verb) -> EffectorError {
    EffectorError::CapabilityMismatch {
        effector: effector.name().to_string(),
        verb,
    }
}

/// Effector with no environment. It accepts its capability set and reports
/// `noop` as the outcome of everything; handy as a placeholder binding.
#[derive(Debug, Default)]
pub struct NullEffector {
    capabilities: BTreeSet<Verb>,
}

impl NullEffector {
    pub fn new(capabilities: impl IntoIterator<Item = Verb>) -> Self {
        Self {
            capabilities: capabilities.into_iter().collect(),
        }
    }
}

impl Effector for NullEffector {
    fn name(&self) -> &str {
        "null"
    }

    fn capabilities(&self) -> &BTreeSet<Verb> {
        &self.capabilities
    }

    fn execute(&mut self, action: &Action, clock: &Clock) -> Result<Feedback, EffectorError> {
        if !self.can_execute(action.verb()) {
            return Err(mismatch(self, action.verb()));
        }
        Ok(Feedback {
            action: action.clone(),
            outcome: "noop".into(),
            success: true,
            emitted_at: clock.now(),
        })
    }
}

/// Shared handle to one episode's shop. The effector is the only writer.
pub type ShopHandle = Arc<Mutex<ShopEnv>>;

/// Built-in binding for the shop simulator. The outcome text is the page
/// observation after the step, so the next event sees where the action led.
pub struct ShopEffector {
    env: ShopHandle,
    capabilities: BTreeSet<Verb>,
}

impl ShopEffector {
    pub fn new(env: ShopEnv) -> Self {
        Self::with_capabilities(env, [Verb::Search, Verb::Click])
    }

    pub fn with_capabilities(env: ShopEnv, capabilities: impl IntoIterator<Item = Verb>) -> Self {
        Self {
            env: Arc::new(Mutex::new(env)),
            capabilities: capabilities.into_iter().collect(),
        }
    }

    pub fn handle(&self) -> ShopHandle {
        Arc::clone(&self.env)
    }

    fn env(&self) -> MutexGuard<'_, ShopEnv> {
        self.env.lock().expect("shop env poisoned")
    }
}

impl std::fmt::Debug for ShopEffector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShopEffector")
            .field("capabilities", &self.capabilities)
            .finish_non_exhaustive()
    }
}

impl Effector for ShopEffector {
    fn name(&self) -> &str {
        "shopsim"
    }

    fn capabilities(&self) -> &BTreeSet<Verb> {
        &self.capabilities
    }

    fn execute(&mut self, action: &Action, clock: &Clock) -> Result<Feedback, EffectorError> {
        if !self.can_execute(action.verb()) {
            return Err(mismatch(self, action.verb()));
        }
        let mut env = self.env();
        let (outcome, success) = match env.step(action) {
            Ok(out) => (out.observation, true),
            // Environment errors are reported, not raised.
            Err(e @ (ShopError::IllegalAction(_) | ShopError::EpisodeOver)) => {
                (format!("error: {e}\n{}", env.observation()), false)
            }
            Err(e) => (format!("error: {e}"), false),
        };
        Ok(Feedback {
            action: action.clone(),
            outcome,
            success,
            emitted_at: clock.now(),
        })
    }
}

/// Routes actions to effectors by verb. `noop` goes to the first registered
/// effector.
#[derive(Default)]
pub struct EffectorRegistry {
    effectors: Vec<Box<dyn Effector>>,
    by_verb: BTreeMap<Verb, usize>,
}

impl EffectorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds every verb in the effector's capability set. Later registrations
    /// take over verbs already bound.
    pub fn register(&mut self, effector: Box<dyn Effector>) {
        let index = self.effectors.len();
        for verb in effector.capabilities() {
            self.by_verb.insert(*verb, index);
        }
        self.effectors.push(effector);
    }

    pub fn bound_verbs(&self) -> Vec<Verb> {
        self.by_verb.keys().copied().collect()
    }

    pub fn execute(&mut self, action: &Action, clock: &Clock) -> Result<Feedback, EffectorError> {
        let index = match action.verb() {
            Verb::Noop if !self.effectors.is_empty() => 0,
            verb => *self.by_verb.get(&verb).ok_or(EffectorError::Unbound(verb))?,
        };
        self.effectors[index].execute(action, clock)
    }
}

impl std::fmt::Debug for EffectorRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.effectors.iter().map(|e| e.name()).collect();
        f.debug_struct("EffectorRegistry")
            .field("effectors", &names)
            .field("by_verb", &self.by_verb)
            .finish()
    }
}

/// Feedback re-enters the pipeline as raw input, whatever the outcome.
pub fn feedback_to_input(f: &Feedback, received_at: Timestamp) -> RawInput {
    RawInput {
        source: Source::Feedback,
        payload: format!("{} -> {}", f.action.render(), f.outcome),
        received_at,
    }
}
