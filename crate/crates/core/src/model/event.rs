use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::action::{parse_pattern, Action, ActionPattern};
use super::time::{IdGen, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Sensor,
    Client,
    Timer,
    Feedback,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Sensor => "sensor",
            Source::Client => "client",
            Source::Timer => "timer",
            Source::Feedback => "feedback",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sensor" => Ok(Source::Sensor),
            "client" => Ok(Source::Client),
            "timer" => Ok(Source::Timer),
            "feedback" => Ok(Source::Feedback),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// A structured unit of change or intent driving one decision cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub ts: Timestamp,
    pub source: Source,
    pub intent: String,
    #[serde(default)]
    pub instruction: String,
    #[serde(default)]
    pub observations: Vec<String>,
    /// Empty means unconstrained.
    #[serde(default)]
    pub available_actions: Vec<ActionPattern>,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
}

impl Event {
    pub fn permits(&self, action: &Action) -> bool {
        super::action::is_permitted(&self.available_actions, action)
    }

    pub fn joined_observations(&self) -> String {
        self.observations.join(" ")
    }
}

/// Unstructured input waiting to be turned into events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInput {
    pub source: Source,
    pub payload: String,
    pub received_at: Timestamp,
}

impl RawInput {
    /// Returns `None` for an empty payload.
    pub fn new(source: Source, payload: impl Into<String>, received_at: Timestamp) -> Option<Self> {
        let payload = payload.into();
        if payload.is_empty() {
            return None;
        }
        Some(Self {
            source,
            payload,
            received_at,
        })
    }
}

/// Result of executing one action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub action: Action,
    pub outcome: String,
    pub success: bool,
    pub emitted_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid field `{field}`: {reason}")]
pub struct SchemaError {
    pub field: String,
    pub reason: String,
}

impl SchemaError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }

    fn required(field: &str) -> Self {
        Self::new(field, "required")
    }
}

/// Defaults applied to fields a raw event map leaves out.
pub struct EventDefaults<'a> {
    pub ids: &'a IdGen,
    pub now: Timestamp,
    pub source: Source,
}

/// Builds a well-formed [`Event`] from a decoded JSON object.
///
/// `intent` is required and must be a non-empty string. `id` and `ts` are
/// filled from `defaults` when absent; every other supplied field is kept
/// as given. Each `available_actions` entry must parse as an action pattern.
pub fn validate_event(raw: &Value, defaults: &EventDefaults<'_>) -> Result<Event, SchemaError> {
    let map = raw
        .as_object()
        .ok_or_else(|| SchemaError::new("$", "expected a JSON object"))?;

    let id = match map.get("id") {
        None | Some(Value::Null) => defaults.ids.next_id(),
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err(SchemaError::new("id", "expected a non-empty string")),
    };

    let ts = match map.get("ts") {
        None | Some(Value::Null) => defaults.now,
        Some(v) => serde_json::from_value::<Timestamp>(v.clone())
            .map_err(|e| SchemaError::new("ts", e.to_string()))?,
    };

    let source = match map.get("source") {
        None | Some(Value::Null) => defaults.source,
        Some(Value::String(s)) => s.parse().map_err(|e| SchemaError::new("source", e))?,
        Some(_) => return Err(SchemaError::new("source", "expected a string")),
    };

    let intent = match map.get("intent") {
        None | Some(Value::Null) => return Err(SchemaError::required("intent")),
        Some(Value::String(s)) if s.trim().is_empty() => {
            return Err(SchemaError::new("intent", "must be non-empty"))
        }
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(SchemaError::new("intent", "expected a string")),
    };

    let instruction = match map.get("instruction") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(SchemaError::new("instruction", "expected a string")),
    };

    let observations = string_list(map.get("observations"), "observations")?;

    let available_actions = string_list(map.get("available_actions"), "available_actions")?
        .iter()
        .map(|s| {
            parse_pattern(s).map_err(|e| SchemaError::new("available_actions", e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let context = match map.get("context") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(Value::Object(obj)) => obj
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => Ok((k.clone(), s.clone())),
                _ => Err(SchemaError::new("context", format!("value for `{k}` must be text"))),
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(SchemaError::new("context", "expected an object")),
    };

    Ok(Event {
        id,
        ts,
        source,
        intent,
        instruction,
        observations,
        available_actions,
        context,
    })
}

fn string_list(value: Option<&Value>, field: &str) -> Result<Vec<String>, SchemaError> {
    match value {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| SchemaError::new(field, "entries must be strings"))
            })
            .collect(),
        Some(_) => Err(SchemaError::new(field, "expected an array")),
    }
}
