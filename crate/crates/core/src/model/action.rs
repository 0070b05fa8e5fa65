//! Action grammar.
//!
//! ```text
//! action  := ws* ( "noop" | verb "[" string "]" ) ws*
//! verb    := "search" | "click"
//! string  := '"' ( char-except-quote-or-backslash | '\"' | '\\' )+ '"'
//! pattern := action | verb "[*]"
//! ```
//!
//! Verbs are lowercase and case-sensitive. The argument must be non-empty.
//! Rendering is canonical, so `parse(render(a)) == a` and
//! `render(parse(s)) == s.trim()` for every accepted `s`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verb {
    Search,
    Click,
    Noop,
}

impl Verb {
    pub const ALL: [Verb; 3] = [Verb::Search, Verb::Click, Verb::Noop];

    pub fn as_str(&self) -> &'static str {
        match self {
            Verb::Search => "search",
            Verb::Click => "click",
            Verb::Noop => "noop",
        }
    }

    pub fn takes_argument(&self) -> bool {
        !matches!(self, Verb::Noop)
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ParseReason;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "search" => Ok(Verb::Search),
            "click" => Ok(Verb::Click),
            "noop" => Ok(Verb::Noop),
            _ => Err(ParseReason::UnknownVerb(s.to_string())),
        }
    }
}

/// An executable command. Construct through [`Action::search`],
/// [`Action::click`] or [`Action::noop`] so the argument invariant holds.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    verb: Verb,
    arg: Option<String>,
}

impl Action {
    pub fn new(verb: Verb, arg: Option<String>) -> Result<Self, ParseReason> {
        match (verb.takes_argument(), arg) {
            (false, None) => Ok(Self { verb, arg: None }),
            (false, Some(_)) => Err(ParseReason::UnexpectedArgument),
            (true, Some(a)) if !a.is_empty() => Ok(Self { verb, arg: Some(a) }),
            (true, _) => Err(ParseReason::EmptyArgument),
        }
    }

    pub fn noop() -> Self {
        Self {
            verb: Verb::Noop,
            arg: None,
        }
    }

    /// Panics if `query` is empty.
    pub fn search(query: impl Into<String>) -> Self {
        Self::new(Verb::Search, Some(query.into())).expect("search argument must be non-empty")
    }

    /// Panics if `target` is empty.
    pub fn click(target: impl Into<String>) -> Self {
        Self::new(Verb::Click, Some(target.into())).expect("click argument must be non-empty")
    }

    pub fn verb(&self) -> Verb {
        self.verb
    }

    pub fn arg(&self) -> Option<&str> {
        self.arg.as_deref()
    }

    pub fn is_noop(&self) -> bool {
        self.verb == Verb::Noop
    }

    pub fn render(&self) -> String {
        render_action(self)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_action(self))
    }
}

impl FromStr for Action {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_action(self))
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_action(&s).map_err(serde::de::Error::custom)
    }
}

/// What an event permits: an exact action, or any argument for a verb
/// (`click[*]`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ActionPattern {
    Exact(Action),
    AnyArg(Verb),
}

impl ActionPattern {
    pub fn matches(&self, action: &Action) -> bool {
        match self {
            ActionPattern::Exact(a) => a == action,
            ActionPattern::AnyArg(verb) => *verb == action.verb(),
        }
    }

    pub fn render(&self) -> String {
        match self {
            ActionPattern::Exact(a) => render_action(a),
            ActionPattern::AnyArg(verb) => format!("{verb}[*]"),
        }
    }
}

impl fmt::Display for ActionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<Action> for ActionPattern {
    fn from(a: Action) -> Self {
        ActionPattern::Exact(a)
    }
}

impl FromStr for ActionPattern {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pattern(s)
    }
}

impl Serialize for ActionPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for ActionPattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_pattern(&s).map_err(serde::de::Error::custom)
    }
}

/// Returns true when `patterns` is empty (unconstrained) or any pattern
/// admits `action`.
pub fn is_permitted(patterns: &[ActionPattern], action: &Action) -> bool {
    patterns.is_empty() || patterns.iter().any(|p| p.matches(action))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseReason {
    #[error("empty input")]
    Empty,
    #[error("unknown verb `{0}`")]
    UnknownVerb(String),
    #[error("expected `{0}`")]
    Expected(char),
    #[error("argument must be a double-quoted string")]
    ArgumentNotQuoted,
    #[error("unterminated string")]
    UnterminatedString,
    #[error("invalid escape `\\{0}`")]
    InvalidEscape(char),
    #[error("argument must be non-empty")]
    EmptyArgument,
    #[error("verb takes no argument")]
    UnexpectedArgument,
    #[error("wildcard not allowed here")]
    Wildcard,
    #[error("trailing characters")]
    TrailingGarbage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {position}: {reason}")]
pub struct ParseError {
    pub position: usize,
    pub reason: ParseReason,
}

impl ParseError {
    fn at(position: usize, reason: ParseReason) -> Self {
        Self { position, reason }
    }
}

pub fn parse_action(text: &str) -> Result<Action, ParseError> {
    match parse_inner(text, false)? {
        ActionPattern::Exact(a) => Ok(a),
        ActionPattern::AnyArg(_) => unreachable!("wildcards rejected when not allowed"),
    }
}

/// Parses an availability pattern: any action, or `search[*]` / `click[*]`.
pub fn parse_pattern(text: &str) -> Result<ActionPattern, ParseError> {
    parse_inner(text, true)
}

pub fn render_action(action: &Action) -> String {
    match action.arg() {
        None => action.verb().as_str().to_string(),
        Some(arg) => {
            let mut out = String::with_capacity(arg.len() + 10);
            out.push_str(action.verb().as_str());
            out.push_str("[\"");
            for c in arg.chars() {
                if c == '"' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push_str("\"]");
            out
        }
    }
}

fn parse_inner(text: &str, allow_wildcard: bool) -> Result<ActionPattern, ParseError> {
    let start = text.len() - text.trim_start().len();
    let body = text.trim();
    if body.is_empty() {
        return Err(ParseError::at(start, ParseReason::Empty));
    }
    let end = start + body.len();

    let verb_len = body
        .find(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .unwrap_or(body.len());
    let verb_text = &body[..verb_len];
    if verb_text.is_empty() {
        return Err(ParseError::at(start, ParseReason::UnknownVerb(String::new())));
    }
    let verb: Verb = verb_text
        .parse()
        .map_err(|reason| ParseError::at(start, reason))?;

    let mut pos = start + verb_len;
    if verb == Verb::Noop {
        if pos == end {
            return Ok(ActionPattern::Exact(Action::noop()));
        }
        let reason = if text[pos..].starts_with('[') {
            ParseReason::UnexpectedArgument
        } else {
            ParseReason::TrailingGarbage
        };
        return Err(ParseError::at(pos, reason));
    }

    let rest = &text[pos..end];
    if !rest.starts_with('[') {
        return Err(ParseError::at(pos, ParseReason::Expected('[')));
    }
    pos += 1;

    let rest = &text[pos..end];
    if rest.starts_with("*]") {
        if !allow_wildcard {
            return Err(ParseError::at(pos, ParseReason::Wildcard));
        }
        pos += 2;
        if pos != end {
            return Err(ParseError::at(pos, ParseReason::TrailingGarbage));
        }
        return Ok(ActionPattern::AnyArg(verb));
    }
    if !rest.starts_with('"') {
        return Err(ParseError::at(pos, ParseReason::ArgumentNotQuoted));
    }
    let open = pos;
    pos += 1;

    let mut arg = String::new();
    let mut chars = text[pos..end].char_indices();
    let close = loop {
        let Some((offset, c)) = chars.next() else {
            return Err(ParseError::at(open, ParseReason::UnterminatedString));
        };
        match c {
            '"' => break pos + offset,
            '\\' => match chars.next() {
                Some((_, e @ ('"' | '\\'))) => arg.push(e),
                Some((eo, other)) => {
                    return Err(ParseError::at(
                        pos + eo - 1,
                        ParseReason::InvalidEscape(other),
                    ))
                }
                None => return Err(ParseError::at(open, ParseReason::UnterminatedString)),
            },
            c => arg.push(c),
        }
    };
    if arg.is_empty() {
        return Err(ParseError::at(open, ParseReason::EmptyArgument));
    }
    pos = close + 1;
    if !text[pos..end].starts_with(']') {
        return Err(ParseError::at(pos, ParseReason::Expected(']')));
    }
    pos += 1;
    if pos != end {
        return Err(ParseError::at(pos, ParseReason::TrailingGarbage));
    }
    Ok(ActionPattern::Exact(Action {
        verb,
        arg: Some(arg),
    }))
}
