use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::decision::CANDIDATE_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    Remote,
}

/// Built-in scripted policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptPolicy {
    Optimal,
    SingleShot,
    /// Every call fails; exercises the fallback paths.
    Failing,
}

impl ScriptPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScriptPolicy::Optimal => "optimal",
            ScriptPolicy::SingleShot => "single_shot",
            ScriptPolicy::Failing => "failing",
        }
    }
}

impl std::str::FromStr for ScriptPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimal" => Ok(Self::Optimal),
            "single_shot" => Ok(Self::SingleShot),
            "failing" => Ok(Self::Failing),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKindSel {
    Local,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockKind {
    /// 1ms per reading, starting at zero. Makes transcripts reproducible.
    Virtual,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueSection {
    pub capacity: usize,
    pub ttl_ms: u64,
}

impl Default for QueueSection {
    fn default() -> Self {
        Self {
            capacity: crate::pipeline::DEFAULT_CAPACITY,
            ttl_ms: crate::pipeline::DEFAULT_TTL.as_millis() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecisionSection {
    /// Fixed; present so a config can state it explicitly.
    pub candidate_cap: usize,
    pub k_old: usize,
    pub k_short: usize,
    pub max_peers: usize,
    pub k_max_events: usize,
}

impl Default for DecisionSection {
    fn default() -> Self {
        Self {
            candidate_cap: CANDIDATE_CAP,
            k_old: crate::memory::DEFAULT_K_OLD,
            k_short: crate::memory::DEFAULT_K_SHORT,
            max_peers: crate::decision::DEFAULT_MAX_PEERS,
            k_max_events: crate::pipeline::DEFAULT_K_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySection {
    pub kind: MemoryKindSel,
    pub dim: usize,
    pub window: usize,
    pub threshold: f64,
    pub base_url: String,
    pub timeout_ms: u64,
}

impl Default for MemorySection {
    fn default() -> Self {
        Self {
            kind: MemoryKindSel::Local,
            dim: crate::memory::DEFAULT_DIM,
            window: crate::memory::DEFAULT_WINDOW,
            threshold: crate::memory::DEFAULT_THRESHOLD,
            base_url: "http://127.0.0.1:8001".into(),
            timeout_ms: 5_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub policy: ScriptPolicy,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Scripted,
            policy: ScriptPolicy::Optimal,
            base_url: "http://127.0.0.1:8000".into(),
            model: "default".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 30_000,
            retries: 2,
            backoff_ms: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    /// Only `shopsim` is built in.
    pub kind: String,
    pub catalog: PathBuf,
    pub tasks: PathBuf,
    pub step_cap: u32,
    pub top_k: usize,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        Self {
            kind: "shopsim".into(),
            catalog: "catalog.jsonl".into(),
            tasks: "tasks.jsonl".into(),
            step_cap: crate::shopsim::DEFAULT_STEP_CAP,
            top_k: crate::shopsim::DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub clock: ClockKind,
    /// Emit a timer input every this many ms. Unset means no timer.
    pub timer_ms: Option<u64>,
    /// Hard bound on cycles per episode, idle ones included.
    pub max_cycles: u32,
    /// How long an idle cycle parks waiting for a producer.
    pub idle_wait_ms: u64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            clock: ClockKind::Virtual,
            timer_ms: None,
            max_cycles: 64,
            idle_wait_ms: 50,
        }
    }
}

/// Everything one run needs. Relative paths resolve against the directory
/// of the file the config was loaded from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    /// Only used to shuffle task order in batches.
    pub seed: u64,
    pub trace: Option<PathBuf>,
    pub queue: QueueSection,
    pub decision: DecisionSection,
    pub memory: MemorySection,
    pub provider: ProviderSection,
    pub environment: EnvironmentSection,
    pub schedule: ScheduleSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trace: None,
            queue: QueueSection::default(),
            decision: DecisionSection::default(),
            memory: MemorySection::default(),
            provider: ProviderSection::default(),
            environment: EnvironmentSection::default(),
            schedule: ScheduleSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn positive(name: &str, ok: bool) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive")))
    }
}

impl RuntimeConfig {
    /// Parses and validates. `base_dir` stays `.`.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.decision.candidate_cap != CANDIDATE_CAP {
            return Err(ConfigError::Invalid(format!(
                "decision.candidate_cap is fixed at {CANDIDATE_CAP}"
            )));
        }
        positive("queue.capacity", self.queue.capacity > 0)?;
        positive("queue.ttl_ms", self.queue.ttl_ms > 0)?;
        positive("decision.k_old", self.decision.k_old > 0)?;
        positive("decision.k_short", self.decision.k_short > 0)?;
        positive("decision.max_peers", self.decision.max_peers > 0)?;
        positive("decision.k_max_events", self.decision.k_max_events > 0)?;
        positive("memory.dim", self.memory.dim > 0)?;
        positive("memory.window", self.memory.window > 0)?;
        positive(
            "memory.threshold",
            self.memory.threshold.is_finite() && self.memory.threshold > 0.0,
        )?;
        positive("memory.timeout_ms", self.memory.timeout_ms > 0)?;
        positive("provider.timeout_ms", self.provider.timeout_ms > 0)?;
        positive("provider.backoff_ms", self.provider.backoff_ms > 0)?;
        positive("environment.step_cap", self.environment.step_cap > 0)?;
        positive("environment.top_k", self.environment.top_k > 0)?;
        positive("schedule.max_cycles", self.schedule.max_cycles > 0)?;
        positive("schedule.idle_wait_ms", self.schedule.idle_wait_ms > 0)?;
        if let Some(ms) = self.schedule.timer_ms {
            positive("schedule.timer_ms", ms > 0)?;
        }
        if self.environment.kind != "shopsim" {
            return Err(ConfigError::Invalid(format!(
                "unknown environment `{}`",
                self.environment.kind
            )));
        }
        #[cfg(not(feature = "remote"))]
        if self.provider.kind == ProviderKind::Remote || self.memory.kind == MemoryKindSel::Remote {
            return Err(ConfigError::Invalid("built without remote support".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.resolve(&self.environment.catalog)
    }

    pub fn tasks_path(&self) -> PathBuf {
        self.resolve(&self.environment.tasks)
    }

    pub fn trace_path(&self) -> Option<PathBuf> {
        self.trace.as_deref().map(|p| self.resolve(p))
    }

    pub fn queue_ttl(&self) -> Duration {
        Duration::from_millis(self.queue.ttl_ms)
    }

    /// Serialized form, used by `validate` and stored next to reports.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}
