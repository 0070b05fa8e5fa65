//! Wires the pipeline, selector, memory and effectors into the episode loop,
//! and runs batches of shop tasks.

mod config;
mod episode;
mod transcript;

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{LocalMemory, LocalMemoryConfig, MemoryStore};
use crate::model::Clock;
use crate::provider::{FailingProvider, Provider, ScriptedProvider};
use crate::shopsim::{load_catalog, load_tasks, optimal_script, single_shot_script, Catalog, ShopError, TaskSpec};
use crate::tasks::TaskError;
use crate::trace::Tracer;

pub use config::{
    ClockKind, DecisionSection, EnvironmentSection, MemoryKindSel, MemorySection, ProviderKind,
    ProviderSection, QueueSection, RuntimeConfig, ScheduleSection, ScriptPolicy,
};
pub use episode::{run_episode, EpisodeParts, EpisodeReport};
pub use transcript::{parse_line, parse_transcript, render_transcript, CycleRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read {0}")]
    Io(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("invalid data file: {0}")]
    Data(String),
    #[error("task list is empty")]
    EmptyTasks,
    #[error("unknown task `{0}`")]
    UnknownTask(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("environment error: {0}")]
    Shop(#[from] ShopError),
    #[error("task error: {0}")]
    Task(#[from] TaskError),
    #[error("memory audit failed for {task}: version delta {delta} != {events} events + {actions} actions")]
    AuditFailed {
        task: String,
        delta: u64,
        events: u64,
        actions: u64,
    },
    #[error("feedback from cycle {} was not ingested by cycle {cycle}", cycle - 1)]
    LoopBroken { cycle: u32 },
    #[error("io error: {0}")]
    Io(String),
}

impl RuntimeError {
    pub fn is_config(&self) -> bool {
        matches!(self, RuntimeError::Config(_))
    }
}

/// How decisions get made in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Scripted(ScriptPolicy),
    Remote,
}

impl Method {
    pub fn from_config(cfg: &RuntimeConfig) -> Self {
        match cfg.provider.kind {
            ProviderKind::Scripted => Method::Scripted(cfg.provider.policy),
            ProviderKind::Remote => Method::Remote,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Scripted(p) => p.as_str(),
            Method::Remote => "remote",
        }
    }
}

/// Catalog and task list named by a config.
#[derive(Debug, Clone)]
pub struct Workload {
    pub catalog: Arc<Catalog>,
    pub tasks: Vec<TaskSpec>,
}

impl Workload {
    pub fn load(cfg: &RuntimeConfig) -> Result<Self, ConfigError> {
        let data = |e: ShopError| ConfigError::Data(e.to_string());
        let catalog = load_catalog(&cfg.catalog_path()).map_err(data)?;
        if catalog.is_empty() {
            return Err(ConfigError::Data("catalog is empty".into()));
        }
        let tasks = load_tasks(&cfg.tasks_path()).map_err(data)?;
        if tasks.is_empty() {
            return Err(ConfigError::EmptyTasks);
        }
        Ok(Self {
            catalog: Arc::new(catalog),
            tasks,
        })
    }

    pub fn task(&self, id: &str) -> Result<&TaskSpec, ConfigError> {
        self.tasks
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| ConfigError::UnknownTask(id.to_string()))
    }
}

pub fn build_clock(cfg: &RuntimeConfig) -> Arc<Clock> {
    Arc::new(match cfg.schedule.clock {
        ClockKind::Virtual => Clock::virtual_ms(),
        ClockKind::System => Clock::system(),
    })
}

pub fn build_provider(
    cfg: &RuntimeConfig,
    method: Method,
    spec: &TaskSpec,
    catalog: &Catalog,
) -> Result<Arc<dyn Provider>, RuntimeError> {
    let top_k = cfg.environment.top_k;
    Ok(match method {
        Method::Scripted(ScriptPolicy::Optimal) => {
            Arc::new(ScriptedProvider::named("optimal", optimal_script(spec, catalog, top_k)?))
        }
        Method::Scripted(ScriptPolicy::SingleShot) => Arc::new(ScriptedProvider::named(
            "single_shot",
            single_shot_script(spec, catalog, top_k),
        )),
        Method::Scripted(ScriptPolicy::Failing) => Arc::new(FailingProvider::new()),
        #[cfg(feature = "remote")]
        Method::Remote => {
            use crate::provider::{OpenAiConfig, OpenAiProvider};
            use std::time::Duration;
            let p = &cfg.provider;
            Arc::new(OpenAiProvider::new(OpenAiConfig {
                base_url: p.base_url.clone(),
                model: p.model.clone(),
                api_key_env: Some(p.api_key_env.clone()),
                timeout: Duration::from_millis(p.timeout_ms),
                retries: p.retries,
                backoff: Duration::from_millis(p.backoff_ms),
            }))
        }
        #[cfg(not(feature = "remote"))]
        Method::Remote => {
            return Err(ConfigError::Invalid("built without remote support".into()).into())
        }
    })
}

/// A fresh store per episode for local memory; the remote client is
/// stateless apart from its version counter.
pub fn build_memory(
    cfg: &RuntimeConfig,
    session: &str,
    clock: Arc<Clock>,
    tracer: &Tracer,
) -> Result<Arc<dyn MemoryStore>, RuntimeError> {
    let _ = tracer;
    Ok(match cfg.memory.kind {
        MemoryKindSel::Local => Arc::new(LocalMemory::new(
            LocalMemoryConfig {
                dim: cfg.memory.dim,
                window: cfg.memory.window,
                threshold: cfg.memory.threshold,
                session: session.to_string(),
            },
            clock,
        )),
        #[cfg(feature = "remote")]
        MemoryKindSel::Remote => {
            use crate::memory::{RemoteMemory, RemoteMemoryConfig};
            Arc::new(
                RemoteMemory::new(RemoteMemoryConfig {
                    base_url: cfg.memory.base_url.clone(),
                    timeout: std::time::Duration::from_millis(cfg.memory.timeout_ms),
                    fallback: true,
                })
                .with_tracer(tracer.clone()),
            )
        }
        #[cfg(not(feature = "remote"))]
        MemoryKindSel::Remote => {
            return Err(ConfigError::Invalid("built without remote support".into()).into())
        }
    })
}

/// Runs one task with freshly built collaborators.
pub fn run_task(
    cfg: &RuntimeConfig,
    method: Method,
    spec: &TaskSpec,
    catalog: Arc<Catalog>,
    tracer: &Tracer,
    on_cycle: impl FnMut(&CycleRecord),
) -> Result<EpisodeReport, RuntimeError> {
    let clock = build_clock(cfg);
    let provider = build_provider(cfg, method, spec, &catalog)?;
    let memory = build_memory(cfg, &spec.id, Arc::clone(&clock), tracer)?;
    let parts = EpisodeParts {
        provider,
        memory,
        clock,
        tracer: tracer.clone(),
    };
    run_episode(cfg, spec, catalog, parts, on_cycle)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub method: String,
    pub seed: u64,
    /// In run order.
    pub episodes: Vec<EpisodeReport>,
    pub mean_reward: f64,
}

impl BatchReport {
    pub fn reward_of(&self, task: &str) -> Option<f64> {
        self.episodes.iter().find(|e| e.task == task).map(|e| e.reward)
    }
}

/// Runs every spec once, in an order shuffled by `cfg.seed`.
pub fn run_batch(
    cfg: &RuntimeConfig,
    method: Method,
    catalog: Arc<Catalog>,
    specs: &[TaskSpec],
    tracer: &Tracer,
    mut on_cycle: impl FnMut(&CycleRecord),
) -> Result<BatchReport, RuntimeError> {
    if specs.is_empty() {
        return Err(ConfigError::EmptyTasks.into());
    }
    let mut order: Vec<&TaskSpec> = specs.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let mut episodes = Vec::with_capacity(order.len());
    for spec in order {
        episodes.push(run_task(cfg, method, spec, Arc::clone(&catalog), tracer, &mut on_cycle)?);
    }
    let mean_reward = episodes.iter().map(|e| e.reward).sum::<f64>() / episodes.len() as f64;
    Ok(BatchReport {
        method: method.name().to_string(),
        seed: cfg.seed,
        episodes,
        mean_reward,
    })
}

/// Pretty JSON for a set of batch reports, newline-terminated.
pub fn reports_json(reports: &[BatchReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

/// Transcript text, one record per line.
pub fn transcript_jsonl(records: &[CycleRecord]) -> String {
    records.iter().map(|r| r.to_line() + "\n").collect()
}

/// Per-task rewards for each method, then the mean per method.
pub fn render_table(reports: &[BatchReport]) -> String {
    let mut tasks: Vec<&str> = reports
        .iter()
        .flat_map(|r| r.episodes.iter().map(|e| e.task.as_str()))
        .collect();
    tasks.sort_unstable();
    tasks.dedup();

    let width = reports
        .iter()
        .map(|r| r.method.len())
        .chain(["Method".len(), "Task".len()])
        .max()
        .unwrap_or(6)
        .max(8);

    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Task");
    for r in reports {
        let _ = write!(out, "  {:>width$}", r.method);
    }
    out.push('\n');
    for t in &tasks {
        let _ = write!(out, "{t:<width$}");
        for r in reports {
            match r.reward_of(t) {
                Some(v) => {
                    let _ = write!(out, "  {v:>width$.3}");
                }
                None => {
                    let _ = write!(out, "  {:>width$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(out, "{:<width$}  {:>8}", "Method", "Reward");
    for r in reports {
        let _ = writeln!(out, "{:<width$}  {:>8.2}", r.method, r.mean_reward);
    }
    out
}
