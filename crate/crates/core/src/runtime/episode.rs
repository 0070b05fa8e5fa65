use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::RuntimeConfig;
use super::transcript::CycleRecord;
use super::RuntimeError;
use crate::decision::{Cycle, Decision, DecisionConfig, DecisionEngine};
use crate::effectors::{feedback_to_input, EffectorRegistry, ShopEffector};
use crate::memory::MemoryStore;
use crate::model::{Clock, Event, Feedback, IdGen, RawInput, Source};
use crate::pipeline::{EventGenerator, EventQueue, TimerSource};
use crate::provider::Provider;
use crate::shopsim::{Catalog, ShopConfig, ShopEnv, TaskSpec};
use crate::tasks::{TaskKind, TaskManager, TaskState};
use crate::trace::Tracer;

/// Summary of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub task: String,
    pub cycles: u32,
    pub decisions: Vec<Decision>,
    pub reward: f64,
    pub purchased: bool,
    pub steps: u32,
    pub events_generated: u64,
    pub actions_executed: u64,
    pub memory_version_delta: u64,
    /// Clock time spent in the episode. Reproducible under the virtual clock.
    pub wall_nanos: u64,
}

impl EpisodeReport {
    /// The refresh audit: every generated event and every executed action
    /// bumps the memory version exactly once.
    pub fn audit_holds(&self) -> bool {
        self.memory_version_delta == self.events_generated + self.actions_executed
    }
}

/// Collaborators one episode runs with.
pub struct EpisodeParts {
    pub provider: Arc<dyn Provider>,
    pub memory: Arc<dyn MemoryStore>,
    pub clock: Arc<Clock>,
    pub tracer: Tracer,
}

/// Events the generator left unconstrained inherit what the environment
/// currently advertises.
fn ground(event: &mut Event, env: &ShopEnv) {
    if event.available_actions.is_empty() {
        event.available_actions = env.available();
    }
}

/// Runs `spec` until the shop reports done or the cycle bound is hit.
///
/// Each cycle ingests pending raw inputs (the observation after reset, the
/// previous cycle's feedback, timer ticks), turns them into events, records
/// them in memory, selects one action, executes it and records the outcome.
/// Feedback always becomes the next cycle's input. The refresh audit is
/// checked at the end and a violation is an error.
pub fn run_episode(
    cfg: &RuntimeConfig,
    spec: &TaskSpec,
    catalog: Arc<Catalog>,
    parts: EpisodeParts,
    mut on_cycle: impl FnMut(&CycleRecord),
) -> Result<EpisodeReport, RuntimeError> {
    let EpisodeParts {
        provider,
        memory,
        clock,
        tracer,
    } = parts;

    let shop_cfg = ShopConfig {
        step_cap: cfg.environment.step_cap,
        top_k: cfg.environment.top_k,
    };
    let (env, first_obs, _) = ShopEnv::reset(spec.clone(), catalog, shop_cfg)?;
    let effector = ShopEffector::new(env);
    let shop = effector.handle();
    let mut registry = EffectorRegistry::new();
    registry.register(Box::new(effector));

    let generator = EventGenerator::new(Arc::clone(&provider), Arc::new(IdGen::new("evt")), Arc::clone(&clock))
        .with_k_max(cfg.decision.k_max_events)
        .with_tracer(tracer.clone());
    let engine = DecisionEngine::new(provider, Arc::clone(&clock))
        .with_config(DecisionConfig {
            k_old: cfg.decision.k_old,
            k_short: cfg.decision.k_short,
            max_peers: cfg.decision.max_peers,
        })
        .with_tracer(tracer.clone());
    let queue = EventQueue::new(Arc::clone(&clock), cfg.queue.capacity, cfg.queue_ttl());
    let mut tasks = TaskManager::default();
    let mut task_id: Option<String> = None;

    let mut timer = match cfg.schedule.timer_ms {
        Some(ms) => Some(
            TimerSource::new(Duration::from_millis(ms))
                .map_err(|e| RuntimeError::Config(super::ConfigError::Invalid(e.to_string())))?
                .start(Arc::clone(&clock)),
        ),
        None => None,
    };
    let idle_wait = Duration::from_millis(cfg.schedule.idle_wait_ms);

    let start_version = memory.version();
    let start_wall = clock.wall_nanos();
    tracer.emit("episode_start", json!({"task": spec.id}));

    let sensor = |obs: String| RawInput::new(Source::Sensor, obs, clock.now());
    let mut pending: Vec<RawInput> = sensor(first_obs).into_iter().collect();
    let mut last_feedback: Option<RawInput> = None;
    let mut decisions = Vec::new();
    let mut events_generated = 0u64;
    let mut actions_executed = 0u64;
    let mut cycles = 0u32;

    while cycles < cfg.schedule.max_cycles {
        cycles += 1;
        if let Some(t) = &timer {
            pending.extend(t.drain());
        }
        let inputs = std::mem::take(&mut pending);
        if let Some(fb) = last_feedback.take() {
            if !inputs.contains(&fb) {
                return Err(RuntimeError::LoopBroken { cycle: cycles });
            }
        }

        let mut generated = Vec::new();
        for raw in &inputs {
            let events = match generator.generate(raw) {
                Ok(events) => events,
                Err(e) => {
                    tracer.emit("event_generation_failed", json!({"error": e.to_string()}));
                    continue;
                }
            };
            for mut event in events {
                ground(&mut event, &shop.lock().expect("shop env poisoned"));
                memory.record_event(&event);
                events_generated += 1;
                if task_id.is_none() {
                    let task = tasks.spawn_task(spec.instruction.clone(), TaskKind::ShortTerm, &event, event.ts)?;
                    task_id = Some(task.id.clone());
                }
                generated.push(event.id.clone());
                queue.push(event);
            }
        }

        let active = tasks.active_context();
        let mut record = CycleRecord {
            task: spec.id.clone(),
            cycle: cycles,
            inputs,
            generated,
            event: None,
            candidates: None,
            decision: None,
            feedback: None,
            memory_version: 0,
            done: false,
            reward: None,
        };

        match engine.select_action(&queue, memory.as_ref(), &active, clock.now()) {
            Cycle::Idle => {
                tracer.emit("cycle_idle", json!({"cycle": cycles}));
                // Park for a producer; without one, look at the page again.
                match timer.as_ref().and_then(|t| t.wait(idle_wait)) {
                    Some(tick) => pending.push(tick),
                    None => {
                        let obs = shop.lock().expect("shop env poisoned").observation();
                        pending.extend(sensor(obs));
                    }
                }
            }
            Cycle::Decided {
                event,
                candidates,
                decision,
            } => {
                if let Some(id) = &task_id {
                    if let Err(e) = tasks.note_decision(id, &decision) {
                        tracer.emit("task_note_skipped", json!({"task": id, "reason": e.to_string()}));
                    }
                }
                let feedback = registry
                    .execute(&decision.chosen, &clock)
                    .unwrap_or_else(|e| Feedback {
                        action: decision.chosen.clone(),
                        outcome: format!("error: {e}"),
                        success: false,
                        emitted_at: clock.now(),
                    });
                actions_executed += 1;
                memory.record_outcome(&decision.chosen, &feedback);

                let raw = feedback_to_input(&feedback, clock.now());
                pending.push(raw.clone());
                last_feedback = Some(raw);

                record.event = Some(event);
                record.candidates = Some(candidates);
                record.decision = Some(decision.clone());
                record.feedback = Some(feedback);
                decisions.push(decision);
            }
        }

        let env = shop.lock().expect("shop env poisoned");
        record.memory_version = memory.version();
        record.done = env.is_done();
        record.reward = env.final_reward();
        drop(env);
        on_cycle(&record);
        if record.done {
            break;
        }
    }

    if let Some(t) = timer.as_mut() {
        t.stop();
    }

    let env = shop.lock().expect("shop env poisoned");
    if !env.is_done() {
        tracer.emit("max_cycles_reached", json!({"task": spec.id, "cycles": cycles}));
    }
    if let Some(id) = &task_id {
        if tasks.get(id).is_some_and(|t| t.state == TaskState::Active) {
            if env.bought() {
                tasks.complete(id)?;
            } else if env.is_done() {
                tasks.fail(id)?;
            }
        }
    }
    for id in tasks.end_episode() {
        tracer.emit("task_expired", json!({"task": id}));
    }

    let report = EpisodeReport {
        task: spec.id.clone(),
        cycles,
        decisions,
        reward: env.final_reward().unwrap_or(0.0),
        purchased: env.bought(),
        steps: env.state().steps,
        events_generated,
        actions_executed,
        memory_version_delta: memory.version() - start_version,
        wall_nanos: clock.wall_nanos().saturating_sub(start_wall),
    };
    tracer.emit(
        "episode_end",
        json!({"task": spec.id, "reward": report.reward, "cycles": cycles}),
    );
    tracer.flush();
    if !report.audit_holds() {
        return Err(RuntimeError::AuditFailed {
            task: report.task,
            delta: report.memory_version_delta,
            events: report.events_generated,
            actions: report.actions_executed,
        });
    }
    Ok(report)
}
