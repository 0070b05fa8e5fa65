//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! measured runtime against its budget; the process exits non-zero if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use common::*;
use eventide::decision::{Cycle, DecisionEngine};
use eventide::memory::{
    LocalMemory, LocalMemoryConfig, MemoryContext, MemoryError, MemoryKind, MemoryStore,
};
use eventide::model::{parse_action, Action, Event, Feedback, Timestamp};
use eventide::pipeline::EventQueue;
use eventide::runtime::{
    build_clock, build_provider, reports_json, run_batch, run_episode, run_task, transcript_jsonl,
    CycleRecord, EpisodeParts, Method, RuntimeConfig, ScriptPolicy, Workload,
};
use eventide::shopsim::{reward, Product, TaskSpec};
use eventide::trace::Tracer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture_config() -> RuntimeConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/fixtures.toml");
    RuntimeConfig::load(&path).expect("fixture config loads")
}

// ---------------------------------------------------------------- criteria

fn queue_order() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let mut ops = 0usize;
    for run in 0..10_000 {
        let capacity = rng.gen_range(1..8);
        let ttl = rng.gen_range(1..30);
        let q = EventQueue::new(virtual_clock(), capacity, Duration::from_nanos(ttl));
        let mut model = RefQueue::new(capacity, ttl);
        for i in 0..rng.gen_range(1..40) {
            ops += 1;
            if rng.gen_bool(0.6) {
                let (id, wall) = (format!("e{i}"), rng.gen_range(0..40));
                let got = q.push(bare_event(&id, wall)).evicted.map(|e| e.id);
                let want = model.push(&id, wall);
                ensure(got == want, || format!("run {run} push {id}: evicted {got:?}, expected {want:?}"))?;
            } else {
                let now = rng.gen_range(0..60);
                let got = q.pop_latest(Timestamp::new(now, 0));
                let (want, want_expired) = model.pop(now);
                let got_id = got.event.map(|e| e.id);
                let got_expired: Vec<String> = got.expired.into_iter().map(|e| e.id).collect();
                ensure(got_id == want && got_expired == want_expired, || {
                    format!("run {run} pop at {now}: got {got_id:?}/{got_expired:?}, expected {want:?}/{want_expired:?}")
                })?;
            }
        }
        let live: Vec<String> = q.snapshot().into_iter().map(|e| e.id).collect();
        ensure(live == model.ids(), || format!("run {run}: contents diverged"))?;
    }
    Ok(format!("10000 interleavings, {ops} operations"))
}

fn grammar_roundtrip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x52);
    for _ in 0..10_000 {
        let a = random_action(&mut rng);
        let text = a.render();
        ensure(text == oracle_render(&a), || format!("render {a:?} gave {text}"))?;
        let back = parse_action(&text).map_err(|e| format!("{text}: {e}"))?;
        ensure(back == a, || format!("{text} parsed to {back:?}"))?;
    }
    let mut rejected = 0;
    for _ in 0..10_000 {
        let a = random_action(&mut rng);
        let s = mutate(&mut rng, &a.render());
        match parse_action(&s) {
            // accepted input must be exactly one whole action
            Ok(b) => ensure(b.render() == s.trim(), || format!("partial parse of {s:?} as {b:?}"))?,
            Err(_) => rejected += 1,
        }
    }
    Ok(format!("10000 roundtrips, 10000 mutations ({rejected} rejected)"))
}

fn dispatcher_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x53);
    let mut chosen_non_noop = 0;
    for n in 0..100 {
        let case = dispatch_case(&mut rng, n);
        let clock = virtual_clock();
        let engine = DecisionEngine::new(case.provider.clone(), Arc::clone(&clock));
        let queue = EventQueue::new(Arc::clone(&clock), 8, Duration::from_secs(60));
        let memory = LocalMemory::new(LocalMemoryConfig::default(), Arc::clone(&clock));
        queue.push(case.event.clone());
        let Cycle::Decided {
            event,
            candidates,
            decision,
        } = engine.select_action(&queue, &memory, &[], Timestamp::new(200, 0))
        else {
            return Err(format!("case {n}: no decision"));
        };
        let cands = &candidates.candidates;
        ensure(cands.len() <= 5, || format!("case {n}: {} candidates", cands.len()))?;
        ensure(decision.chosen.is_noop() || cands.contains(&decision.chosen), || {
            format!("case {n}: chose {:?} outside {cands:?}", decision.chosen)
        })?;
        ensure(cands.iter().all(|c| event.permits(c)), || {
            format!("case {n}: candidate outside availability {:?}", event.available_actions)
        })?;
        let want = case.expected_candidates.clone().unwrap_or_default();
        ensure(*cands == want, || format!("case {n}: candidates {cands:?}, expected {want:?}"))?;
        ensure(decision.chosen == case.expected_choice, || {
            format!("case {n}: chose {:?}, expected {:?}", decision.chosen, case.expected_choice)
        })?;
        if !decision.chosen.is_noop() {
            chosen_non_noop += 1;
        }
    }
    Ok(format!("100 cases, 0 violations, {chosen_non_noop} non-noop choices"))
}

/// Counts every write that reaches the store.
struct Counted {
    inner: LocalMemory,
    writes: AtomicU64,
}

impl MemoryStore for Counted {
    fn record_event(&self, e: &Event) -> u64 {
        self.writes.fetch_add(1, Ordering::SeqCst);
        self.inner.record_event(e)
    }

    fn record_outcome(&self, a: &Action, f: &Feedback) -> u64 {
        self.writes.fetch_add(1, Ordering::SeqCst);
        self.inner.record_outcome(a, f)
    }

    fn retrieve(&self, e: &Event, k_old: usize, k_short: usize) -> Result<MemoryContext, MemoryError> {
        self.inner.retrieve(e, k_old, k_short)
    }

    fn version(&self) -> u64 {
        self.inner.version()
    }
}

fn memory_audit() -> Check {
    let cfg = fixture_config();
    let work = Workload::load(&cfg).map_err(|e| e.to_string())?;
    let mut episodes = 0;
    for policy in [ScriptPolicy::Optimal, ScriptPolicy::SingleShot, ScriptPolicy::Failing] {
        for spec in &work.tasks {
            let clock = build_clock(&cfg);
            let memory = Arc::new(Counted {
                inner: LocalMemory::new(LocalMemoryConfig::default(), Arc::clone(&clock)),
                writes: AtomicU64::new(0),
            });
            let parts = EpisodeParts {
                provider: build_provider(&cfg, Method::Scripted(policy), spec, &work.catalog)
                    .map_err(|e| e.to_string())?,
                memory: memory.clone(),
                clock,
                tracer: Tracer::disabled(),
            };
            let start = memory.version();
            let mut records: Vec<CycleRecord> = Vec::new();
            let report = run_episode(&cfg, spec, Arc::clone(&work.catalog), parts, |r| {
                records.push(r.clone())
            })
            .map_err(|e| format!("{} {}: {e}", policy.as_str(), spec.id))?;

            // Counted independently from the transcript.
            let events: u64 = records.iter().map(|r| r.generated.len() as u64).sum();
            let actions = records.iter().filter(|r| r.feedback.is_some()).count() as u64;
            let delta = memory.version() - start;
            let tag = format!("{} {}", policy.as_str(), spec.id);
            ensure(delta == events + actions, || {
                format!("{tag}: delta {delta} != {events} events + {actions} actions")
            })?;
            ensure(memory.writes.load(Ordering::SeqCst) == delta, || format!("{tag}: writes != delta"))?;
            ensure(
                report.memory_version_delta == delta
                    && report.events_generated == events
                    && report.actions_executed == actions,
                || format!("{tag}: report disagrees with transcript"),
            )?;
            episodes += 1;
        }
    }
    Ok(format!("{episodes} episodes, 0 mismatches"))
}

fn retrieval_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x55);
    let dim = 64;
    let mut hits = 0;
    for store_no in 0..50 {
        let window = rng.gen_range(1..40);
        let store = LocalMemory::new(
            LocalMemoryConfig {
                dim,
                window,
                ..LocalMemoryConfig::default()
            },
            virtual_clock(),
        );
        let n = rng.gen_range(0..=100);
        for _ in 0..n {
            let a = Action::search(random_text(&mut rng, 4));
            let f = Feedback {
                action: a.clone(),
                outcome: random_text(&mut rng, 3),
                success: true,
                emitted_at: Timestamp::new(0, 0),
            };
            store.record_outcome(&a, &f);
        }
        let items = store.items();
        for q in 0..5 {
            let mut event = bare_event("q", 0);
            event.intent = random_text(&mut rng, 3);
            event.observations = vec![random_text(&mut rng, 3)];
            let query = format!("{} {}", event.intent, event.observations[0]);
            let (k_old, k_short) = (rng.gen_range(1..8), rng.gen_range(1..8));

            let want_old = oracle_retrieve(&items, window, &query, MemoryKind::OldFact, k_old, dim);
            let want_short = oracle_retrieve(&items, window, &query, MemoryKind::ShortTerm, k_short, dim);
            let text = |ids: &[u64]| -> Vec<String> {
                ids.iter()
                    .map(|id| items.iter().find(|i| i.id == *id).unwrap().text.clone())
                    .collect()
            };
            let ctx = store.retrieve(&event, k_old, k_short).map_err(|e| e.to_string())?;
            ensure(ctx.old_facts == text(&want_old) && ctx.short_term == text(&want_short), || {
                format!("store {store_no} query {q}: retrieve disagrees with brute force")
            })?;
            let ranked: Vec<u64> = store
                .rank(&query, MemoryKind::ShortTerm, k_short)
                .into_iter()
                .map(|(id, _)| id)
                .collect();
            ensure(ranked == want_short, || format!("store {store_no} query {q}: rank order differs"))?;
            hits += want_old.len() + want_short.len();
        }
    }
    Ok(format!("50 stores, 250 queries, {hits} retrieved items matched"))
}

fn reward_oracle() -> Check {
    let cfg = fixture_config();
    let work = Workload::load(&cfg).map_err(|e| e.to_string())?;
    let mut cases = 0;
    for (task, product, chosen, num, den) in REWARD_CASES {
        let spec = work.task(task).map_err(|e| e.to_string())?;
        let p = work.catalog.get(product).ok_or(format!("no product {product}"))?;
        let chosen: BTreeMap<String, String> =
            chosen.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let got = reward(p, &chosen, spec);
        let want = *num as f64 / *den as f64;
        ensure((got - want).abs() <= 1e-9, || format!("{task}/{product}: {got} != {num}/{den}"))?;
        cases += 1;
    }

    // The two derived cases, on synthetic data.
    let product = |attrs: &[&str], price: f64| Product {
        id: "X1".into(),
        title: "x".into(),
        attributes: attrs.iter().map(|s| s.to_string()).collect(),
        options: BTreeMap::from([("size".into(), vec!["M".into(), "L".into()])]),
        price,
    };
    let spec = |opts: &[(&str, &str)]| TaskSpec {
        id: "X".into(),
        instruction: "x".into(),
        target_attributes: ["a", "b"].iter().map(|s| s.to_string()).collect(),
        target_options: opts.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        price_cap: 10.0,
    };
    // one attribute, wrong option, price ok: (1 + 0 + 1) / (2 + 1 + 1)
    let half = reward(
        &product(&["a", "z"], 5.0),
        &BTreeMap::from([("size".into(), "M".into())]),
        &spec(&[("size", "L")]),
    );
    ensure((half - 0.5).abs() <= 1e-9, || format!("half case gave {half}"))?;
    // both attributes, over budget: (2 + 0 + 0) / (2 + 0 + 1)
    let two_thirds = reward(&product(&["a", "b"], 50.0), &BTreeMap::new(), &spec(&[]));
    ensure((two_thirds - 2.0 / 3.0).abs() <= 1e-9, || format!("two-thirds case gave {two_thirds}"))?;
    cases += 2;
    Ok(format!("{cases} cases within 1e-9"))
}

fn bench_once(cfg: &RuntimeConfig, work: &Workload) -> Result<(String, String, Vec<f64>), String> {
    let mut reports = Vec::new();
    let mut transcripts = String::new();
    for policy in [ScriptPolicy::SingleShot, ScriptPolicy::Optimal] {
        let mut records = Vec::new();
        let report = run_batch(
            cfg,
            Method::Scripted(policy),
            Arc::clone(&work.catalog),
            &work.tasks,
            &Tracer::disabled(),
            |r| records.push(r.clone()),
        )
        .map_err(|e| e.to_string())?;
        transcripts.push_str(&transcript_jsonl(&records));
        reports.push(report);
    }
    let means = reports.iter().map(|r| r.mean_reward).collect();
    Ok((reports_json(&reports), transcripts, means))
}

fn end_to_end() -> Check {
    let cfg = fixture_config();
    let work = Workload::load(&cfg).map_err(|e| e.to_string())?;
    ensure(work.tasks.len() == 10, || format!("{} fixture tasks", work.tasks.len()))?;
    let (a, _, means) = bench_once(&cfg, &work)?;
    let (b, _, _) = bench_once(&cfg, &work)?;
    let (single, optimal) = (means[0], means[1]);
    ensure(optimal == 1.0, || format!("optimal mean {optimal}"))?;
    ensure(single < optimal, || format!("single-shot {single} not below optimal {optimal}"))?;
    ensure(a == b, || "reports differ between runs".into())?;
    Ok(format!("optimal {optimal:.3}, single-shot {single:.3}"))
}

fn liveness() -> Check {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let run = || -> Result<String, String> {
            let cfg = fixture_config();
            let work = Workload::load(&cfg).map_err(|e| e.to_string())?;
            for spec in &work.tasks {
                let r = run_task(
                    &cfg,
                    Method::Scripted(ScriptPolicy::Failing),
                    spec,
                    Arc::clone(&work.catalog),
                    &Tracer::disabled(),
                    |_| {},
                )
                .map_err(|e| format!("{}: {e}", spec.id))?;
                let cap = cfg.environment.step_cap;
                ensure(r.steps == cap && r.reward == 0.0 && !r.purchased, || {
                    format!("{}: steps {} reward {}", spec.id, r.steps, r.reward)
                })?;
                ensure(r.decisions.iter().all(|d| d.chosen.is_noop()), || {
                    format!("{}: non-noop decision", spec.id)
                })?;
            }
            Ok(format!("{} episodes ended at the step cap with reward 0", work.tasks.len()))
        };
        let _ = tx.send(run());
    });
    // A deadlock shows up as a timeout rather than a hung test run.
    rx.recv_timeout(Duration::from_secs(10))
        .map_err(|_| "no result within 10 s".to_string())?
}

fn determinism() -> Check {
    let cfg = fixture_config();
    let work = Workload::load(&cfg).map_err(|e| e.to_string())?;
    let (r1, t1, _) = bench_once(&cfg, &work)?;
    let (r2, t2, _) = bench_once(&cfg, &work)?;
    ensure(r1 == r2, || "reports differ".into())?;
    ensure(t1 == t2, || "transcripts differ".into())?;
    Ok(format!("reports {} bytes, transcripts {} bytes, identical", r1.len(), t1.len()))
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let criteria: Vec<(&str, Option<Duration>, fn() -> Check)> = vec![
        ("queue-order oracle", Some(Duration::from_secs(5)), queue_order),
        ("grammar roundtrip fuzz", Some(Duration::from_secs(5)), grammar_roundtrip),
        ("dispatcher contract", None, dispatcher_contract),
        ("memory refresh audit", None, memory_audit),
        ("retrieval oracle", None, retrieval_oracle),
        ("reward oracle", None, reward_oracle),
        ("end-to-end ordering", Some(Duration::from_secs(30)), end_to_end),
        ("liveness", Some(Duration::from_secs(10)), liveness),
        ("determinism", None, determinism),
    ];

    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(_), Some(b)) if elapsed >= b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        let timing = match budget {
            Some(b) => format!("{:.2}s < {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {detail} [{timing}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {why} [{timing}]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
