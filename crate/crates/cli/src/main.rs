use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use eventide::runtime::{
    parse_transcript, render_table, render_transcript, reports_json, run_batch, run_task,
    transcript_jsonl, ConfigError, MemoryKindSel, Method, ProviderKind, RuntimeConfig,
    RuntimeError, ScriptPolicy, Workload,
};
use eventide::shopsim::optimal_script;
use eventide::trace::Tracer;

#[derive(Parser)]
#[command(name = "eventide", version, about = "Event-driven agent runtime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Scripted,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum MemoryArg {
    Local,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Optimal,
    SingleShot,
    Failing,
}

impl From<PolicyArg> for ScriptPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Optimal => ScriptPolicy::Optimal,
            PolicyArg::SingleShot => ScriptPolicy::SingleShot,
            PolicyArg::Failing => ScriptPolicy::Failing,
        }
    }
}

#[derive(clap::Args)]
struct RunOpts {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    #[arg(long, value_enum)]
    memory: Option<MemoryArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single episode.
    Run {
        #[command(flatten)]
        opts: RunOpts,
        /// Task id; defaults to the first task in the task file.
        #[arg(long)]
        task: Option<String>,
        /// Scripted policy to use.
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        /// Write the cycle transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run every task and print a reward table.
    Bench {
        #[command(flatten)]
        opts: RunOpts,
        /// Scripted policies to compare. Defaults to single_shot and optimal.
        #[arg(long, value_enum, value_delimiter = ',')]
        policies: Vec<PolicyArg>,
        /// Directory for report.json and one transcript per method.
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Print a transcript as a readable cycle listing.
    Replay { transcript: PathBuf },
    /// Check a config and the catalog and task files it names.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Errors that map to exit code 1.
#[derive(Debug)]
struct Usage(String);

impl std::error::Error for Usage {}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn load_config(opts: &RunOpts) -> Result<RuntimeConfig> {
    let mut cfg = RuntimeConfig::load(&opts.config)?;
    if let Some(p) = opts.provider {
        cfg.provider.kind = match p {
            ProviderArg::Scripted => ProviderKind::Scripted,
            ProviderArg::Remote => ProviderKind::Remote,
        };
    }
    if let Some(m) = opts.memory {
        cfg.memory.kind = match m {
            MemoryArg::Local => MemoryKindSel::Local,
            MemoryArg::Remote => MemoryKindSel::Remote,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn tracer_for(cfg: &RuntimeConfig) -> Result<Tracer> {
    match cfg.trace_path() {
        Some(path) => {
            Tracer::to_file(&path).with_context(|| format!("opening trace sink {}", path.display()))
        }
        None => Ok(Tracer::disabled()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(
    opts: RunOpts,
    task: Option<String>,
    policy: Option<PolicyArg>,
    transcript: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = load_config(&opts)?;
    if let Some(p) = policy {
        cfg.provider.policy = p.into();
    }
    let work = Workload::load(&cfg)?;
    let spec = match &task {
        Some(id) => work.task(id)?.clone(),
        None => work.tasks[0].clone(),
    };
    let tracer = tracer_for(&cfg)?;
    let mut records = Vec::new();
    let report = run_task(&cfg, Method::from_config(&cfg), &spec, work.catalog, &tracer, |r| {
        records.push(r.clone())
    })?;
    if let Some(path) = transcript {
        write_file(&path, &transcript_jsonl(&records))?;
    }
    println!(
        "{} reward={:.3} cycles={} steps={} purchased={} memory_delta={}",
        report.task, report.reward, report.cycles, report.steps, report.purchased, report.memory_version_delta
    );
    Ok(())
}

fn cmd_bench(opts: RunOpts, policies: Vec<PolicyArg>, out: PathBuf) -> Result<()> {
    let cfg = load_config(&opts)?;
    let work = Workload::load(&cfg)?;
    let methods: Vec<Method> = match cfg.provider.kind {
        ProviderKind::Remote => vec![Method::Remote],
        ProviderKind::Scripted if policies.is_empty() => vec![
            Method::Scripted(ScriptPolicy::SingleShot),
            Method::Scripted(ScriptPolicy::Optimal),
        ],
        ProviderKind::Scripted => policies.into_iter().map(|p| Method::Scripted(p.into())).collect(),
    };
    let tracer = tracer_for(&cfg)?;
    let mut reports = Vec::new();
    for method in methods {
        let mut records = Vec::new();
        let report = run_batch(&cfg, method, work.catalog.clone(), &work.tasks, &tracer, |r| {
            records.push(r.clone())
        })?;
        write_file(
            &out.join(format!("{}.transcript.jsonl", report.method)),
            &transcript_jsonl(&records),
        )?;
        reports.push(report);
    }
    write_file(&out.join("report.json"), &reports_json(&reports))?;
    print!("{}", render_table(&reports));
    Ok(())
}

fn cmd_replay(path: PathBuf) -> Result<()> {
    let text = fs::read_to_string(&path)
        .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    let records = parse_transcript(&text).map_err(|e| ConfigError::Data(format!("{}: {e}", path.display())))?;
    print!("{}", render_transcript(&records));
    Ok(())
}

fn cmd_validate(config: PathBuf) -> Result<()> {
    let cfg = RuntimeConfig::load(&config)?;
    let work = Workload::load(&cfg)?;
    // Every task should be reachable by search, or the optimal policy has
    // nothing to follow.
    for t in &work.tasks {
        if let Err(e) = optimal_script(t, &work.catalog, cfg.environment.top_k) {
            bail!(Usage(format!("task {}: {e}", t.id)));
        }
    }
    println!(
        "ok: {} products, {} tasks, provider={:?}, memory={:?}",
        work.catalog.len(),
        work.tasks.len(),
        cfg.provider.kind,
        cfg.memory.kind
    );
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err.downcast_ref::<ConfigError>().is_some()
        || err.downcast_ref::<Usage>().is_some()
        || err.downcast_ref::<RuntimeError>().is_some_and(RuntimeError::is_config);
    if config {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            opts,
            task,
            policy,
            transcript,
        } => cmd_run(opts, task, policy, transcript),
        Command::Bench { opts, policies, out } => cmd_bench(opts, policies, out),
        Command::Replay { transcript } => cmd_replay(transcript),
        Command::Validate { config } => cmd_validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
