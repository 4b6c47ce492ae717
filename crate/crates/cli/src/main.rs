use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asmstarve_core::analysis::{certify_starvation_free, Mode, VulnerabilityReport};
use asmstarve_core::exec::{
    check_coherence, enumerate_interleavings, independent, run_distributed, EnvironmentScript, Scheduler, Trace,
    DEFAULT_STATE_BUDGET,
};
use asmstarve_core::lang::{has_errors, parse_model, validate_model, Diagnostic, Model};
use asmstarve_core::models::adversarial_schedule;
use asmstarve_core::monitor::{detect_cyclical_return, progress_summary, AnnotatedTrace, RunLength};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

// A closed stdout (e.g. piped into `head`) ends the process quietly.
macro_rules! out {
    ($($t:tt)*) => {
        if writeln!(io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    };
}

const CLEAN: u8 = 0;
const FINDINGS: u8 = 1;
const BROKEN: u8 = 2;

#[derive(Parser)]
#[command(name = "asmstarve", version, about = "Starvation-risk analysis for distributed abstract state machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Syntactic,
    Exploration,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchedulerArg {
    RoundRobin,
    Random,
    Scripted,
    /// Starves p1 in a dining philosophers model.
    Adversarial,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    Consistency,
    Deadlock,
    Coherence,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model.
    Check {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Report risky functions, risky predicates and vulnerable rules.
    Analyze {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "syntactic")]
        mode: ModeArg,
        /// Exploration depth in global steps.
        #[arg(long, default_value_t = 12)]
        bound: usize,
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
        budget: usize,
        /// Environment script (JSON) used by exploration.
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Execute the model and write a trace.
    Run {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "round-robin")]
        scheduler: SchedulerArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Agent names for the scripted scheduler, separated by commas or whitespace.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        env: Option<PathBuf>,
        /// Trace file; the trace goes to stdout when omitted.
        #[arg(long, short = 'o')]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Enumerate interleavings and look for clashes, deadlocks and order dependence.
    Explore {
        model: PathBuf,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = DEFAULT_STATE_BUDGET)]
        budget: usize,
        #[arg(long, value_enum, default_value = "all")]
        check: CheckArg,
        #[arg(long)]
        env: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Scan a trace file for cyclical return.
    Monitor {
        trace: PathBuf,
        #[arg(long)]
        predicate: String,
        #[arg(long, default_value_t = 20)]
        threshold: usize,
        /// Replay the trace against this model and verify its predicate columns.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Count global steps instead of the agent's own moves.
        #[arg(long)]
        global_steps: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

/// Error that ends the command with exit code 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Fatal> {
    fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn render(path: &Path, diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.render(&path.display().to_string()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses and validates; any error diagnostic is fatal.
fn load(path: &Path) -> Result<Model, Fatal> {
    let text = read(path)?;
    let model = parse_model(&text).map_err(|d| Fatal(render(path, &d)))?;
    let diags = validate_model(&model);
    if has_errors(&diags) {
        return Err(Fatal(render(path, &diags)));
    }
    Ok(model)
}

fn load_env(model: &Model, path: Option<&Path>) -> Result<EnvironmentScript, Fatal> {
    match path {
        Some(p) => Ok(EnvironmentScript::from_json(&model.sig, &read(p)?)?),
        None => Ok(EnvironmentScript::new()),
    }
}

fn print_json(v: &serde_json::Value) {
    out!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn cmd_check(path: &Path, format: Format) -> Result<u8, Fatal> {
    let text = read(path)?;
    let diags = match parse_model(&text) {
        Ok(m) => validate_model(&m),
        Err(d) => d,
    };
    let ok = !has_errors(&diags);
    match format {
        Format::Json => print_json(&json!({
            "file": path.display().to_string(),
            "ok": ok,
            "diagnostics": diags,
        })),
        Format::Text => {
            if !diags.is_empty() {
                out!("{}", render(path, &diags));
            }
            if ok {
                out!("{}: ok", path.display());
            }
        }
    }
    Ok(if ok { CLEAN } else { BROKEN })
}

fn print_report(r: &VulnerabilityReport) {
    out!("risky functions:");
    for f in &r.risky_functions {
        out!("  {} ({})", f.name, f.chain.join("; "));
    }
    out!("predicates:");
    for p in &r.predicates {
        out!("  {}: {} [{}]", p.name, p.verdict.as_str(), p.evidence.join("; "));
    }
    out!("rules:");
    for rule in &r.rules {
        out!("  {}: {}", rule.id, rule.verdict.as_str());
        if !rule.f1_evidence.is_empty() {
            out!("    risky conjuncts: {}", rule.f1_evidence.join(", "));
        }
        out!("    {}", rule.f2_evidence);
    }
    out!("certificate: {}", if r.certificate { "issued" } else { "not issued" });
    for n in &r.notes {
        out!("note: {n}");
    }
}

fn cmd_analyze(
    path: &Path,
    mode: ModeArg,
    bound: usize,
    budget: usize,
    env: Option<&Path>,
    format: Format,
) -> Result<u8, Fatal> {
    let model = load(path)?;
    let env = load_env(&model, env)?;
    let mode = match mode {
        ModeArg::Syntactic => Mode::Syntactic,
        ModeArg::Exploration => Mode::Exploration { depth: bound, budget },
    };
    let report = certify_starvation_free(&model, &env, mode)?;
    match format {
        Format::Json => out!("{}", serde_json::to_string_pretty(&report)?),
        Format::Text => print_report(&report),
    }
    Ok(if report.certificate { CLEAN } else { FINDINGS })
}

fn scheduler(model: &Model, arg: SchedulerArg, seed: u64, script: Option<&Path>, steps: usize) -> Result<Scheduler, Fatal> {
    Ok(match arg {
        SchedulerArg::RoundRobin => Scheduler::RoundRobin,
        SchedulerArg::Random => Scheduler::Random { seed },
        SchedulerArg::Scripted => {
            let path = script.ok_or_else(|| Fatal("--scheduler scripted needs --script".into()))?;
            let names = read(path)?
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect();
            Scheduler::Scripted(names)
        }
        SchedulerArg::Adversarial => {
            let n = model
                .sig
                .domain_elements("philosophers")
                .map(|v| v.len())
                .filter(|n| *n >= 2)
                .ok_or_else(|| Fatal("the adversarial scheduler needs a philosophers domain".into()))?;
            Scheduler::Scripted(adversarial_schedule(n, steps))
        }
    })
}

fn run_summary(trace: &Trace, out: Option<&Path>) -> serde_json::Value {
    json!({
        "steps": trace.len(),
        "termination": trace.termination.code(),
        "detail": trace.termination.to_string(),
        "trace": out.map(|p| p.display().to_string()),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    path: &Path,
    sched: SchedulerArg,
    seed: u64,
    script: Option<&Path>,
    steps: usize,
    env: Option<&Path>,
    out: Option<&Path>,
    format: Format,
) -> Result<u8, Fatal> {
    let model = load(path)?;
    let env = load_env(&model, env)?;
    let sch = scheduler(&model, sched, seed, script, steps)?;
    let trace = run_distributed(&model, &sch, &env, steps)?;
    let mut buf = Vec::new();
    trace.write_jsonl(&model, &mut buf)?;
    let summary = run_summary(&trace, out);
    match out {
        Some(p) => {
            fs::write(p, &buf).map_err(|e| Fatal(format!("{}: {e}", p.display())))?;
            match format {
                Format::Json => print_json(&summary),
                Format::Text => out!("{} steps, {}; trace written to {}", trace.len(), trace.termination, p.display()),
            }
        }
        None => {
            io::stdout().write_all(&buf)?;
            eprintln!("{} steps, {}", trace.len(), trace.termination);
        }
    }
    Ok(match trace.termination.code() {
        "inconsistent-update" => FINDINGS,
        "fault" => BROKEN,
        _ => CLEAN,
    })
}

fn cmd_explore(
    path: &Path,
    depth: usize,
    budget: usize,
    check: CheckArg,
    env: Option<&Path>,
    format: Format,
) -> Result<u8, Fatal> {
    let model = load(path)?;
    let env = load_env(&model, env)?;
    let g = enumerate_interleavings(&model, &env, depth, budget)?;
    let wants = |c: CheckArg| check == CheckArg::All || check == c;
    let mut findings = g.truncated;
    let mut report = json!({
        "states": g.len(),
        "edges": g.edges.len(),
        "depth": depth,
        "truncated": g.truncated,
    });
    let mut lines = vec![format!("{} states, {} moves explored to depth {depth}", g.len(), g.edges.len())];
    if g.truncated {
        lines.push(format!("truncated: state budget of {budget} reached"));
    }
    if wants(CheckArg::Consistency) {
        let clashes: Vec<serde_json::Value> = g
            .inconsistent
            .iter()
            .map(|m| json!({"state": m.from, "agent": m.agent.to_string(), "clash": m.clash.to_string()}))
            .collect();
        findings |= !clashes.is_empty();
        lines.push(if clashes.is_empty() {
            "no inconsistent update sets".to_string()
        } else {
            format!("{} inconsistent update sets", clashes.len())
        });
        for m in &g.inconsistent {
            lines.push(format!("  state {}: agent {}: {}", m.from, m.agent, m.clash));
        }
        report["inconsistent"] = clashes.into();
    }
    if wants(CheckArg::Deadlock) {
        let dead = g.dead_ends();
        findings |= !dead.is_empty();
        lines.push(if dead.is_empty() {
            "no deadlocks".to_string()
        } else {
            format!("{} deadlocked states: {:?}", dead.len(), dead)
        });
        report["deadlocks"] = dead.into();
    }
    if wants(CheckArg::Coherence) {
        let agents = model.agent_instances()?;
        let (mut indep, mut dep) = (0usize, 0usize);
        let mut incoherent = Vec::new();
        for (n, s) in g.states.iter().enumerate() {
            for (i, a) in agents.iter().enumerate() {
                for b in &agents[i + 1..] {
                    if independent(&model, s, a, b)? {
                        indep += 1;
                        if !check_coherence(&model, s, a, b)?.coherent() {
                            incoherent.push(json!({"state": n, "agents": [a.name(), b.name()]}));
                        }
                    } else {
                        dep += 1;
                    }
                }
            }
        }
        findings |= !incoherent.is_empty();
        lines.push(format!(
            "{indep} independent move pairs ({} order-dependent), {dep} dependent pairs",
            incoherent.len()
        ));
        report["coherence"] = json!({
            "independent_pairs": indep,
            "dependent_pairs": dep,
            "order_dependent": incoherent,
        });
    }
    match format {
        Format::Json => print_json(&report),
        Format::Text => out!("{}", lines.join("\n")),
    }
    Ok(if findings { FINDINGS } else { CLEAN })
}

fn cmd_monitor(
    trace: &Path,
    predicate: &str,
    threshold: usize,
    model: Option<&Path>,
    global: bool,
    format: Format,
) -> Result<u8, Fatal> {
    let text = read(trace)?;
    let at = match model {
        Some(m) => AnnotatedTrace::from_jsonl_checked(&load(m)?, &text)?,
        None => AnnotatedTrace::from_jsonl(&text)?,
    };
    let counting = if global { RunLength::GlobalSteps } else { RunLength::AgentMoves };
    let alarms = detect_cyclical_return(&at, predicate, threshold, counting)?;
    let progress: Vec<_> = progress_summary(&at, counting)
        .into_iter()
        .filter(|p| p.predicate == predicate)
        .collect();
    match format {
        Format::Json => print_json(&json!({
            "steps": at.len(),
            "predicate": predicate,
            "threshold": threshold,
            "alarms": alarms,
            "progress": progress,
        })),
        Format::Text => {
            for a in &alarms {
                out!(
                    "suspected starvation: {} kept {} true for {} moves from step {} (threshold {})",
                    a.agent, a.predicate, a.length, a.start, a.threshold
                );
            }
            for p in &progress {
                out!(
                    "{} {}: longest true run {}, {} flips",
                    p.agent, p.predicate, p.longest_true_run, p.flips
                );
            }
            if alarms.is_empty() {
                out!("no alarms");
            }
        }
    }
    Ok(if alarms.is_empty() { CLEAN } else { FINDINGS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { model, format } => cmd_check(model, *format),
        Command::Analyze {
            model,
            mode,
            bound,
            budget,
            env,
            format,
        } => cmd_analyze(model, *mode, *bound, *budget, env.as_deref(), *format),
        Command::Run {
            model,
            scheduler,
            seed,
            script,
            steps,
            env,
            trace,
            format,
        } => cmd_run(model, *scheduler, *seed, script.as_deref(), *steps, env.as_deref(), trace.as_deref(), *format),
        Command::Explore {
            model,
            depth,
            budget,
            check,
            env,
            format,
        } => cmd_explore(model, *depth, *budget, *check, env.as_deref(), *format),
        Command::Monitor {
            trace,
            predicate,
            threshold,
            model,
            global_steps,
            format,
        } => cmd_monitor(trace, predicate, *threshold, model.as_deref(), *global_steps, *format),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(BROKEN)
        }
    }
}
