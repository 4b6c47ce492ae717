//! Acceptance criteria. Runs without the libtest harness so every
//! criterion prints a PASS or FAIL line.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use asmstarve_core::analysis::{
    classify_predicate, compute_risky_functions, detect_vulnerable_rules, waiting_cycles, Mode, Verdict,
    VulnerabilityReport, CAVEAT,
};
use asmstarve_core::asm::{Location, Value};
use asmstarve_core::exec::{
    check_coherence, enumerate_interleavings, independent, run_distributed, EnvironmentScript, Scheduler, Trace,
    DEFAULT_STATE_BUDGET,
};
use asmstarve_core::lang::Model;
use asmstarve_core::models::{adversarial_schedule, build_aodv, build_dining_philosophers, AodvParams, DpVariant, Topology};
use asmstarve_core::monitor::{annotate_trace, detect_cyclical_return, RunLength};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn names(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn dp(n: usize, v: DpVariant) -> Model {
    build_dining_philosophers(n, v).unwrap()
}

fn aodv(hosts: usize, timeout: Option<i64>) -> (Model, EnvironmentScript) {
    let mut p = AodvParams::new(hosts, Topology::partitioned());
    if let Some(t) = timeout {
        p = p.with_timeout(t);
    }
    build_aodv(&p).unwrap()
}

fn analyze(m: &Model, env: &EnvironmentScript) -> VulnerabilityReport {
    detect_vulnerable_rules(m, env, Mode::Syntactic).unwrap()
}

fn verdict(r: &VulnerabilityReport, p: &str) -> Verdict {
    r.predicate(p).unwrap().verdict
}

fn dp_baseline() -> Check {
    let m = dp(5, DpVariant::Baseline);
    let r = analyze(&m, &EnvironmentScript::new());
    ensure(r.risk.names() == names(&["owner"]), || format!("risky {:?}", r.risk.names()))?;
    ensure(verdict(&r, "thinking") == Verdict::Risky, || "thinking not risky".into())?;
    ensure(verdict(&r, "eating") == Verdict::NotRisky, || "eating risky".into())?;
    ensure(r.vulnerable_rules() == names(&["RULE 1"]), || format!("vulnerable {:?}", r.vulnerable_rules()))?;
    ensure(!r.certificate, || "certificate issued".into())
}

fn dp_bakery() -> Check {
    let m = dp(5, DpVariant::Bakery);
    let r = analyze(&m, &EnvironmentScript::new());
    ensure(r.vulnerable_rules() == names(&["RULE 1'"]), || format!("vulnerable {:?}", r.vulnerable_rules()))?;
    ensure(r.notes.iter().any(|n| n == CAVEAT), || "caveat missing".into())?;
    ensure(!r.certificate, || "certificate issued".into())
}

fn aodv_no_timeout() -> Check {
    let (m, env) = aodv(2, None);
    let r = analyze(&m, &env);
    ensure(r.vulnerable_rules() == names(&["RULE 3"]), || format!("vulnerable {:?}", r.vulnerable_rules()))?;
    let t = run_distributed(&m, &Scheduler::RoundRobin, &env, 100).unwrap();
    ensure(t.len() == 100, || format!("run stopped after {} steps", t.len()))?;
    let alarms = detect_cyclical_return(&annotate_trace(&m, &t).unwrap(), "waiting", 20, RunLength::AgentMoves).unwrap();
    ensure(alarms.iter().any(|a| a.agent == "h1"), || "no alarm on waiting".into())
}

/// Longest stretch of consecutive initiator moves after which
/// `waiting(h1, h2)` is true, read straight off the replayed states.
fn waiting_oracle(t: &Trace) -> usize {
    let h1 = Value::atom("hosts", "h1");
    let loc = Location::new("waiting", vec![h1.clone(), Value::atom("hosts", "h2")]).owned_by(h1.clone());
    let (mut best, mut cur) = (0, 0);
    for (st, s) in t.steps.iter().zip(t.states().unwrap()) {
        if s.get(&loc) != Value::Bool(true) {
            cur = 0;
        } else if st.agent.as_ref() == Some(&h1) {
            cur += 1;
            best = best.max(cur);
        }
    }
    best
}

fn aodv_timeout() -> Check {
    let (m, env) = aodv(2, Some(5));
    let r = analyze(&m, &env);
    ensure(r.vulnerable_rules().is_empty(), || format!("vulnerable {:?}", r.vulnerable_rules()))?;
    ensure(r.certificate, || "no certificate".into())?;
    let mut worst = 0;
    for seed in 0..20 {
        let t = run_distributed(&m, &Scheduler::Random { seed }, &env, 100).unwrap();
        let longest = waiting_oracle(&t);
        ensure(longest <= 6, || format!("seed {seed}: waiting held {longest} moves"))?;
        worst = worst.max(longest);
    }
    ensure(worst == 6, || format!("bound never reached: {worst}"))
}

fn dp2_exploration() -> Check {
    let m = dp(2, DpVariant::Baseline);
    let started = Instant::now();
    let g = enumerate_interleavings(&m, &EnvironmentScript::new(), 12, DEFAULT_STATE_BUDGET).unwrap();
    let elapsed = started.elapsed();
    ensure(!g.truncated, || "truncated".into())?;
    ensure(g.inconsistent.is_empty(), || format!("{} inconsistent moves", g.inconsistent.len()))?;
    let forks = [Value::atom("forks", "f1"), Value::atom("forks", "f2")];
    for s in &g.states {
        for p in ["p1", "p2"] {
            let me = Value::atom("philosophers", p);
            let held = forks.iter().filter(|f| s.get(&Location::new("owner", vec![(*f).clone()])) == me).count();
            ensure(held != 1, || format!("{p} holds one fork in {s:?}"))?;
        }
    }
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))
}

/// Independent pairs must commute; pairs that do not commute must have
/// been reported dependent. Returns (independent, dependent) counts.
fn coherence_counts(m: &Model, depth: usize) -> Result<(usize, usize), String> {
    let g = enumerate_interleavings(m, &EnvironmentScript::new(), depth, DEFAULT_STATE_BUDGET).unwrap();
    let agents = m.agent_instances().unwrap();
    let (mut indep, mut dep) = (0, 0);
    for s in &g.states {
        for (i, a) in agents.iter().enumerate() {
            for b in &agents[i + 1..] {
                let coh = check_coherence(m, s, a, b).unwrap();
                if independent(m, s, a, b).unwrap() {
                    indep += 1;
                    ensure(coh.coherent(), || format!("{}: independent pair diverges in {s:?}", m.name))?;
                } else {
                    dep += 1;
                }
            }
        }
    }
    Ok((indep, dep))
}

fn coherence() -> Check {
    // Both philosophers of DP(2) read both forks, so every pair is dependent.
    let (_, dep) = coherence_counts(&dp(2, DpVariant::Baseline), 12)?;
    ensure(dep > 0, || "no dependent pairs reported".into())?;
    // DP(4) has non-adjacent philosophers whose moves are independent.
    let (indep, _) = coherence_counts(&dp(4, DpVariant::Baseline), 12)?;
    ensure(indep > 0, || "no independent pairs in DP(4)".into())
}

fn oracle_equivalence() -> Check {
    let mut models = Vec::new();
    for n in 2..=3 {
        models.push((dp(n, DpVariant::Baseline), EnvironmentScript::new()));
        models.push((dp(n, DpVariant::Bakery), EnvironmentScript::new()));
    }
    for hosts in 2..=3 {
        models.push(aodv(hosts, None));
        models.push(aodv(hosts, Some(5)));
    }
    for (m, env) in &models {
        let risk = compute_risky_functions(m);
        for p in m.predicates.values() {
            let syn = classify_predicate(m, env, &risk, p, Mode::Syntactic).unwrap();
            let exp = classify_predicate(
                m,
                env,
                &risk,
                p,
                Mode::Exploration {
                    depth: 16,
                    budget: DEFAULT_STATE_BUDGET,
                },
            )
            .unwrap();
            ensure(exp.warning.is_none(), || format!("{} {}: exploration truncated", m.name, p.name))?;
            ensure(syn.verdict == exp.verdict, || {
                format!("{} {}: {:?} vs {:?}", m.name, p.name, syn.verdict, exp.verdict)
            })?;
        }
    }
    Ok(())
}

fn necessity() -> Check {
    let cases = [
        (dp(2, DpVariant::Baseline), EnvironmentScript::new()),
        aodv(2, None),
    ];
    for (m, env) in &cases {
        let r = analyze(m, env);
        let risky: Vec<&str> = r
            .predicates
            .iter()
            .filter(|p| p.verdict == Verdict::Risky)
            .map(|p| p.name.as_str())
            .collect();
        let g = enumerate_interleavings(m, env, 24, DEFAULT_STATE_BUDGET).unwrap();
        ensure(!g.truncated, || format!("{}: truncated", m.name))?;
        let cycles = waiting_cycles(m, env, &g, &risky).unwrap();
        ensure(!cycles.is_empty(), || format!("{}: no waiting cycle explored", m.name))?;
        for c in &cycles {
            ensure(!r.flagged_for(&c.agent_id).is_empty(), || {
                format!("{}: cycle for {} on {} has no flagged rule", m.name, c.agent, c.predicate)
            })?;
        }
    }
    Ok(())
}

fn liveness_witness() -> Check {
    let m = dp(5, DpVariant::Baseline);
    let env = EnvironmentScript::new();
    let fair = run_distributed(&m, &Scheduler::RoundRobin, &env, 200).unwrap();
    let rows = annotate_trace(&m, &fair).unwrap().rows;
    for p in 1..=5 {
        let name = format!("p{p}");
        ensure(rows.iter().any(|r| r.predicates[&name]["eating"]), || format!("{name} never ate"))?;
    }
    let adv = run_distributed(&m, &Scheduler::Scripted(adversarial_schedule(5, 200)), &env, 200).unwrap();
    let rows = annotate_trace(&m, &adv).unwrap().rows;
    ensure(rows.len() == 200, || "adversarial run cut short".into())?;
    ensure(rows.iter().all(|r| !r.predicates["p1"]["eating"]), || "p1 ate".into())
}

fn determinism() -> Check {
    let cases: Vec<(Model, EnvironmentScript, Scheduler)> = vec![
        (dp(5, DpVariant::Baseline), EnvironmentScript::new(), Scheduler::Random { seed: 11 }),
        (dp(5, DpVariant::Bakery), EnvironmentScript::new(), Scheduler::RoundRobin),
        {
            let (m, e) = aodv(2, Some(5));
            (m, e, Scheduler::Random { seed: 5 })
        },
    ];
    let dir = std::env::temp_dir().join(format!("asmstarve-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for (i, (m, env, sch)) in cases.iter().enumerate() {
        let mut files = Vec::new();
        for run in 0..2 {
            let path = dir.join(format!("case{i}-run{run}.jsonl"));
            let t = run_distributed(m, sch, env, 150).unwrap();
            let mut f = std::fs::File::create(&path).unwrap();
            t.write_jsonl(m, &mut f).unwrap();
            drop(f);
            files.push(std::fs::read(&path).unwrap());
        }
        ensure(!files[0].is_empty() && files[0] == files[1], || format!("case {i} differs"))?;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("DP(5) baseline verdicts", dp_baseline),
        ("DP(5) Bakery verdicts", dp_bakery),
        ("AODV without timeout: RULE 3 and waiting alarm", aodv_no_timeout),
        ("AODV with timeout: certificate and waiting bound", aodv_timeout),
        ("DP(2) exhaustive exploration to depth 12", dp2_exploration),
        ("coherence of independent moves", coherence),
        ("syntactic and exploration verdicts agree", oracle_equivalence),
        ("finite-scale necessity", necessity),
        ("fair-run liveness witness", liveness_witness),
        ("byte-identical traces", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let ms = started.elapsed().as_millis();
        match outcome {
            Ok(()) => println!("criterion {:>2} [PRIMARY] {name}: PASS ({ms} ms)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} [PRIMARY] {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
