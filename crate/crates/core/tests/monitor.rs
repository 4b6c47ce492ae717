use asmstarve_core::analysis::{detect_vulnerable_rules, Mode, Verdict};
use asmstarve_core::asm::{Location, Value};
use asmstarve_core::exec::{run_distributed, EnvironmentScript, Scheduler};
use asmstarve_core::lang::parse_model;
use asmstarve_core::models::{adversarial_schedule, build_aodv, build_dining_philosophers, AodvParams, DpVariant, Topology};
use asmstarve_core::monitor::{
    annotate_trace, detect_cyclical_return, progress_summary, AnnotatedTrace, MonitorError, RunLength,
};
use proptest::prelude::*;

fn aodv(timeout: Option<i64>) -> (asmstarve_core::lang::Model, EnvironmentScript) {
    let mut p = AodvParams::new(2, Topology::partitioned());
    if let Some(t) = timeout {
        p = p.with_timeout(t);
    }
    build_aodv(&p).unwrap()
}

#[test]
fn fair_dp_trace_shows_progress() {
    let m = build_dining_philosophers(5, DpVariant::Baseline).unwrap();
    let t = run_distributed(&m, &Scheduler::RoundRobin, &EnvironmentScript::new(), 200).unwrap();
    let at = annotate_trace(&m, &t).unwrap();
    assert_eq!(at.len(), 200);
    let summary = progress_summary(&at, RunLength::AgentMoves);
    for p in summary.iter().filter(|p| p.predicate == "eating") {
        assert!(p.flips >= 1, "{p:?}");
    }
    assert!(detect_cyclical_return(&at, "thinking", 20, RunLength::AgentMoves).unwrap().is_empty());
}

#[test]
fn empty_trace_has_no_rows() {
    let m = build_dining_philosophers(2, DpVariant::Baseline).unwrap();
    let t = run_distributed(&m, &Scheduler::RoundRobin, &EnvironmentScript::new(), 0).unwrap();
    let at = annotate_trace(&m, &t).unwrap();
    assert!(at.is_empty());
    assert!(progress_summary(&at, RunLength::AgentMoves).iter().all(|p| p.flips == 0 && p.longest_true_run == 0));
}

#[test]
fn adversarial_dp_alarms_on_p1() {
    let m = build_dining_philosophers(5, DpVariant::Baseline).unwrap();
    let sch = Scheduler::Scripted(adversarial_schedule(5, 100));
    let t = run_distributed(&m, &sch, &EnvironmentScript::new(), 100).unwrap();
    let at = annotate_trace(&m, &t).unwrap();
    let alarms = detect_cyclical_return(&at, "thinking", 20, RunLength::AgentMoves).unwrap();
    assert_eq!(alarms.len(), 1, "{alarms:?}");
    assert_eq!(alarms[0].agent, "p1");
    assert!(alarms[0].length >= 50);
    assert_eq!(alarms[0].threshold, 20);
}

#[test]
fn flipping_predicate_never_alarms() {
    let src = "dasm Flip\ndomain ags = {a}\nfunction b : boolean controlled\ninit { b := false }\n\
               rule P = {\n if b then b := false\n if not b then b := true\n}\nagent a runs P()\n\
               predicate on for x in ags := b\n";
    let m = parse_model(src).unwrap();
    let t = run_distributed(&m, &Scheduler::RoundRobin, &EnvironmentScript::new(), 30).unwrap();
    let at = annotate_trace(&m, &t).unwrap();
    assert!(detect_cyclical_return(&at, "on", 2, RunLength::AgentMoves).unwrap().is_empty());
    assert_eq!(progress_summary(&at, RunLength::AgentMoves)[0].flips, 30);
}

#[test]
fn quiescent_trace_has_no_flips() {
    let src = "dasm Still\ndomain ags = {a}\nfunction b : boolean monitored\n\
               rule P = if b then skip\nagent a runs P()\npredicate on for x in ags := b\n";
    let m = parse_model(src).unwrap();
    let t = run_distributed(&m, &Scheduler::Scripted(vec!["a".into(); 10]), &EnvironmentScript::new(), 10).unwrap();
    let at = annotate_trace(&m, &t).unwrap();
    assert_eq!(at.len(), 10);
    assert_eq!(progress_summary(&at, RunLength::AgentMoves)[0].flips, 0);
}

#[test]
fn partitioned_aodv_waits_forever_without_timeout() {
    let (m, env) = aodv(None);
    let t = run_distributed(&m, &Scheduler::RoundRobin, &env, 100).unwrap();
    let at = annotate_trace(&m, &t).unwrap();
    let first = at.rows.iter().position(|r| r.predicates["h1"]["waiting"]).unwrap();
    assert!(at.rows[first..].iter().all(|r| r.predicates["h1"]["waiting"]));
    let remaining = at.rows[first..].iter().filter(|r| r.agent.as_deref() == Some("h1")).count();
    let summary = progress_summary(&at, RunLength::AgentMoves);
    assert_eq!(summary[0].longest_true_run, remaining);
    let alarms = detect_cyclical_return(&at, "waiting", 20, RunLength::AgentMoves).unwrap();
    assert_eq!(alarms.len(), 1);
}

/// Counts consecutive initiator moves with `waiting(h1, h2)` true directly
/// from replayed states.
fn longest_waiting_oracle(t: &asmstarve_core::exec::Trace) -> usize {
    let loc = Location::new("waiting", vec![Value::atom("hosts", "h1"), Value::atom("hosts", "h2")])
        .owned_by(Value::atom("hosts", "h1"));
    let (mut best, mut cur) = (0, 0);
    for s in t.states().unwrap() {
        if s.get(&loc) == Value::Bool(true) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

#[test]
fn timeout_bounds_waiting() {
    let (m, env) = aodv(Some(5));
    for seed in 0..10 {
        let t = run_distributed(&m, &Scheduler::Random { seed }, &env, 100).unwrap();
        assert_eq!(longest_waiting_oracle(&t), 6);
        let at = annotate_trace(&m, &t).unwrap();
        assert!(detect_cyclical_return(&at, "waiting", 7, RunLength::AgentMoves).unwrap().is_empty());
        assert_eq!(detect_cyclical_return(&at, "waiting", 6, RunLength::AgentMoves).unwrap().len(), 1);
    }
}

#[test]
fn jsonl_round_trip_and_replay_check() {
    let m = build_dining_philosophers(3, DpVariant::Baseline).unwrap();
    let t = run_distributed(&m, &Scheduler::Random { seed: 3 }, &EnvironmentScript::new(), 40).unwrap();
    let mut buf = Vec::new();
    t.write_jsonl(&m, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let direct = annotate_trace(&m, &t).unwrap();
    assert_eq!(AnnotatedTrace::from_jsonl_checked(&m, &text).unwrap(), direct);
    assert_eq!(AnnotatedTrace::from_jsonl(&text).unwrap().rows, direct.rows);

    let tampered = text.replacen("\"eating\":false", "\"eating\":true", 1);
    assert!(matches!(
        AnnotatedTrace::from_jsonl_checked(&m, &tampered),
        Err(MonitorError::Mismatch { .. })
    ));
    let other = build_dining_philosophers(2, DpVariant::Baseline).unwrap();
    assert!(AnnotatedTrace::from_jsonl_checked(&other, &text).is_err());
}

#[test]
fn bad_arguments_are_rejected() {
    let m = build_dining_philosophers(2, DpVariant::Baseline).unwrap();
    let t = run_distributed(&m, &Scheduler::RoundRobin, &EnvironmentScript::new(), 5).unwrap();
    let at = annotate_trace(&m, &t).unwrap();
    assert_eq!(detect_cyclical_return(&at, "thinking", 0, RunLength::AgentMoves), Err(MonitorError::ZeroThreshold));
    assert!(matches!(
        detect_cyclical_return(&at, "hungry", 3, RunLength::AgentMoves),
        Err(MonitorError::UnknownPredicate(_))
    ));
}

#[test]
fn corpus_alarms_only_fire_on_risky_predicates() {
    for entry in asmstarve_core::models::corpus() {
        let (m, env) = entry.build().unwrap();
        let report = detect_vulnerable_rules(&m, &env, Mode::Syntactic).unwrap();
        let scheds = [Scheduler::RoundRobin, Scheduler::Random { seed: 1 }, Scheduler::Random { seed: 2 }];
        for sch in &scheds {
            let t = run_distributed(&m, sch, &env, 150).unwrap();
            let at = annotate_trace(&m, &t).unwrap();
            for p in m.predicates.keys() {
                let alarms = detect_cyclical_return(&at, p, 20, RunLength::AgentMoves).unwrap();
                if !alarms.is_empty() {
                    assert_eq!(report.predicate(p).unwrap().verdict, Verdict::Risky, "{} {p}", entry.name);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn alarms_shrink_as_threshold_grows(seed in 0u64..1000, k in 1usize..30, global in any::<bool>()) {
        let m = build_dining_philosophers(3, DpVariant::Baseline).unwrap();
        let t = run_distributed(&m, &Scheduler::Random { seed }, &EnvironmentScript::new(), 80).unwrap();
        let at = annotate_trace(&m, &t).unwrap();
        let counting = if global { RunLength::GlobalSteps } else { RunLength::AgentMoves };
        let lo = detect_cyclical_return(&at, "thinking", k, counting).unwrap();
        let hi = detect_cyclical_return(&at, "thinking", k + 1, counting).unwrap();
        prop_assert!(hi.len() <= lo.len());
        prop_assert_eq!(&lo, &detect_cyclical_return(&at, "thinking", k, counting).unwrap());
        for p in progress_summary(&at, counting).iter().filter(|p| p.predicate == "thinking") {
            let has = lo.iter().any(|a| a.agent == p.agent);
            prop_assert_eq!(p.longest_true_run >= k, has);
        }
        for a in &lo {
            prop_assert!(a.length >= a.threshold);
        }
    }
}
