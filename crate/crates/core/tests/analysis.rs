use std::collections::BTreeSet;

use asmstarve_core::analysis::{
    classify_predicate, compute_risky_functions, detect_vulnerable_rules, rule_footprints, verify_rankings, Mode,
    RuleStatus, CAVEAT,
};
use asmstarve_core::exec::{EnvironmentScript, DEFAULT_STATE_BUDGET};
use asmstarve_core::lang::parse_model;
use asmstarve_core::models::{build_aodv, build_dining_philosophers, corpus, AodvParams, DpVariant, Topology};

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn corpus_verdicts_match_manifest() {
    for entry in corpus() {
        let (model, env) = entry.build().unwrap();
        let report = detect_vulnerable_rules(&model, &env, Mode::Syntactic).unwrap();
        let risky: BTreeSet<String> = report.risk.names();
        let expected: BTreeSet<String> = entry.expected.risky_functions.iter().cloned().collect();
        assert_eq!(risky, expected, "{} risky functions", entry.name);
        for (name, verdict) in &entry.expected.predicates {
            let got = report.predicate(name).unwrap();
            assert_eq!(got.verdict.as_str(), verdict, "{} predicate {name}: {:?}", entry.name, got);
        }
        let vulnerable: BTreeSet<String> = entry.expected.vulnerable.iter().cloned().collect();
        assert_eq!(report.vulnerable_rules(), vulnerable, "{} vulnerable: {:#?}", entry.name, report.rules);
        assert_eq!(report.certificate, entry.expected.certificate, "{}", entry.name);
        assert!(report.notes.iter().any(|n| n == CAVEAT));
        assert_eq!(report.certificate, report.vulnerable_rules().is_empty() && !report.truncated);
    }
}

#[test]
fn footprints_of_corpus_rules() {
    let dp = build_dining_philosophers(5, DpVariant::Baseline).unwrap();
    let fps = rule_footprints(&dp);
    let r1 = fps.iter().find(|f| f.id == "RULE 1").unwrap();
    assert_eq!(r1.reads, set(&["owner", "rightFork", "leftFork"]));
    assert_eq!(r1.writes, set(&["owner"]));

    let (aodv, _) = build_aodv(&AodvParams::new(2, Topology::partitioned()).with_timeout(5)).unwrap();
    let fps = rule_footprints(&aodv);
    let r4 = fps.iter().find(|f| f.id == "RULE 4").unwrap();
    let conj: Vec<String> = r4.conjuncts.iter().map(|c| c.to_string()).collect();
    assert_eq!(conj, vec!["waiting(self, dest)", "timeout(self, dest) = 0"]);
    assert_eq!(r4.writes, set(&["wishToInitiate", "waiting"]));
}

#[test]
fn skip_rule_has_empty_footprint() {
    let m = parse_model("dasm M\ndomain ags = {a}\nrule P = skip\nagent a runs P()\n").unwrap();
    let fps = rule_footprints(&m);
    assert_eq!(fps.len(), 1);
    assert!(fps[0].reads.is_empty() && fps[0].writes.is_empty() && fps[0].value_reads.is_empty());
}

#[test]
fn timeout_removes_waiting_and_timeout_from_risky_set() {
    let (m, _) = build_aodv(&AodvParams::new(2, Topology::partitioned()).with_timeout(5)).unwrap();
    let risk = compute_risky_functions(&m);
    assert!(!risk.is_risky("waiting"));
    assert!(!risk.is_risky("timeout"));
    let safe: Vec<(&str, &str)> = risk.safe.iter().map(|s| (s.name.as_str(), s.escape.as_str())).collect();
    assert!(safe.contains(&("waiting", "RULE 4")), "{safe:?}");
    assert!(risk.iterations <= m.sig.functions.len());
}

#[test]
fn model_without_environment_symbols_is_certified() {
    let src = "dasm Counter\ndomain ags = {a}\ndomain n = 0..3\nfunction c : n controlled\n\
               init { c := 0 }\nrule P = if c = 0 then c := 1\nagent a runs P()\n\
               predicate low for x in ags := c = 0\n";
    let m = parse_model(src).unwrap();
    let r = detect_vulnerable_rules(&m, &EnvironmentScript::new(), Mode::Syntactic).unwrap();
    assert!(r.risk.risky.is_empty());
    assert!(r.certificate);
    assert!(r.rules.iter().all(|v| v.verdict == RuleStatus::NotVulnerable));
}

#[test]
fn timeout_ranking_is_verified() {
    let (m, _) = build_aodv(&AodvParams::new(2, Topology::partitioned()).with_timeout(5)).unwrap();
    let checks = verify_rankings(&m).unwrap();
    assert_eq!(checks.len(), 1);
    assert!(checks[0].verified, "{}", checks[0]);
}

#[test]
fn syntactic_and_exploration_agree_on_small_instances() {
    let mut models = Vec::new();
    for n in 2..=3 {
        models.push((build_dining_philosophers(n, DpVariant::Baseline).unwrap(), EnvironmentScript::new()));
        models.push((build_dining_philosophers(n, DpVariant::Bakery).unwrap(), EnvironmentScript::new()));
    }
    for hosts in 2..=3 {
        for timeout in [false, true] {
            let mut p = AodvParams::new(hosts, Topology::partitioned());
            if timeout {
                p = p.with_timeout(5);
            }
            models.push(build_aodv(&p).unwrap());
        }
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
                    depth: 12,
                    budget: DEFAULT_STATE_BUDGET,
                },
            )
            .unwrap();
            assert!(exp.warning.is_none(), "{} {}", m.name, p.name);
            assert_eq!(syn.verdict, exp.verdict, "{} {}: {:?} vs {:?}", m.name, p.name, syn, exp);
        }
    }
}
