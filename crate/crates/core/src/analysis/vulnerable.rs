use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::asm::Value;
use crate::exec::EnvironmentScript;
use crate::lang::{Model, RuleUnit};

use super::classify::{classify_predicate, falsifies, Falsify, Mode, PredicateVerdict, Verdict};
use super::footprint::{formula_symbols, rule_footprints};
use super::ground::GroundLimits;
use super::ranking::verify_rankings;
use super::risky::{compute_risky_functions, RiskReport, RiskyFunction};
use super::AnalysisError;

pub const CAVEAT: &str = "vulnerable rules are a necessary condition for starvation, not a sufficient one: \
a flagged rule does not necessarily imply starvation";

const FRAMING: &str = "a flagged rule marks a possible dependency (a.1: the agent waits on a risky predicate \
whose truth other agents control) combined with forced waiting (a.2: only that rule can change the predicate)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleStatus {
    #[serde(rename = "vulnerable")]
    Vulnerable,
    /// Kept because a grounding budget ran out.
    #[serde(rename = "vulnerable (over-approximate)")]
    OverApproximate,
    #[serde(rename = "not-vulnerable")]
    NotVulnerable,
}

impl RuleStatus {
    pub fn is_vulnerable(self) -> bool {
        self != RuleStatus::NotVulnerable
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleStatus::Vulnerable => "vulnerable",
            RuleStatus::OverApproximate => "vulnerable (over-approximate)",
            RuleStatus::NotVulnerable => "not-vulnerable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleVerdict {
    pub id: String,
    pub verdict: RuleStatus,
    /// Guard conjuncts mentioning a risky symbol.
    pub f1_evidence: Vec<String>,
    pub f2_evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VulnerabilityReport {
    pub risky_functions: Vec<RiskyFunction>,
    pub predicates: Vec<PredicateVerdict>,
    pub rules: Vec<RuleVerdict>,
    pub certificate: bool,
    pub notes: Vec<String>,
    /// Surviving (agent, rule) pairs.
    #[serde(skip)]
    pub flagged: Vec<(Value, String)>,
    #[serde(skip)]
    pub truncated: bool,
    #[serde(skip)]
    pub risk: RiskReport,
}

impl VulnerabilityReport {
    pub fn vulnerable_rules(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .filter(|r| r.verdict.is_vulnerable())
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateVerdict> {
        self.predicates.iter().find(|p| p.name == name)
    }

    /// Rules flagged for one agent.
    pub fn flagged_for(&self, agent: &Value) -> Vec<&str> {
        self.flagged
            .iter()
            .filter(|(a, _)| a == agent)
            .map(|(_, r)| r.as_str())
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// A candidate: agent `a` running rule `unit`, associated with predicate `pred`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Triple {
    agent: usize,
    unit: String,
    pred: String,
    witness: String,
}

type FalsifyKey = (String, usize, usize, String);

/// Risky guard conjuncts per (program, rule id); an empty list means f.1
/// does not hold.
pub fn f1_evidence(model: &Model, risk: &RiskReport) -> BTreeMap<(String, String), Vec<String>> {
    rule_footprints(model)
        .into_iter()
        .map(|fp| {
            let hits = fp
                .conjuncts
                .iter()
                .filter(|c| {
                    let mut s = BTreeSet::new();
                    formula_symbols(c, &mut s);
                    s.iter().any(|x| risk.is_risky(x))
                })
                .map(|c| c.to_string())
                .collect();
            ((fp.program, fp.id), hits)
        })
        .collect()
}

pub fn detect_vulnerable_rules(
    model: &Model,
    env: &EnvironmentScript,
    mode: Mode,
) -> Result<VulnerabilityReport, AnalysisError> {
    let risk = compute_risky_functions(model);
    let agents = model.agent_instances()?;
    let statics = model.initial_state()?;
    let limits = GroundLimits::default();
    let mut notes = vec![CAVEAT.to_string(), FRAMING.to_string()];
    let mut truncated = false;

    let mut predicates = Vec::new();
    for p in model.predicates.values() {
        let v = classify_predicate(model, env, &risk, p, mode)?;
        if let Some(w) = &v.warning {
            notes.push(format!("predicate {}: {w}", p.name));
        }
        predicates.push(v);
    }
    let risky_preds: Vec<&str> = predicates
        .iter()
        .filter(|v| v.verdict == Verdict::Risky)
        .map(|v| v.name.as_str())
        .collect();

    let f1 = f1_evidence(model, &risk);
    let order: Vec<(String, String)> = rule_footprints(model).into_iter().map(|fp| (fp.program, fp.id)).collect();

    let units: Vec<Vec<RuleUnit<'_>>> = agents.iter().map(|a| model.program_units(&a.program)).collect();
    let mut cache: HashMap<FalsifyKey, Falsify> = HashMap::new();
    let mut check = |pred: &str, subject: usize, mover: usize, unit: &RuleUnit<'_>| -> Result<Falsify, AnalysisError> {
        let key = (pred.to_string(), subject, mover, unit.id.clone());
        if let Some(r) = cache.get(&key) {
            return Ok(r.clone());
        }
        let decl = &model.predicates[pred];
        let r = falsifies(model, &statics, limits, decl, &agents[subject].id, &agents[mover], unit)?;
        cache.insert(key, r.clone());
        Ok(r)
    };

    // candidates: f.1 plus association with a risky predicate of the same agent
    let mut candidates: BTreeSet<Triple> = BTreeSet::new();
    let mut over_approx: BTreeSet<(usize, String)> = BTreeSet::new();
    for (ai, a) in agents.iter().enumerate() {
        for unit in &units[ai] {
            if f1[&(a.program.clone(), unit.id.clone())].is_empty() {
                continue;
            }
            for p in &risky_preds {
                if !model.sig.domain_contains(&model.predicates[*p].domain, &a.id) {
                    continue;
                }
                let witness = match check(p, ai, ai, unit)? {
                    Falsify::Yes(w) => w,
                    Falsify::No => continue,
                    Falsify::Unknown => {
                        truncated = true;
                        over_approx.insert((ai, unit.id.clone()));
                        "grounding budget exhausted".to_string()
                    }
                };
                candidates.insert(Triple {
                    agent: ai,
                    unit: unit.id.clone(),
                    pred: p.to_string(),
                    witness,
                });
            }
        }
    }

    // f.2: drop candidates some non-candidate rule can also falsify
    let mut removed: BTreeMap<Triple, String> = BTreeMap::new();
    loop {
        let live: BTreeSet<(usize, &str)> = candidates.iter().map(|t| (t.agent, t.unit.as_str())).collect();
        let mut drop: Vec<(Triple, String)> = Vec::new();
        'cand: for t in &candidates {
            for (bi, b) in agents.iter().enumerate() {
                for unit in &units[bi] {
                    if live.contains(&(bi, unit.id.as_str())) {
                        continue;
                    }
                    match check(&t.pred, t.agent, bi, unit)? {
                        Falsify::Yes(w) => {
                            drop.push((
                                t.clone(),
                                format!("{}({}) is also falsified by non-vulnerable rule {} of {} (from {w})",
                                    t.pred, agents[t.agent].id, unit.id, b.id),
                            ));
                            continue 'cand;
                        }
                        Falsify::No => {}
                        Falsify::Unknown => {
                            truncated = true;
                            over_approx.insert((t.agent, t.unit.clone()));
                        }
                    }
                }
            }
        }
        if drop.is_empty() {
            break;
        }
        for (t, why) in drop {
            candidates.remove(&t);
            removed.insert(t, why);
        }
    }

    let mut flagged: Vec<(Value, String)> = Vec::new();
    for t in &candidates {
        let pair = (agents[t.agent].id.clone(), t.unit.clone());
        if !flagged.contains(&pair) {
            flagged.push(pair);
        }
    }

    let mut rules = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    for key in &order {
        let (program, id) = key;
        if !seen_ids.insert(id.clone()) {
            continue;
        }
        let hits = f1[key].clone();
        let of_program = |ai: &usize| &agents[*ai].program == program;
        let surviving: Vec<&Triple> = candidates.iter().filter(|t| &t.unit == id && of_program(&t.agent)).collect();
        let (verdict, f2_evidence) = if let Some(t) = surviving.first() {
            let approx = surviving.iter().any(|t| over_approx.contains(&(t.agent, t.unit.clone())));
            let status = if approx { RuleStatus::OverApproximate } else { RuleStatus::Vulnerable };
            (
                status,
                format!(
                    "associated with risky predicate {} (falsifies {}({}) from {}); no non-vulnerable rule falsifies it",
                    t.pred, t.pred, agents[t.agent].id, t.witness
                ),
            )
        } else if hits.is_empty() {
            (RuleStatus::NotVulnerable, "f.1 fails: no guard conjunct mentions a risky function".to_string())
        } else if let Some((_, why)) = removed.iter().find(|(t, _)| &t.unit == id && of_program(&t.agent)) {
            (RuleStatus::NotVulnerable, format!("f.2 fails: {why}"))
        } else {
            (
                RuleStatus::NotVulnerable,
                "f.2 fails: not associated with any risky predicate (never falsifies one)".to_string(),
            )
        };
        rules.push(RuleVerdict {
            id: id.clone(),
            verdict,
            f1_evidence: hits,
            f2_evidence,
        });
    }

    let vulnerable_any = rules.iter().any(|r| r.verdict.is_vulnerable());
    if truncated {
        notes.push("grounding budget exhausted; verdicts are over-approximate and no certificate is issued".to_string());
    }
    for r in verify_rankings(model)? {
        notes.push(r.to_string());
    }
    let certificate = !vulnerable_any && !truncated;
    Ok(VulnerabilityReport {
        risky_functions: risk.risky.clone(),
        predicates,
        rules,
        certificate,
        notes,
        flagged,
        truncated,
        risk,
    })
}

/// Runs the detection and states the outcome of the certificate check.
pub fn certify_starvation_free(
    model: &Model,
    env: &EnvironmentScript,
    mode: Mode,
) -> Result<VulnerabilityReport, AnalysisError> {
    let mut report = detect_vulnerable_rules(model, env, mode)?;
    let line = if report.certificate {
        "starvation-free: no agent program has a vulnerable rule".to_string()
    } else if report.truncated {
        "no certificate: the analysis was truncated".to_string()
    } else {
        let ids: Vec<String> = report.vulnerable_rules().into_iter().collect();
        format!("no certificate: vulnerable {}", ids.join(", "))
    };
    report.notes.push(line);
    Ok(report)
}

