use std::collections::BTreeSet;
use std::ops::ControlFlow;

use serde::Serialize;

use crate::asm::{apply_updates, collect_updates, EvalError, State, Value};
use crate::exec::{agent_step, enumerate_interleavings, EnvironmentScript, StepOutcome};
use crate::lang::{AgentInstance, Model, PredicateDecl, RuleUnit};

use super::footprint::formula_symbols;
use super::ground::{describe, for_each_ground, GroundLimits, Overlay};
use super::risky::RiskReport;
use super::AnalysisError;

/// How the "depends on other agents" half of predicate riskiness is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Look for a self-liberating own rule by grounding over finite domains.
    #[default]
    Syntactic,
    /// Explore reachable states and look for a state where the agent waits.
    Exploration { depth: usize, budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Risky,
    NotRisky,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Risky => "risky",
            Verdict::NotRisky => "not-risky",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Syntactic,
    Exploration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredicateVerdict {
    pub name: String,
    pub verdict: Verdict,
    pub method: Method,
    pub evidence: Vec<String>,
    /// Set when exploration ran out of budget and the syntactic check was used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Outcome of asking whether a rule can falsify a predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Falsify {
    Yes(String),
    No,
    /// The grounding budget ran out before an answer was found.
    Unknown,
}

/// Can `unit`, run by `mover`, turn `pred(subject)` from true to false in
/// one step?
pub(crate) fn falsifies(
    model: &Model,
    statics: &State,
    limits: GroundLimits,
    pred: &PredicateDecl,
    subject: &Value,
    mover: &AgentInstance,
    unit: &RuleUnit<'_>,
) -> Result<Falsify, AnalysisError> {
    let env = model.program_env(mover)?;
    let mut witness = None;
    let stats = for_each_ground(
        &model.sig,
        statics,
        limits,
        |store| {
            if !model.eval_predicate(store, pred, subject)? {
                return Ok(false);
            }
            let u = collect_updates(&model.sig, store, &env, unit.rule)?;
            if u.is_empty() || u.find_clash().is_some() {
                return Ok(false);
            }
            Ok(!model.eval_predicate(&Overlay { base: store, updates: &u }, pred, subject)?)
        },
        |assigned, hit| {
            if hit {
                witness = Some(describe(assigned));
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    )?;
    Ok(match witness {
        Some(w) => Falsify::Yes(w),
        None if stats.truncated => Falsify::Unknown,
        None => Falsify::No,
    })
}

enum Liberation {
    /// The predicate never holds for this agent.
    Vacuous,
    Rule(String),
    /// No own rule liberates; carries a state where the agent is stuck.
    None(Option<String>),
}

/// Finds an own rule whose updates falsify `pred(agent)` from every state
/// satisfying it.
fn self_liberation(
    model: &Model,
    statics: &State,
    limits: GroundLimits,
    pred: &PredicateDecl,
    agent: &AgentInstance,
) -> Result<Liberation, AnalysisError> {
    let env = model.program_env(agent)?;
    let mut witness = None;
    let mut any_state = false;
    for unit in model.program_units(&agent.program) {
        let mut stuck = None;
        let stats = for_each_ground(
            &model.sig,
            statics,
            limits,
            |store| {
                if !model.eval_predicate(store, pred, &agent.id)? {
                    return Ok::<_, EvalError>(None);
                }
                let u = collect_updates(&model.sig, store, &env, unit.rule)?;
                if u.is_empty() || u.find_clash().is_some() {
                    return Ok(Some(false));
                }
                Ok(Some(!model.eval_predicate(&Overlay { base: store, updates: &u }, pred, &agent.id)?))
            },
            |assigned, res| match res {
                None => ControlFlow::Continue(()),
                Some(true) => {
                    any_state = true;
                    ControlFlow::Continue(())
                }
                Some(false) => {
                    any_state = true;
                    stuck = Some(describe(assigned));
                    ControlFlow::Break(())
                }
            },
        )?;
        if stuck.is_none() && !stats.truncated && any_state {
            return Ok(Liberation::Rule(unit.id.clone()));
        }
        if witness.is_none() {
            witness = stuck;
        }
    }
    if !any_state && witness.is_none() {
        return Ok(Liberation::Vacuous);
    }
    Ok(Liberation::None(witness))
}

fn mentioned_risky(pred: &PredicateDecl, risk: &RiskReport) -> Vec<String> {
    let mut syms = BTreeSet::new();
    formula_symbols(&pred.formula, &mut syms);
    syms.into_iter().filter(|s| risk.is_risky(s)).collect()
}

fn predicate_agents<'a>(model: &Model, pred: &PredicateDecl, agents: &'a [AgentInstance]) -> Vec<&'a AgentInstance> {
    agents
        .iter()
        .filter(|a| model.sig.domain_contains(&pred.domain, &a.id))
        .collect()
}

fn syntactic(
    model: &Model,
    pred: &PredicateDecl,
    hits: Vec<String>,
) -> Result<PredicateVerdict, AnalysisError> {
    let statics = model.initial_state()?;
    let agents = model.agent_instances()?;
    let limits = GroundLimits::default();
    let mut liberators: BTreeSet<String> = BTreeSet::new();
    let mut evidence = vec![format!("mentions risky {}", hits.join(", "))];
    let mut verdict = Verdict::NotRisky;
    for a in predicate_agents(model, pred, &agents) {
        match self_liberation(model, &statics, limits, pred, a)? {
            Liberation::Vacuous => {}
            Liberation::Rule(r) => {
                liberators.insert(r);
            }
            Liberation::None(w) => {
                verdict = Verdict::Risky;
                let mut line = format!("{}({}) has no self-liberating rule", pred.name, a.id);
                if let Some(w) = w {
                    line.push_str(&format!("; stuck in {w}"));
                }
                evidence.push(line);
                break;
            }
        }
    }
    if verdict == Verdict::NotRisky {
        if liberators.is_empty() {
            evidence.push("never holds".to_string());
        } else {
            let names: Vec<String> = liberators.into_iter().collect();
            evidence.push(format!("self-liberating rule {}", names.join(", ")));
        }
    }
    Ok(PredicateVerdict {
        name: pred.name.clone(),
        verdict,
        method: Method::Syntactic,
        evidence,
        warning: None,
    })
}

fn exploration(
    model: &Model,
    env: &EnvironmentScript,
    pred: &PredicateDecl,
    hits: Vec<String>,
    depth: usize,
    budget: usize,
) -> Result<Option<PredicateVerdict>, AnalysisError> {
    let graph = enumerate_interleavings(model, env, depth, budget)?;
    if graph.truncated {
        return Ok(None);
    }
    let agents = model.agent_instances()?;
    let subjects = predicate_agents(model, pred, &agents);
    let mut evidence = vec![format!("mentions risky {}", hits.join(", "))];
    for (node, stored) in graph.states.iter().enumerate() {
        let state = match apply_updates(stored, &env.batch(graph.depth[node])) {
            Ok(s) => s,
            Err(_) => continue,
        };
        for a in &subjects {
            let eval = |s: &State| model.eval_predicate(s, pred, &a.id);
            if !eval(&state)? {
                continue;
            }
            let waits = match agent_step(model, &state, a)? {
                StepOutcome::Quiescent => true,
                StepOutcome::Moved { next, .. } => eval(&next)?,
                StepOutcome::Inconsistent { .. } => false,
            };
            if waits {
                let changed: Vec<String> = state
                    .iter()
                    .filter(|(l, _)| hits.contains(&l.func))
                    .map(|(l, v)| format!("{l} = {v}"))
                    .collect();
                evidence.push(format!(
                    "{}({}) holds and cannot be falsified by its own move in reachable state {} at step {}{}",
                    pred.name,
                    a.id,
                    node,
                    graph.depth[node],
                    if changed.is_empty() {
                        String::new()
                    } else {
                        format!(" ({})", changed.join(", "))
                    }
                ));
                return Ok(Some(PredicateVerdict {
                    name: pred.name.clone(),
                    verdict: Verdict::Risky,
                    method: Method::Exploration,
                    evidence,
                    warning: None,
                }));
            }
        }
    }
    evidence.push(format!(
        "every reachable state satisfying it ({} states, depth {depth}) lets the agent falsify it",
        graph.len()
    ));
    Ok(Some(PredicateVerdict {
        name: pred.name.clone(),
        verdict: Verdict::NotRisky,
        method: Method::Exploration,
        evidence,
        warning: None,
    }))
}

/// Classifies one declared predicate. A predicate that mentions no risky
/// symbol is never risky.
pub fn classify_predicate(
    model: &Model,
    env: &EnvironmentScript,
    risk: &RiskReport,
    pred: &PredicateDecl,
    mode: Mode,
) -> Result<PredicateVerdict, AnalysisError> {
    let hits = mentioned_risky(pred, risk);
    let method = match mode {
        Mode::Syntactic => Method::Syntactic,
        Mode::Exploration { .. } => Method::Exploration,
    };
    if hits.is_empty() {
        return Ok(PredicateVerdict {
            name: pred.name.clone(),
            verdict: Verdict::NotRisky,
            method,
            evidence: vec!["no risky location".to_string()],
            warning: None,
        });
    }
    match mode {
        Mode::Syntactic => syntactic(model, pred, hits),
        Mode::Exploration { depth, budget } => {
            match exploration(model, env, pred, hits.clone(), depth, budget)? {
                Some(v) => Ok(v),
                None => {
                    let mut v = syntactic(model, pred, hits)?;
                    v.warning = Some(format!(
                        "exploration truncated at {budget} states; fell back to the syntactic check"
                    ));
                    Ok(v)
                }
            }
        }
    }
}
