use std::fmt;
use std::ops::ControlFlow;

use serde::Serialize;

use crate::asm::{collect_updates, eval_term, EvalError, UpdateSet, Value};
use crate::lang::{Model, RankingDecl};

use super::ground::{describe, for_each_ground, GroundLimits, Overlay};
use super::AnalysisError;

/// Result of checking one `ranking` annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankingCheck {
    pub counter: String,
    pub predicate: String,
    pub verified: bool,
    pub detail: String,
}

impl fmt::Display for RankingCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ranking {} for {}: {} ({})",
            self.counter,
            self.predicate,
            if self.verified { "verified" } else { "not verified" },
            self.detail
        )
    }
}

fn natural(v: &Value) -> Option<i64> {
    v.as_int().filter(|i| *i >= 0)
}

/// Checks that every move of the agent from a state where the predicate
/// holds either falsifies it or strictly decreases the counter without
/// going below zero, and that entering the predicate leaves the counter
/// non-negative.
pub fn verify_ranking(model: &Model, decl: &RankingDecl) -> Result<RankingCheck, AnalysisError> {
    let counter = decl.counter.to_string();
    let Some(pred) = model.predicates.get(&decl.predicate) else {
        return Ok(RankingCheck {
            counter,
            predicate: decl.predicate.clone(),
            verified: false,
            detail: "unknown predicate".to_string(),
        });
    };
    let statics = model.initial_state()?;
    let mut failure: Option<String> = None;
    let mut truncated = false;
    let mut checked = 0usize;
    for agent in model.agent_instances()? {
        if !model.sig.domain_contains(&pred.domain, &agent.id) {
            continue;
        }
        let env = model.program_env(&agent)?;
        let cenv = env.with(&pred.var, agent.id.clone());
        let units = model.program_units(&agent.program);
        let stats = for_each_ground(
            &model.sig,
            &statics,
            GroundLimits::default(),
            |store| {
                let before = model.eval_predicate(store, pred, &agent.id)?;
                let c0 = if before {
                    match natural(&eval_term(&model.sig, store, &cenv, &decl.counter)?) {
                        Some(c) => Some(c),
                        None => return Ok::<_, EvalError>(None),
                    }
                } else {
                    None
                };
                let mut u = UpdateSet::new();
                for unit in &units {
                    u.extend(collect_updates(&model.sig, store, &env, unit.rule)?);
                }
                if u.find_clash().is_some() {
                    return Ok(Some(Err("inconsistent move".to_string())));
                }
                let after_store = Overlay { base: store, updates: &u };
                let after = model.eval_predicate(&after_store, pred, &agent.id)?;
                if !after {
                    return Ok(Some(Ok(())));
                }
                let c1 = eval_term(&model.sig, &after_store, &cenv, &decl.counter)?;
                Ok(Some(match (c0, natural(&c1)) {
                    (Some(c0), Some(c1)) if c1 < c0 => Ok(()),
                    (Some(c0), _) => Err(format!("counter goes from {c0} to {c1} while {} holds", pred.name)),
                    (None, Some(_)) => Ok(()),
                    (None, None) => Err(format!("{} starts with counter {c1}", pred.name)),
                }))
            },
            |assigned, res| match res {
                Some(Err(why)) => {
                    failure = Some(format!("{why} for {} in {}", agent.id, describe(assigned)));
                    ControlFlow::Break(())
                }
                Some(Ok(())) => {
                    checked += 1;
                    ControlFlow::Continue(())
                }
                None => ControlFlow::Continue(()),
            },
        )?;
        truncated |= stats.truncated;
        if failure.is_some() {
            break;
        }
    }
    let (verified, detail) = match failure {
        Some(f) => (false, f),
        None if truncated => (false, "grounding budget exhausted".to_string()),
        None => (true, format!("decreases on every step across {checked} abstract states")),
    };
    Ok(RankingCheck {
        counter,
        predicate: decl.predicate.clone(),
        verified,
        detail,
    })
}

pub fn verify_rankings(model: &Model) -> Result<Vec<RankingCheck>, AnalysisError> {
    model.rankings.iter().map(|r| verify_ranking(model, r)).collect()
}
