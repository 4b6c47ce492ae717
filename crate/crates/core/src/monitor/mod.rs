//! Trace monitoring: predicate annotation, cyclical-return alarms and
//! progress summaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asm::{apply_updates, Update, UpdateSet};
use crate::exec::{parse_location, predicate_table, ExecError, Trace};
use crate::lang::{Model, ModelError};

/// `agent -> predicate -> value`
pub type PredicateTable = BTreeMap<String, BTreeMap<String, bool>>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("step {step}: stored predicate values differ from the replayed state")]
    Mismatch { step: usize },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("threshold must be at least 1")]
    ZeroThreshold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotatedRow {
    pub step: usize,
    pub agent: Option<String>,
    pub predicates: PredicateTable,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AnnotatedTrace {
    /// Values in the initial state, when known.
    pub initial: Option<PredicateTable>,
    pub rows: Vec<AnnotatedRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Alarm {
    pub agent: String,
    pub predicate: String,
    /// Step of the first move in the run.
    pub start: usize,
    pub length: usize,
    pub threshold: usize,
}

/// What a run length counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunLength {
    /// Moves of the agent itself, including moves that changed nothing.
    #[default]
    AgentMoves,
    /// Every global step.
    GlobalSteps,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub agent: String,
    pub predicate: String,
    pub longest_true_run: usize,
    pub flips: usize,
}

#[derive(Deserialize)]
struct RawRecord {
    step: usize,
    #[serde(default)]
    env_updates: Vec<RawUpdate>,
    agent: Option<String>,
    #[serde(default)]
    updates: Vec<RawUpdate>,
    predicates: PredicateTable,
}

#[derive(Deserialize)]
struct RawUpdate {
    location: String,
    value: serde_json::Value,
}

fn parse_records(text: &str) -> Result<Vec<RawRecord>, MonitorError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| MonitorError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn decode_updates(model: &Model, raw: &[RawUpdate], line: usize) -> Result<UpdateSet, MonitorError> {
    raw.iter()
        .map(|u| {
            let loc = parse_location(&model.sig, &u.location)?;
            let value = model.sig.value_from_json(&u.value).ok_or_else(|| MonitorError::Parse {
                line,
                msg: format!("bad value {} for {}", u.value, u.location),
            })?;
            Ok(Update::new(loc, value))
        })
        .collect()
}

/// Evaluates every declared predicate for every agent after each step.
pub fn annotate_trace(model: &Model, trace: &Trace) -> Result<AnnotatedTrace, MonitorError> {
    let initial = predicate_table(model, &trace.initial)?;
    let rows = trace
        .records(model)?
        .into_iter()
        .map(|r| AnnotatedRow {
            step: r.step,
            agent: r.agent,
            predicates: r.predicates,
        })
        .collect();
    Ok(AnnotatedTrace {
        initial: Some(initial),
        rows,
    })
}

impl AnnotatedTrace {
    /// Reads a trace file as stored, trusting its predicate columns.
    pub fn from_jsonl(text: &str) -> Result<Self, MonitorError> {
        let rows = parse_records(text)?
            .into_iter()
            .map(|r| AnnotatedRow {
                step: r.step,
                agent: r.agent,
                predicates: r.predicates,
            })
            .collect();
        Ok(Self { initial: None, rows })
    }

    /// Reads a trace file and replays it against `model`, rejecting rows
    /// whose stored predicate values disagree with the replayed state.
    pub fn from_jsonl_checked(model: &Model, text: &str) -> Result<Self, MonitorError> {
        let mut state = model.initial_state()?;
        let initial = predicate_table(model, &state)?;
        let mut rows = Vec::new();
        for (i, r) in parse_records(text)?.into_iter().enumerate() {
            let env = decode_updates(model, &r.env_updates, i + 1)?;
            let moves = decode_updates(model, &r.updates, i + 1)?;
            let clash = |c| MonitorError::Parse {
                line: i + 1,
                msg: format!("updates do not apply: {c}"),
            };
            state = apply_updates(&state, &env).map_err(clash)?;
            state = apply_updates(&state, &moves).map_err(clash)?;
            if predicate_table(model, &state)? != r.predicates {
                return Err(MonitorError::Mismatch { step: r.step });
            }
            rows.push(AnnotatedRow {
                step: r.step,
                agent: r.agent,
                predicates: r.predicates,
            });
        }
        Ok(Self {
            initial: Some(initial),
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Predicate names appearing anywhere in the trace.
    pub fn predicates(&self) -> BTreeSet<String> {
        self.tables().flat_map(|t| t.values().flat_map(|m| m.keys().cloned())).collect()
    }

    /// Agents with at least one predicate column.
    pub fn agents(&self) -> BTreeSet<String> {
        self.tables().flat_map(|t| t.keys().cloned()).collect()
    }

    fn tables(&self) -> impl Iterator<Item = &PredicateTable> {
        self.initial.iter().chain(self.rows.iter().map(|r| &r.predicates))
    }

    fn value(t: &PredicateTable, agent: &str, pred: &str) -> Option<bool> {
        t.get(agent).and_then(|m| m.get(pred)).copied()
    }

    /// Maximal runs `(start, length)` during which `pred(agent)` stays true.
    fn runs(&self, agent: &str, pred: &str, counting: RunLength) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut current: Option<(usize, usize)> = None;
        for row in &self.rows {
            let holds = Self::value(&row.predicates, agent, pred).unwrap_or(false);
            if !holds {
                out.extend(current.take());
                continue;
            }
            let counts = match counting {
                RunLength::GlobalSteps => true,
                RunLength::AgentMoves => row.agent.as_deref() == Some(agent),
            };
            if counts {
                match &mut current {
                    Some((_, len)) => *len += 1,
                    None => current = Some((row.step, 1)),
                }
            }
        }
        out.extend(current);
        out
    }
}

/// One alarm per maximal run of at least `k` counted steps during which the
/// predicate stays true for an agent. Changes to other locations do not
/// break a run.
pub fn detect_cyclical_return(
    at: &AnnotatedTrace,
    pred: &str,
    k: usize,
    counting: RunLength,
) -> Result<Vec<Alarm>, MonitorError> {
    if k == 0 {
        return Err(MonitorError::ZeroThreshold);
    }
    if !at.predicates().contains(pred) {
        return Err(MonitorError::UnknownPredicate(pred.to_string()));
    }
    let mut alarms = Vec::new();
    for agent in at.agents() {
        for (start, length) in at.runs(&agent, pred, counting) {
            if length >= k {
                alarms.push(Alarm {
                    agent: agent.clone(),
                    predicate: pred.to_string(),
                    start,
                    length,
                    threshold: k,
                });
            }
        }
    }
    Ok(alarms)
}

/// Longest true run and number of truth changes for every agent and predicate.
pub fn progress_summary(at: &AnnotatedTrace, counting: RunLength) -> Vec<Progress> {
    let mut out = Vec::new();
    for agent in at.agents() {
        for pred in at.predicates() {
            if !at.tables().any(|t| AnnotatedTrace::value(t, &agent, &pred).is_some()) {
                continue;
            }
            let mut last = at.initial.as_ref().and_then(|t| AnnotatedTrace::value(t, &agent, &pred));
            let mut flips = 0;
            for row in &at.rows {
                let v = AnnotatedTrace::value(&row.predicates, &agent, &pred);
                if let (Some(a), Some(b)) = (last, v) {
                    if a != b {
                        flips += 1;
                    }
                }
                if v.is_some() {
                    last = v;
                }
            }
            let longest = at.runs(&agent, &pred, counting).into_iter().map(|(_, l)| l).max().unwrap_or(0);
            out.push(Progress {
                agent: agent.clone(),
                predicate: pred.clone(),
                longest_true_run: longest,
                flips,
            });
        }
    }
    out
}
