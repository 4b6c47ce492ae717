use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use crate::asm::{apply_updates, Clash, State, UpdateSet, Value};
use crate::lang::Model;

use super::env::updates_to_json;

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum Termination {
    StepLimit,
    /// No agent can move and the environment has nothing left to inject.
    Quiescent,
    InconsistentUpdate { agent: Option<Value>, clash: Clash },
    /// A scripted schedule ran out of entries.
    ScriptExhausted,
    /// Evaluation failed mid-run.
    Fault(String),
}

impl Termination {
    pub fn code(&self) -> &'static str {
        match self {
            Termination::StepLimit => "step-limit",
            Termination::Quiescent => "quiescent",
            Termination::InconsistentUpdate { .. } => "inconsistent-update",
            Termination::ScriptExhausted => "script-exhausted",
            Termination::Fault(_) => "fault",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::InconsistentUpdate { agent, clash } => {
                write!(f, "inconsistent-update")?;
                if let Some(a) = agent {
                    write!(f, " by {a}")?;
                }
                write!(f, ": {clash}")
            }
            Termination::Fault(msg) => write!(f, "fault: {msg}"),
            other => f.write_str(other.code()),
        }
    }
}

/// One global step: the environment batch, then at most one agent move.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub step: usize,
    pub env_updates: UpdateSet,
    /// `None` when no agent moved (idle step waiting for the environment).
    pub agent: Option<Value>,
    pub fired_rules: Vec<String>,
    pub updates: UpdateSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub initial: State,
    pub agents: Vec<Value>,
    pub steps: Vec<TraceStep>,
    pub termination: Termination,
}

/// Per-step record as written to trace files.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub env_updates: serde_json::Value,
    pub agent: Option<String>,
    pub fired_rules: Vec<String>,
    pub updates: serde_json::Value,
    pub predicates: BTreeMap<String, BTreeMap<String, bool>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// States after each step, obtained by replaying the recorded updates.
    pub fn states(&self) -> Result<Vec<State>, Clash> {
        let mut out = Vec::with_capacity(self.steps.len());
        let mut s = self.initial.clone();
        for st in &self.steps {
            s = apply_updates(&s, &st.env_updates)?;
            s = apply_updates(&s, &st.updates)?;
            out.push(s.clone());
        }
        Ok(out)
    }

    /// Number of moves made by `agent`.
    pub fn moves_of(&self, agent: &Value) -> usize {
        self.steps.iter().filter(|s| s.agent.as_ref() == Some(agent)).count()
    }

    /// Trace records with predicate values evaluated on each post-step state.
    pub fn records(&self, model: &Model) -> Result<Vec<StepRecord>, crate::exec::ExecError> {
        let states = self
            .states()
            .map_err(|c| crate::exec::ExecError::Script(format!("trace does not replay: {c}")))?;
        let mut out = Vec::with_capacity(states.len());
        for (st, state) in self.steps.iter().zip(&states) {
            out.push(StepRecord {
                step: st.step,
                env_updates: updates_to_json(&st.env_updates),
                agent: st.agent.as_ref().map(|a| a.to_string()),
                fired_rules: st.fired_rules.clone(),
                updates: updates_to_json(&st.updates),
                predicates: predicate_table(model, state)?,
            });
        }
        Ok(out)
    }

    /// Writes one JSON object per line.
    pub fn write_jsonl(&self, model: &Model, out: &mut dyn Write) -> io::Result<()> {
        let records = self
            .records(model)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        for r in records {
            serde_json::to_writer(&mut *out, &r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// `{agent: {predicate: value}}` for every declared predicate instance.
pub fn predicate_table(
    model: &Model,
    state: &State,
) -> Result<BTreeMap<String, BTreeMap<String, bool>>, crate::exec::ExecError> {
    let mut table: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    for (name, decl) in &model.predicates {
        for agent in model.predicate_agents(name)? {
            let v = model
                .eval_predicate(state, decl, &agent)
                .map_err(|source| crate::exec::ExecError::Eval {
                    agent: agent.to_string(),
                    source,
                })?;
            table.entry(agent.to_string()).or_default().insert(name.clone(), v);
        }
    }
    Ok(table)
}
