use thiserror::Error;

use crate::asm::{apply_updates, collect_updates, Clash, EvalError, State, Store, UpdateSet};
use crate::lang::{AgentInstance, Model, ModelError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("agent {agent}: {source}")]
    Eval { agent: String, source: EvalError },
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("environment script: {0}")]
    Script(String),
}

/// Result of offering a move to one agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Moved {
        updates: UpdateSet,
        fired: Vec<String>,
        next: State,
    },
    /// No rule of the agent produced an update.
    Quiescent,
    Inconsistent {
        updates: UpdateSet,
        fired: Vec<String>,
        clash: Clash,
    },
}

/// Updates of an agent's program in `store`, with the ids of the top-level
/// rule units that contributed.
pub fn agent_updates(
    model: &Model,
    store: &dyn Store,
    agent: &AgentInstance,
) -> Result<(UpdateSet, Vec<String>), ExecError> {
    let eval_err = |source| ExecError::Eval {
        agent: agent.name(),
        source,
    };
    let env = model.program_env(agent).map_err(eval_err)?;
    let mut all = UpdateSet::new();
    let mut fired = Vec::new();
    for unit in model.program_units(&agent.program) {
        let u = collect_updates(&model.sig, store, &env, unit.rule).map_err(eval_err)?;
        if !u.is_empty() {
            fired.push(unit.id.clone());
            all.extend(u);
        }
    }
    Ok((all, fired))
}

/// One move of `agent` from `state`.
pub fn agent_step(model: &Model, state: &State, agent: &AgentInstance) -> Result<StepOutcome, ExecError> {
    let (updates, fired) = agent_updates(model, state, agent)?;
    if updates.is_empty() {
        return Ok(StepOutcome::Quiescent);
    }
    Ok(match apply_updates(state, &updates) {
        Ok(next) => StepOutcome::Moved { updates, fired, next },
        Err(clash) => StepOutcome::Inconsistent { updates, fired, clash },
    })
}

/// Looks an agent up by its printed name.
pub fn find_agent(model: &Model, name: &str) -> Result<AgentInstance, ExecError> {
    model
        .agent_instances()?
        .into_iter()
        .find(|a| a.name() == name)
        .ok_or_else(|| ExecError::UnknownAgent(name.to_string()))
}
