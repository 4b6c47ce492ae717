use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asm::{apply_updates, State, UpdateSet, Value};
use crate::lang::{AgentInstance, Model};

use super::env::EnvironmentScript;
use super::step::{agent_step, ExecError, StepOutcome};
use super::trace::{Termination, Trace, TraceStep};

/// How the next agent is picked at each global step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scheduler {
    /// Cycles through agents in binding order, skipping quiescent ones.
    RoundRobin,
    /// Uniform choice among agents that can move.
    Random { seed: u64 },
    /// Replays the given agent names, one per step.
    Scripted(Vec<String>),
}

enum Pick {
    Agent(usize, StepOutcome),
    Idle,
    Stop(Termination),
}

struct Picker<'a> {
    policy: &'a Scheduler,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl Picker<'_> {
    fn pick(
        &mut self,
        model: &Model,
        agents: &[AgentInstance],
        state: &State,
        step: usize,
    ) -> Result<Pick, ExecError> {
        match self.policy {
            Scheduler::Scripted(names) => {
                let Some(name) = names.get(step) else {
                    return Ok(Pick::Stop(Termination::ScriptExhausted));
                };
                let idx = agents
                    .iter()
                    .position(|a| a.name() == *name)
                    .ok_or_else(|| ExecError::UnknownAgent(name.clone()))?;
                Ok(Pick::Agent(idx, agent_step(model, state, &agents[idx])?))
            }
            Scheduler::RoundRobin => {
                let n = agents.len();
                for k in 0..n {
                    let idx = (self.cursor + k) % n;
                    let out = agent_step(model, state, &agents[idx])?;
                    if out != StepOutcome::Quiescent {
                        self.cursor = (idx + 1) % n;
                        return Ok(Pick::Agent(idx, out));
                    }
                }
                Ok(Pick::Idle)
            }
            Scheduler::Random { .. } => {
                let mut ready = Vec::new();
                for (idx, a) in agents.iter().enumerate() {
                    let out = agent_step(model, state, a)?;
                    if out != StepOutcome::Quiescent {
                        ready.push((idx, out));
                    }
                }
                if ready.is_empty() {
                    return Ok(Pick::Idle);
                }
                let k = self.rng.random_range(0..ready.len());
                let (idx, out) = ready.swap_remove(k);
                Ok(Pick::Agent(idx, out))
            }
        }
    }
}

/// Runs the model as an interleaving of agent moves. Each global step
/// applies the environment batch for that step, then one agent move.
pub fn run_distributed(
    model: &Model,
    scheduler: &Scheduler,
    env: &EnvironmentScript,
    max_steps: usize,
) -> Result<Trace, ExecError> {
    env.check(&model.sig)?;
    let agents = model.agent_instances()?;
    let initial = model.initial_state()?;
    let mut picker = Picker {
        policy: scheduler,
        cursor: 0,
        rng: ChaCha8Rng::seed_from_u64(match scheduler {
            Scheduler::Random { seed } => *seed,
            _ => 0,
        }),
    };
    let mut trace = Trace {
        initial: initial.clone(),
        agents: agents.iter().map(|a| a.id.clone()).collect(),
        steps: Vec::new(),
        termination: Termination::StepLimit,
    };
    let mut state = initial;
    for step in 0..max_steps {
        let env_updates = env.batch(step);
        state = match apply_updates(&state, &env_updates) {
            Ok(s) => s,
            Err(clash) => {
                trace.termination = Termination::InconsistentUpdate { agent: None, clash };
                return Ok(trace);
            }
        };
        let pick = match picker.pick(model, &agents, &state, step) {
            Ok(p) => p,
            Err(ExecError::Eval { agent, source }) => {
                Pick::Stop(Termination::Fault(format!("agent {agent}: {source}")))
            }
            Err(e) => return Err(e),
        };
        let record = |agent: Option<Value>, fired_rules, updates| TraceStep {
            step,
            env_updates: env_updates.clone(),
            agent,
            fired_rules,
            updates,
        };
        match pick {
            Pick::Stop(t) => {
                trace.termination = t;
                return Ok(trace);
            }
            Pick::Idle => {
                if env_updates.is_empty() && !env.pending_after(step) {
                    trace.termination = Termination::Quiescent;
                    return Ok(trace);
                }
                trace.steps.push(record(None, Vec::new(), UpdateSet::new()));
            }
            Pick::Agent(idx, outcome) => {
                let id = agents[idx].id.clone();
                match outcome {
                    StepOutcome::Quiescent => {
                        trace.steps.push(record(Some(id), Vec::new(), UpdateSet::new()));
                    }
                    StepOutcome::Moved { updates, fired, next } => {
                        trace.steps.push(record(Some(id), fired, updates));
                        state = next;
                    }
                    StepOutcome::Inconsistent { clash, .. } => {
                        trace.termination = Termination::InconsistentUpdate {
                            agent: Some(id),
                            clash,
                        };
                        return Ok(trace);
                    }
                }
            }
        }
    }
    Ok(trace)
}
