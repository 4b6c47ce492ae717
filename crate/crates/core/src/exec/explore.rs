use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::asm::{apply_updates, Clash, Location, RecordingStore, State, UpdateSet, Value};
use crate::lang::{AgentInstance, Model};

use super::env::EnvironmentScript;
use super::step::{agent_step, agent_updates, ExecError, StepOutcome};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// `None` for an idle step that only lets the environment advance.
    pub agent: Option<Value>,
    pub fired: Vec<String>,
    pub updates: UpdateSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InconsistentMove {
    pub from: usize,
    pub agent: Value,
    pub clash: Clash,
}

/// Reachable states and labeled move edges. Nodes are keyed by state and by
/// how far the environment script has progressed.
#[derive(Debug, Clone, Default)]
pub struct StateGraph {
    pub states: Vec<State>,
    /// Global step index at which each node was first reached.
    pub depth: Vec<usize>,
    pub edges: Vec<Edge>,
    pub inconsistent: Vec<InconsistentMove>,
    /// Set when the state budget stopped the search early.
    pub truncated: bool,
    /// Nodes whose outgoing moves were computed.
    pub expanded: Vec<bool>,
}

impl StateGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn successors(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == node)
    }

    /// Expanded nodes with no outgoing edge and no inconsistent move.
    pub fn dead_ends(&self) -> Vec<usize> {
        let mut has_out = vec![false; self.states.len()];
        for e in &self.edges {
            has_out[e.from] = true;
        }
        for m in &self.inconsistent {
            has_out[m.from] = true;
        }
        (0..self.states.len())
            .filter(|&n| self.expanded[n] && !has_out[n])
            .collect()
    }
}

/// Default cap on distinct nodes.
pub const DEFAULT_STATE_BUDGET: usize = 200_000;

/// Breadth-first closure of all interleavings up to `depth` global steps.
pub fn enumerate_interleavings(
    model: &Model,
    env: &EnvironmentScript,
    depth: usize,
    budget: usize,
) -> Result<StateGraph, ExecError> {
    env.check(&model.sig)?;
    let agents = model.agent_instances()?;
    let horizon = env.horizon();
    let mut g = StateGraph::default();
    let mut index: HashMap<(State, usize), usize> = HashMap::new();
    let mut queue = VecDeque::new();

    let init = model.initial_state()?;
    index.insert((init.clone(), 0), 0);
    g.states.push(init);
    g.depth.push(0);
    g.expanded.push(false);
    queue.push_back(0usize);

    while let Some(node) = queue.pop_front() {
        let d = g.depth[node];
        if d >= depth {
            continue;
        }
        g.expanded[node] = true;
        let state = apply_updates(&g.states[node], &env.batch(d)).map_err(|c| {
            ExecError::Script(format!("step {d}: {c}"))
        })?;
        let mut succ: Vec<(Option<Value>, Vec<String>, UpdateSet, State)> = Vec::new();
        for a in &agents {
            match agent_step(model, &state, a)? {
                StepOutcome::Quiescent => {}
                StepOutcome::Moved { updates, fired, next } => {
                    succ.push((Some(a.id.clone()), fired, updates, next))
                }
                StepOutcome::Inconsistent { clash, .. } => g.inconsistent.push(InconsistentMove {
                    from: node,
                    agent: a.id.clone(),
                    clash,
                }),
            }
        }
        if env.pending_after(d) || (succ.is_empty() && d < horizon) {
            succ.push((None, Vec::new(), UpdateSet::new(), state.clone()));
        }
        for (agent, fired, updates, next) in succ {
            let key = (next, (d + 1).min(horizon));
            let to = match index.get(&key) {
                Some(&to) => to,
                None => {
                    if g.states.len() >= budget {
                        g.truncated = true;
                        continue;
                    }
                    let to = g.states.len();
                    g.states.push(key.0.clone());
                    g.depth.push(d + 1);
                    g.expanded.push(false);
                    index.insert(key, to);
                    queue.push_back(to);
                    to
                }
            };
            g.edges.push(Edge {
                from: node,
                to,
                agent,
                fired,
                updates,
            });
        }
    }
    Ok(g)
}

/// Locations read and written by one agent's move from `state`.
pub fn footprint(
    model: &Model,
    state: &State,
    agent: &AgentInstance,
) -> Result<(BTreeSet<Location>, BTreeSet<Location>), ExecError> {
    let rec = RecordingStore::new(state);
    let (updates, _) = agent_updates(model, &rec, agent)?;
    Ok((rec.into_reads(), updates.locations()))
}

/// Two moves are independent when neither writes a location the other
/// reads or writes.
pub fn independent(model: &Model, state: &State, a: &AgentInstance, b: &AgentInstance) -> Result<bool, ExecError> {
    let (ra, wa) = footprint(model, state, a)?;
    let (rb, wb) = footprint(model, state, b)?;
    Ok(wa.is_disjoint(&rb) && wa.is_disjoint(&wb) && wb.is_disjoint(&ra))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coherence {
    pub a_then_b: Option<State>,
    pub b_then_a: Option<State>,
}

impl Coherence {
    /// Both orders are defined and agree.
    pub fn coherent(&self) -> bool {
        self.a_then_b.is_some() && self.a_then_b == self.b_then_a
    }
}

fn move_or_stay(model: &Model, s: &State, a: &AgentInstance) -> Result<Option<State>, ExecError> {
    Ok(match agent_step(model, s, a)? {
        StepOutcome::Quiescent => Some(s.clone()),
        StepOutcome::Moved { next, .. } => Some(next),
        StepOutcome::Inconsistent { .. } => None,
    })
}

/// Runs `a` then `b` and `b` then `a` from `state`, recomputing the second
/// move in the intermediate state.
pub fn check_coherence(
    model: &Model,
    state: &State,
    a: &AgentInstance,
    b: &AgentInstance,
) -> Result<Coherence, ExecError> {
    let order = |x: &AgentInstance, y: &AgentInstance| -> Result<Option<State>, ExecError> {
        match move_or_stay(model, state, x)? {
            Some(mid) => move_or_stay(model, &mid, y),
            None => Ok(None),
        }
    };
    Ok(Coherence {
        a_then_b: order(a, b)?,
        b_then_a: order(b, a)?,
    })
}
