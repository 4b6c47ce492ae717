use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::asm::{apply_updates, State, Value};
use crate::exec::{agent_step, EnvironmentScript, StateGraph, StepOutcome};
use crate::lang::Model;

use super::AnalysisError;

/// A strongly connected set of explored states in which `predicate` holds
/// for `agent` and the agent's own move never falsifies it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WaitingCycle {
    pub agent: String,
    pub predicate: String,
    /// Node indices into the state graph, sorted.
    pub nodes: Vec<usize>,
    #[serde(skip)]
    pub agent_id: Value,
}

/// Finds cycles of the explored graph on which some agent waits on one of
/// the given predicates. A blocked (quiescent) move counts as a stutter step,
/// so a single state where the agent is stuck forms a cycle on its own.
pub fn waiting_cycles(
    model: &Model,
    env: &EnvironmentScript,
    graph: &StateGraph,
    predicates: &[&str],
) -> Result<Vec<WaitingCycle>, AnalysisError> {
    let agents = model.agent_instances()?;
    let states: Vec<State> = graph
        .states
        .iter()
        .zip(&graph.depth)
        .map(|(s, d)| apply_updates(s, &env.batch(*d)).unwrap_or_else(|_| s.clone()))
        .collect();
    let mut out = Vec::new();
    for name in predicates {
        let Some(pred) = model.predicates.get(*name) else { continue };
        for a in agents.iter().filter(|a| model.sig.domain_contains(&pred.domain, &a.id)) {
            let mut g: DiGraph<usize, ()> = DiGraph::new();
            let mut idx: Vec<Option<NodeIndex>> = vec![None; states.len()];
            let mut stutter = vec![false; states.len()];
            for (n, s) in states.iter().enumerate() {
                if !model.eval_predicate(s, pred, &a.id)? {
                    continue;
                }
                let (waits, quiet) = match agent_step(model, s, a)? {
                    StepOutcome::Quiescent => (true, true),
                    StepOutcome::Moved { next, .. } => (model.eval_predicate(&next, pred, &a.id)?, false),
                    StepOutcome::Inconsistent { .. } => (false, false),
                };
                if waits {
                    idx[n] = Some(g.add_node(n));
                    stutter[n] = quiet;
                }
            }
            for e in &graph.edges {
                if let (Some(x), Some(y)) = (idx[e.from], idx[e.to]) {
                    g.update_edge(x, y, ());
                }
            }
            for (n, q) in stutter.iter().enumerate() {
                if let (true, Some(x)) = (*q, idx[n]) {
                    g.update_edge(x, x, ());
                }
            }
            for scc in tarjan_scc(&g) {
                let cyclic = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
                if cyclic {
                    let mut nodes: Vec<usize> = scc.iter().map(|i| g[*i]).collect();
                    nodes.sort_unstable();
                    out.push(WaitingCycle {
                        agent: a.id.to_string(),
                        predicate: name.to_string(),
                        nodes,
                        agent_id: a.id.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}
