use indexmap::IndexMap;
use thiserror::Error;

use crate::asm::{
    apply_updates, collect_updates, eval_term, Clash, Env, EvalError, Formula, Rule, RuleKind,
    Signature, Span, State, Term, UpdateSet, Value,
};

/// Which agents a binding spawns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentSet {
    /// `agent x in d runs R(...)`: one agent per element of `d`.
    Each { var: String, domain: String },
    /// `agent a runs R(...)`: a single named agent.
    Single(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentBinding {
    pub set: AgentSet,
    pub rule: String,
    pub args: Vec<Term>,
    pub span: Span,
}

/// A named predicate over states, instantiated once per agent of `domain`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub var: String,
    pub domain: String,
    pub formula: Formula,
    pub span: Span,
}

/// `ranking <counter> for <predicate>`: a counter claimed to decrease while
/// the predicate holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingDecl {
    pub counter: Term,
    pub predicate: String,
    pub span: Span,
}

/// A distributed ASM: a signature, an initialization block, agent bindings
/// and the predicates used to interpret its states.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Model {
    pub name: String,
    pub sig: Signature,
    pub init: Vec<Rule>,
    pub agents: Vec<AgentBinding>,
    pub predicates: IndexMap<String, PredicateDecl>,
    pub rankings: Vec<RankingDecl>,
}

/// One agent together with the program it runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentInstance {
    pub id: Value,
    pub program: String,
    pub args: Vec<Value>,
}

impl AgentInstance {
    pub fn name(&self) -> String {
        self.id.to_string()
    }
}

/// A top-level member of an agent program: the granularity at which rules
/// are reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleUnit<'m> {
    pub id: String,
    pub program: &'m str,
    pub rule: &'m Rule,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Inconsistent(#[from] Clash),
    #[error("unknown agent domain `{0}`")]
    UnknownDomain(String),
    #[error("unknown agent atom `{0}`")]
    UnknownAgent(String),
    #[error("agent {0} is bound twice")]
    DuplicateAgent(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
}

impl Model {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    /// Expands agent bindings. Agents must be pairwise distinct.
    pub fn agent_instances(&self) -> Result<Vec<AgentInstance>, ModelError> {
        let empty = State::new();
        let mut out: Vec<AgentInstance> = Vec::new();
        for b in &self.agents {
            let members: Vec<(Option<&str>, Value)> = match &b.set {
                AgentSet::Each { var, domain } => self
                    .sig
                    .domain_elements(domain)
                    .ok_or_else(|| ModelError::UnknownDomain(domain.clone()))?
                    .into_iter()
                    .map(|v| (Some(var.as_str()), v))
                    .collect(),
                AgentSet::Single(name) => {
                    let atom = self
                        .sig
                        .atom_named(name)
                        .ok_or_else(|| ModelError::UnknownAgent(name.clone()))?;
                    vec![(None, Value::Atom(atom))]
                }
            };
            for (var, id) in members {
                let mut env = Env::for_agent(id.clone());
                if let Some(var) = var {
                    env = env.with(var, id.clone());
                }
                let args = b
                    .args
                    .iter()
                    .map(|a| eval_term(&self.sig, &empty, &env, a))
                    .collect::<Result<Vec<_>, _>>()?;
                if out.iter().any(|a| a.id == id) {
                    return Err(ModelError::DuplicateAgent(id.to_string()));
                }
                out.push(AgentInstance {
                    id,
                    program: b.rule.clone(),
                    args,
                });
            }
        }
        Ok(out)
    }

    /// The environment an agent's program body is evaluated in.
    pub fn program_env(&self, agent: &AgentInstance) -> Result<Env, EvalError> {
        let def = self
            .sig
            .rules
            .get(&agent.program)
            .ok_or_else(|| EvalError::UnknownRule(agent.program.clone()))?;
        if def.params.len() != agent.args.len() {
            return Err(EvalError::Arity {
                name: def.name.clone(),
                expected: def.params.len(),
                found: agent.args.len(),
            });
        }
        let mut env = Env::for_agent(agent.id.clone());
        for (p, v) in def.params.iter().zip(&agent.args) {
            env = env.with(p, v.clone());
        }
        Ok(env)
    }

    /// Top-level members of a program body; unlabeled members get
    /// `<program>#<index>` identifiers.
    pub fn program_units(&self, program: &str) -> Vec<RuleUnit<'_>> {
        let Some((name, def)) = self.sig.rules.get_key_value(program) else {
            return Vec::new();
        };
        let members: Vec<&Rule> = match &def.body.kind {
            RuleKind::Block(rules) if def.body.label.is_none() => rules.iter().collect(),
            _ => vec![&def.body],
        };
        members
            .into_iter()
            .enumerate()
            .map(|(i, r)| RuleUnit {
                id: r.label.clone().unwrap_or_else(|| format!("{name}#{i}")),
                program: name.as_str(),
                rule: r,
            })
            .collect()
    }

    /// Updates produced by the initialization block from the empty state.
    pub fn init_updates(&self) -> Result<UpdateSet, ModelError> {
        let empty = State::new();
        let mut all = UpdateSet::new();
        for r in &self.init {
            all.extend(collect_updates(&self.sig, &empty, &Env::new(), r)?);
        }
        Ok(all)
    }

    pub fn initial_state(&self) -> Result<State, ModelError> {
        Ok(apply_updates(&State::new(), &self.init_updates()?)?)
    }

    /// Agents over which a predicate is instantiated.
    pub fn predicate_agents(&self, pred: &str) -> Result<Vec<Value>, ModelError> {
        let decl = self
            .predicates
            .get(pred)
            .ok_or_else(|| ModelError::UnknownPredicate(pred.to_string()))?;
        let agents = self.agent_instances()?;
        Ok(agents
            .into_iter()
            .map(|a| a.id)
            .filter(|id| self.sig.domain_contains(&decl.domain, id))
            .collect())
    }

    /// Evaluates a predicate for one agent: the predicate variable and
    /// `self` are both bound to the agent.
    pub fn eval_predicate(
        &self,
        store: &dyn crate::asm::Store,
        pred: &PredicateDecl,
        agent: &Value,
    ) -> Result<bool, EvalError> {
        let env = Env::for_agent(agent.clone()).with(&pred.var, agent.clone());
        crate::asm::eval_formula(&self.sig, store, &env, &pred.formula)
    }
}
