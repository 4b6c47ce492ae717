use std::collections::BTreeSet;

use serde::Serialize;

use crate::asm::{Formula, Rule, RuleKind, Term};
use crate::lang::Model;

/// Symbols read and written by one top-level rule unit. Calls are followed
/// into the called rule bodies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleFootprint {
    pub id: String,
    pub program: String,
    /// Symbols in guards and choose conditions.
    pub reads: BTreeSet<String>,
    /// Symbols in assignment targets, assigned values, call arguments and
    /// choose rankings.
    pub value_reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    /// Conjuncts of the unit's outermost guard, flattened.
    #[serde(serialize_with = "display_all")]
    pub conjuncts: Vec<Formula>,
}

fn display_all<S: serde::Serializer>(fs: &[Formula], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(fs.iter().map(|f| f.to_string()))
}

/// One assignment reachable from a rule unit, with everything that decides
/// whether and what it writes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteSite {
    pub unit: String,
    pub program: String,
    pub symbol: String,
    /// Symbols in enclosing guards plus the target arguments and value.
    pub reads: BTreeSet<String>,
}

pub(crate) fn term_symbols(t: &Term, out: &mut BTreeSet<String>) {
    t.for_each_symbol(&mut |s| {
        out.insert(s.to_string());
    });
}

pub(crate) fn formula_symbols(f: &Formula, out: &mut BTreeSet<String>) {
    f.for_each_symbol(&mut |s| {
        out.insert(s.to_string());
    });
}

struct Walker<'m> {
    model: &'m Model,
    unit: String,
    program: String,
    fp: RuleFootprint,
    sites: Vec<WriteSite>,
    calls: Vec<String>,
}

impl Walker<'_> {
    fn rule(&mut self, r: &Rule, path: &BTreeSet<String>) {
        match &r.kind {
            RuleKind::Skip => {}
            RuleKind::Assign { func, args, value } => {
                let mut reads = path.clone();
                for a in args {
                    term_symbols(a, &mut reads);
                    term_symbols(a, &mut self.fp.value_reads);
                }
                term_symbols(value, &mut reads);
                term_symbols(value, &mut self.fp.value_reads);
                self.fp.writes.insert(func.clone());
                self.sites.push(WriteSite {
                    unit: self.unit.clone(),
                    program: self.program.clone(),
                    symbol: func.clone(),
                    reads,
                });
            }
            RuleKind::If { guard, then } => {
                let mut inner = path.clone();
                formula_symbols(guard, &mut inner);
                formula_symbols(guard, &mut self.fp.reads);
                self.rule(then, &inner);
            }
            RuleKind::Block(rules) => rules.iter().for_each(|r| self.rule(r, path)),
            RuleKind::Forall { body, .. } => self.rule(body, path),
            RuleKind::Choose { with, rank, body, .. } => {
                let mut inner = path.clone();
                formula_symbols(with, &mut inner);
                formula_symbols(with, &mut self.fp.reads);
                if let Some(t) = rank {
                    term_symbols(t, &mut inner);
                    term_symbols(t, &mut self.fp.value_reads);
                }
                self.rule(body, &inner);
            }
            RuleKind::Call { rule, args } => {
                if self.calls.contains(rule) {
                    return;
                }
                let mut inner = path.clone();
                for a in args {
                    term_symbols(a, &mut inner);
                    term_symbols(a, &mut self.fp.value_reads);
                }
                if let Some(def) = self.model.sig.rules.get(rule) {
                    self.calls.push(rule.clone());
                    self.rule(&def.body, &inner);
                    self.calls.pop();
                }
            }
        }
    }
}

/// Programs run by at least one agent, in binding order.
pub(crate) fn agent_programs(model: &Model) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for b in &model.agents {
        if !out.contains(&b.rule) {
            out.push(b.rule.clone());
        }
    }
    out
}

fn walk(model: &Model) -> Vec<(RuleFootprint, Vec<WriteSite>)> {
    let mut out = Vec::new();
    for program in agent_programs(model) {
        for unit in model.program_units(&program) {
            let conjuncts = match &unit.rule.kind {
                RuleKind::If { guard, .. } => guard.conjuncts().into_iter().cloned().collect(),
                _ => Vec::new(),
            };
            let mut w = Walker {
                model,
                unit: unit.id.clone(),
                program: program.clone(),
                fp: RuleFootprint {
                    id: unit.id.clone(),
                    program: program.clone(),
                    reads: BTreeSet::new(),
                    value_reads: BTreeSet::new(),
                    writes: BTreeSet::new(),
                    conjuncts,
                },
                sites: Vec::new(),
                calls: vec![program.clone()],
            };
            w.rule(unit.rule, &BTreeSet::new());
            out.push((w.fp, w.sites));
        }
    }
    out
}

/// Footprints of every rule unit of every agent program.
pub fn rule_footprints(model: &Model) -> Vec<RuleFootprint> {
    walk(model).into_iter().map(|(fp, _)| fp).collect()
}

/// Assignments reachable from agent programs (initialization excluded).
pub fn write_sites(model: &Model) -> Vec<WriteSite> {
    walk(model).into_iter().flat_map(|(_, s)| s).collect()
}
