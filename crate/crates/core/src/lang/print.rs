//! Canonical text form of a model. Parsing the output yields an equal model.

use std::fmt::Write;

use crate::asm::{DerivedBody, DomainKind, FunctionSymbol, Kind, Rule, RuleKind, Scope, Term, Value};

use super::model::{AgentSet, Model};

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

/// Renders a term, expanding constant sequences into list syntax.
fn term(t: &Term) -> String {
    match t {
        Term::Const(Value::Seq(items)) => {
            let parts: Vec<Term> = items.iter().cloned().map(Term::Const).collect();
            format!("[{}]", parts.iter().map(term).collect::<Vec<_>>().join(", "))
        }
        other => other.to_string(),
    }
}

fn call(name: &str, args: &[Term]) -> String {
    if args.is_empty() {
        name.to_string()
    } else {
        format!("{name}({})", args.iter().map(term).collect::<Vec<_>>().join(", "))
    }
}

fn function(f: &FunctionSymbol) -> String {
    let mut s = format!("function {} : ", f.name);
    if f.args.is_empty() {
        s.push_str(&f.result.to_string());
    } else {
        let args: Vec<String> = f.args.iter().map(|a| a.to_string()).collect();
        let _ = write!(s, "{} -> {}", args.join(" x "), f.result);
    }
    let _ = write!(s, " {}", f.kind);
    if let Some(w) = &f.writer {
        let _ = write!(s, " by {w}");
    }
    if f.scope == Scope::AgentLocal {
        s.push_str(" local");
    }
    if f.kind == Kind::Derived {
        if let Some(def) = &f.definition {
            if !def.params.is_empty() {
                let _ = write!(s, " ({})", def.params.join(", "));
            }
            let body = match &def.body {
                DerivedBody::Term(t) => term(t),
                DerivedBody::Formula(phi) => phi.to_string(),
            };
            let _ = write!(s, " := {body}");
        }
    }
    s
}

/// Writes a rule at the given indentation. The first line is not indented.
fn rule(out: &mut String, r: &Rule, indent: usize) {
    if let Some(l) = &r.label {
        let _ = write!(out, "\"{l}\": ");
    }
    let pad = "  ".repeat(indent);
    match &r.kind {
        RuleKind::Skip => out.push_str("skip"),
        RuleKind::Assign { func, args, value } => {
            let _ = write!(out, "{} := {}", call(func, args), term(value));
        }
        RuleKind::Call { rule, args } => {
            let _ = write!(out, "{rule}({})", args.iter().map(term).collect::<Vec<_>>().join(", "));
        }
        RuleKind::If { guard, then } => {
            let _ = write!(out, "if {guard} then ");
            rule(out, then, indent);
        }
        RuleKind::Forall { var, domain, body } => {
            let _ = write!(out, "forall {var} in {domain} do ");
            rule(out, body, indent);
        }
        RuleKind::Choose {
            var,
            domain,
            with,
            rank,
            body,
        } => {
            let _ = write!(out, "choose {var} in {domain} with {with}");
            if let Some(t) = rank {
                let _ = write!(out, " ranked by {}", term(t));
            }
            out.push_str(" do ");
            rule(out, body, indent);
        }
        RuleKind::Block(rules) => {
            out.push_str("{\n");
            for r in rules {
                let _ = write!(out, "{pad}  ");
                rule(out, r, indent + 1);
                out.push('\n');
            }
            let _ = write!(out, "{pad}}}");
        }
    }
}

pub fn pretty_print(model: &Model) -> String {
    let mut out = format!("dasm {}\n", model.name);
    if !model.sig.domains.is_empty() {
        out.push('\n');
    }
    for d in model.sig.domains.values() {
        match &d.kind {
            DomainKind::Atoms(names) => {
                let _ = writeln!(out, "domain {} = {{{}}}", d.name, names.join(", "));
            }
            DomainKind::Range(lo, hi) => {
                let _ = writeln!(out, "domain {} = {lo}..{hi}", d.name);
            }
        }
    }
    if !model.sig.functions.is_empty() {
        out.push('\n');
    }
    for f in model.sig.functions.values() {
        out.push_str(&function(f));
        out.push('\n');
    }
    if !model.init.is_empty() {
        out.push_str("\ninit {\n");
        for r in &model.init {
            out.push_str("  ");
            rule(&mut out, r, 1);
            out.push('\n');
        }
        out.push_str("}\n");
    }
    for def in model.sig.rules.values() {
        out.push('\n');
        let _ = write!(out, "rule {}", def.name);
        if !def.params.is_empty() {
            let _ = write!(out, "({})", def.params.join(", "));
        }
        out.push_str(" = ");
        rule(&mut out, &def.body, 0);
        out.push('\n');
    }
    if !model.agents.is_empty() {
        out.push('\n');
    }
    for a in &model.agents {
        let who = match &a.set {
            AgentSet::Each { var, domain } => format!("{var} in {domain}"),
            AgentSet::Single(name) => name.clone(),
        };
        let _ = writeln!(out, "agent {who} runs {}({})", a.rule, join(&a.args));
    }
    if !model.predicates.is_empty() || !model.rankings.is_empty() {
        out.push('\n');
    }
    for p in model.predicates.values() {
        let _ = writeln!(out, "predicate {} for {} in {} := {}", p.name, p.var, p.domain, p.formula);
    }
    for k in &model.rankings {
        let _ = writeln!(out, "ranking {} for {}", term(&k.counter), k.predicate);
    }
    out
}
