//! Static checks on a parsed model.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::asm::{
    DerivedBody, DomainKind, Formula, Kind, Rule, RuleKind, Scope, Span, Term, TypeRef, BOOLEAN,
};

use super::diag::Diagnostic;
use super::model::{AgentSet, Model};

struct Checker<'m> {
    model: &'m Model,
    diags: Vec<Diagnostic>,
    reads: HashSet<String>,
    writes: HashSet<String>,
    span: Span,
    scope: Vec<String>,
}

impl<'m> Checker<'m> {
    fn error(&mut self, code: &'static str, msg: String) {
        self.diags
            .push(Diagnostic::error(self.span.line, self.span.col, code, msg));
    }

    fn warning(&mut self, span: Span, code: &'static str, msg: String) {
        self.diags.push(Diagnostic::warning(span.line, span.col, code, msg));
    }

    fn bound(&self, v: &str) -> bool {
        self.scope.iter().any(|s| s == v)
    }

    fn with<T>(&mut self, vars: &[String], f: impl FnOnce(&mut Self) -> T) -> T {
        let n = self.scope.len();
        self.scope.extend(vars.iter().cloned());
        let r = f(self);
        self.scope.truncate(n);
        r
    }

    fn domain(&mut self, d: &str) {
        if d != BOOLEAN && !self.model.sig.domains.contains_key(d) {
            self.error("E103", format!("unknown domain `{d}`"));
        }
    }

    fn type_ref(&mut self, t: &TypeRef) {
        match t {
            TypeRef::Boolean => {}
            TypeRef::Domain(d) => self.domain(d),
            TypeRef::Seq(inner) => self.type_ref(inner),
        }
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::Const(_) => {}
            Term::SelfRef => {}
            Term::Var(v) => {
                if !self.bound(v) {
                    self.error("E104", format!("unbound name `{v}`"));
                }
            }
            Term::App(f, args) => {
                match self.model.sig.function(f) {
                    None => self.error("E105", format!("unknown function `{f}`")),
                    Some(sym) => {
                        if sym.arity() != args.len() {
                            self.error(
                                "E106",
                                format!("`{f}` expects {} argument(s), got {}", sym.arity(), args.len()),
                            );
                        }
                        if sym.kind == Kind::Out {
                            self.error("E107", format!("out function `{f}` cannot be read"));
                        }
                    }
                }
                self.reads.insert(f.clone());
                args.iter().for_each(|a| self.term(a));
            }
            Term::Builtin(b, args) => {
                if b.arity() != args.len() {
                    self.error(
                        "E106",
                        format!("`{}` expects {} argument(s), got {}", b.name(), b.arity(), args.len()),
                    );
                }
                args.iter().for_each(|a| self.term(a));
            }
            Term::List(items) => items.iter().for_each(|a| self.term(a)),
        }
    }

    fn formula(&mut self, f: &Formula) {
        match f {
            Formula::Holds(t) => self.term(t),
            Formula::InDomain(t, d) => {
                self.term(t);
                self.domain(d);
            }
            Formula::Eq(a, b) | Formula::InSeq(a, b) => {
                self.term(a);
                self.term(b);
            }
            Formula::Not(inner) => self.formula(inner),
            Formula::And(parts) | Formula::Or(parts) => parts.iter().for_each(|p| self.formula(p)),
            Formula::Forall(v, d, body) | Formula::Exists(v, d, body) => {
                self.domain(d);
                let v = v.clone();
                self.with(&[v], |c| c.formula(body));
            }
        }
    }

    /// `writers` lists the agent domains that may execute the rule; `None`
    /// marks the initialization block.
    fn rule(&mut self, r: &Rule, writers: Option<&BTreeSet<String>>) {
        match &r.kind {
            RuleKind::Skip => {}
            RuleKind::Assign { func, args, value } => {
                self.write(func, args.len(), writers);
                args.iter().for_each(|a| self.term(a));
                self.term(value);
            }
            RuleKind::If { guard, then } => {
                self.formula(guard);
                self.rule(then, writers);
            }
            RuleKind::Block(rules) => rules.iter().for_each(|r| self.rule(r, writers)),
            RuleKind::Forall { var, domain, body } => {
                self.domain(domain);
                let v = var.clone();
                self.with(&[v], |c| c.rule(body, writers));
            }
            RuleKind::Choose {
                var,
                domain,
                with,
                rank,
                body,
            } => {
                self.domain(domain);
                let v = var.clone();
                self.with(&[v], |c| {
                    c.formula(with);
                    if let Some(t) = rank {
                        c.term(t);
                    }
                    c.rule(body, writers);
                });
            }
            RuleKind::Call { rule, args } => {
                match self.model.sig.rules.get(rule) {
                    None => self.error("E108", format!("unknown rule `{rule}`")),
                    Some(def) if def.params.len() != args.len() => self.error(
                        "E106",
                        format!("rule `{rule}` expects {} argument(s), got {}", def.params.len(), args.len()),
                    ),
                    Some(_) => {}
                }
                args.iter().for_each(|a| self.term(a));
            }
        }
    }

    fn write(&mut self, func: &str, nargs: usize, writers: Option<&BTreeSet<String>>) {
        self.writes.insert(func.to_string());
        let Some(sym) = self.model.sig.function(func) else {
            self.error("E105", format!("unknown function `{func}`"));
            return;
        };
        if sym.arity() != nargs {
            self.error(
                "E106",
                format!("`{func}` expects {} argument(s), got {nargs}", sym.arity()),
            );
        }
        match (sym.kind, writers) {
            (Kind::Derived, _) => self.error("E109", format!("derived function `{func}` cannot be updated")),
            (Kind::Static, Some(_)) => {
                self.error("E110", format!("static function `{func}` is updated by a rule"))
            }
            (Kind::Monitored, Some(ws)) => {
                let allowed = sym.writer.as_deref();
                if let Some(bad) = ws.iter().find(|w| Some(w.as_str()) != allowed) {
                    let msg = format!("monitored function `{func}` is updated by agents in `{bad}`");
                    self.error("E111", msg);
                }
            }
            _ => {}
        }
        if writers.is_none() && sym.scope == Scope::AgentLocal {
            self.error("E112", format!("agent-local function `{func}` is updated in init"));
        }
    }
}

/// Rules reachable through calls from `start`, including `start` itself.
fn reachable_rules(model: &Model, start: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start.to_string()];
    while let Some(name) = stack.pop() {
        if !seen.insert(name.clone()) {
            continue;
        }
        if let Some(def) = model.sig.rules.get(&name) {
            let mut calls = Vec::new();
            collect_calls(&def.body, &mut calls);
            stack.extend(calls);
        }
    }
    seen
}

fn collect_calls(r: &Rule, out: &mut Vec<String>) {
    match &r.kind {
        RuleKind::Call { rule, .. } => out.push(rule.clone()),
        RuleKind::If { then, .. } => collect_calls(then, out),
        RuleKind::Forall { body, .. } | RuleKind::Choose { body, .. } => collect_calls(body, out),
        RuleKind::Block(rules) => rules.iter().for_each(|r| collect_calls(r, out)),
        RuleKind::Assign { .. } | RuleKind::Skip => {}
    }
}

fn derived_deps(body: &DerivedBody) -> Vec<String> {
    let mut out = Vec::new();
    match body {
        DerivedBody::Term(t) => t.for_each_symbol(&mut |s| out.push(s.to_string())),
        DerivedBody::Formula(f) => f.for_each_symbol(&mut |s| out.push(s.to_string())),
    }
    out
}

/// Names on a cycle of the given dependency graph, in a stable order.
fn cyclic(graph: &HashMap<String, Vec<String>>, order: &[String]) -> Vec<String> {
    order
        .iter()
        .filter(|start| {
            let mut seen = HashSet::new();
            let mut stack: Vec<&String> = graph.get(*start).map(|v| v.iter().collect()).unwrap_or_default();
            while let Some(n) = stack.pop() {
                if n == *start {
                    return true;
                }
                if seen.insert(n) {
                    if let Some(next) = graph.get(n) {
                        stack.extend(next);
                    }
                }
            }
            false
        })
        .cloned()
        .collect()
}

/// Errors and warnings for a model; an empty result means the model is clean.
pub fn validate_model(model: &Model) -> Vec<Diagnostic> {
    let mut c = Checker {
        model,
        diags: Vec::new(),
        reads: HashSet::new(),
        writes: HashSet::new(),
        span: Span::default(),
        scope: Vec::new(),
    };

    let mut atoms: HashMap<&str, &str> = HashMap::new();
    for d in model.sig.domains.values() {
        c.span = d.span;
        match &d.kind {
            DomainKind::Atoms(names) => {
                for n in names {
                    if let Some(prev) = atoms.insert(n, &d.name) {
                        c.error("E113", format!("atom `{n}` is declared in both `{prev}` and `{}`", d.name));
                    }
                }
            }
            DomainKind::Range(lo, hi) => {
                if lo > hi {
                    c.error("E114", format!("empty range in domain `{}`", d.name));
                }
            }
        }
    }

    for f in model.sig.functions.values() {
        c.span = f.span;
        f.args.iter().for_each(|t| c.type_ref(t));
        c.type_ref(&f.result);
        if let Some(w) = &f.writer {
            if f.kind != Kind::Monitored {
                c.error("E115", format!("`by` only applies to monitored functions (`{}`)", f.name));
            }
            c.domain(w);
        }
        match (&f.definition, f.kind) {
            (Some(def), Kind::Derived) => {
                if def.params.len() != f.arity() {
                    c.error(
                        "E106",
                        format!("derived `{}` has {} parameter(s) for arity {}", f.name, def.params.len(), f.arity()),
                    );
                }
                c.with(&def.params, |c| match &def.body {
                    DerivedBody::Term(t) => c.term(t),
                    DerivedBody::Formula(phi) => c.formula(phi),
                });
            }
            (None, Kind::Derived) => c.error("E116", format!("derived `{}` has no definition", f.name)),
            _ => {}
        }
    }
    let derived: HashMap<String, Vec<String>> = model
        .sig
        .functions
        .values()
        .filter_map(|f| f.definition.as_ref().map(|d| (f.name.clone(), derived_deps(&d.body))))
        .collect();
    let names: Vec<String> = model.sig.functions.keys().cloned().collect();
    for name in cyclic(&derived, &names) {
        c.span = model.sig.functions[&name].span;
        c.error("E117", format!("derived function `{name}` depends on itself"));
    }

    c.span = Span::default();
    for r in &model.init {
        c.rule(r, None);
    }

    // Which agent domains can execute each rule.
    let mut runners: HashMap<String, BTreeSet<String>> = HashMap::new();
    for b in &model.agents {
        c.span = b.span;
        let (dom, vars) = match &b.set {
            AgentSet::Each { var, domain } => {
                c.domain(domain);
                (Some(domain.clone()), vec![var.clone()])
            }
            AgentSet::Single(name) => match model.sig.atom_named(name) {
                Some(a) => (Some(a.domain), Vec::new()),
                None => {
                    c.error("E118", format!("agent `{name}` is not a declared atom"));
                    (None, Vec::new())
                }
            },
        };
        match model.sig.rules.get(&b.rule) {
            None => c.error("E108", format!("unknown rule `{}`", b.rule)),
            Some(def) if def.params.len() != b.args.len() => c.error(
                "E106",
                format!("rule `{}` expects {} argument(s), got {}", b.rule, def.params.len(), b.args.len()),
            ),
            Some(_) => {}
        }
        c.with(&vars, |c| b.args.iter().for_each(|a| c.term(a)));
        if let Some(dom) = dom {
            for r in reachable_rules(model, &b.rule) {
                runners.entry(r).or_default().insert(dom.clone());
            }
        }
    }
    if let Err(e) = model.agent_instances() {
        c.span = Span::default();
        c.error("E119", e.to_string());
    }

    let empty = BTreeSet::new();
    for def in model.sig.rules.values() {
        c.span = def.span;
        let ws = runners.get(&def.name).unwrap_or(&empty);
        c.with(&def.params, |c| c.rule(&def.body, Some(ws)));
    }
    let calls: HashMap<String, Vec<String>> = model
        .sig
        .rules
        .values()
        .map(|d| {
            let mut out = Vec::new();
            collect_calls(&d.body, &mut out);
            (d.name.clone(), out)
        })
        .collect();
    let rule_names: Vec<String> = model.sig.rules.keys().cloned().collect();
    for name in cyclic(&calls, &rule_names) {
        c.span = model.sig.rules[&name].span;
        c.error("E120", format!("rule `{name}` calls itself"));
    }

    for p in model.predicates.values() {
        c.span = p.span;
        c.domain(&p.domain);
        let v = p.var.clone();
        c.with(&[v], |c| c.formula(&p.formula));
        let mut apps = 0;
        p.formula.for_each_symbol(&mut |_| apps += 1);
        if apps == 0 {
            c.warning(p.span, "W202", format!("predicate `{}` mentions no function", p.name));
        }
    }
    for k in &model.rankings {
        c.span = k.span;
        let Some(p) = model.predicates.get(&k.predicate) else {
            c.error("E121", format!("ranking refers to unknown predicate `{}`", k.predicate));
            continue;
        };
        let v = p.var.clone();
        c.with(&[v], |c| c.term(&k.counter));
    }

    for f in model.sig.functions.values() {
        if !c.reads.contains(&f.name) && !c.writes.contains(&f.name) {
            c.warning(f.span, "W201", format!("function `{}` is never used", f.name));
        }
    }

    let mut diags = c.diags;
    diags.sort_by_key(|d| (d.line, d.col));
    diags.dedup();
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_model;

    fn codes(src: &str) -> Vec<&'static str> {
        validate_model(&parse_model(src).unwrap())
            .into_iter()
            .map(|d| d.code)
            .collect()
    }

    const HEAD: &str = "dasm T\ndomain ps = {p1, p2}\ndomain qs = {q1}\n";

    #[test]
    fn clean_model_has_no_diagnostics() {
        let src = format!(
            "{HEAD}function f : ps -> boolean controlled\nrule R = if not f(self) then f(self) := true\nagent p in ps runs R()\npredicate idle for p in ps := not f(p)\n"
        );
        assert!(codes(&src).is_empty());
    }

    #[test]
    fn monitored_written_by_wrong_agents() {
        let src = format!(
            "{HEAD}function m : ps -> boolean monitored by qs\nrule R = m(self) := true\nagent p in ps runs R()\n"
        );
        assert!(codes(&src).contains(&"E111"));
        let ok = format!(
            "{HEAD}function m : ps -> boolean monitored by qs\nrule R = m(p1) := true\nrule S = if m(self) then skip\nagent q in qs runs R()\nagent p in ps runs S()\n"
        );
        assert!(!codes(&ok).contains(&"E111"));
    }

    #[test]
    fn misc_errors() {
        let derived = format!(
            "{HEAD}function d : boolean derived := d\nrule R = d := true\nagent p in ps runs R()\n"
        );
        let c = codes(&derived);
        assert!(c.contains(&"E109") && c.contains(&"E117"));

        let out = format!("{HEAD}function o : boolean out\nrule R = if o then o := true\nagent p in ps runs R()\n");
        assert!(codes(&out).contains(&"E107"));

        let arity = format!("{HEAD}function f : ps -> boolean controlled\nrule R = f := true\nagent p in ps runs R()\n");
        assert!(codes(&arity).contains(&"E106"));

        let unbound = format!("{HEAD}function f : ps -> boolean controlled\nrule R = f(zz) := true\nagent p in ps runs R()\n");
        assert!(codes(&unbound).contains(&"E104"));

        let calls = format!("{HEAD}rule R = S()\nrule S = R()\nagent p in ps runs R()\n");
        assert!(codes(&calls).contains(&"E120"));

        let static_write = format!("{HEAD}function s : boolean static\nrule R = s := true\nagent p in ps runs R()\n");
        assert!(codes(&static_write).contains(&"E110"));

        let local_init = format!(
            "{HEAD}function w : boolean controlled local\ninit {{ w := true }}\nrule R = w := false\nagent p in ps runs R()\n"
        );
        assert!(codes(&local_init).contains(&"E112"));
    }

    #[test]
    fn unused_symbol_warns() {
        let src = format!("{HEAD}function f : boolean controlled\nrule R = skip\nagent p in ps runs R()\n");
        let d = validate_model(&parse_model(&src).unwrap());
        assert_eq!(d.len(), 1);
        assert!(!d[0].is_error());
        assert_eq!(d[0].code, "W201");
    }
}
