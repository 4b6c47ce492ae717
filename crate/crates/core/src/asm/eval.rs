//! Term and formula evaluation and update-set collection.

use std::cell::RefCell;
use std::collections::BTreeSet;

use thiserror::Error;

use super::state::{Location, State, Update, UpdateSet};
use super::syntax::{Builtin, DerivedBody, Formula, Kind, Rule, RuleKind, Scope, Signature, Term};
use super::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("`{name}` expects {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("cyclic definition of derived function `{0}`")]
    DerivedCycle(String),
    #[error("`{0}` has no defining expression")]
    MissingDefinition(String),
    #[error("`self` used outside an agent context")]
    SelfOutsideAgent,
    #[error("agent-local function `{0}` used outside an agent context")]
    LocalOutsideAgent(String),
    #[error("derived function `{0}` cannot be updated")]
    DerivedWrite(String),
    #[error("`{op}` is not defined on {value}")]
    Type { op: String, value: Value },
    /// Raised by partial stores used for grounding when a location has not
    /// been assigned yet.
    #[error("location {0} is not assigned")]
    Unassigned(Location),
}

/// Read access to location values.
pub trait Store {
    fn read(&self, loc: &Location) -> Result<Value, EvalError>;
}

impl Store for State {
    fn read(&self, loc: &Location) -> Result<Value, EvalError> {
        Ok(self.get(loc))
    }
}

/// Wraps a store and records every location read through it.
pub struct RecordingStore<'a> {
    inner: &'a dyn Store,
    reads: RefCell<BTreeSet<Location>>,
}

impl<'a> RecordingStore<'a> {
    pub fn new(inner: &'a dyn Store) -> Self {
        Self {
            inner,
            reads: RefCell::new(BTreeSet::new()),
        }
    }

    pub fn into_reads(self) -> BTreeSet<Location> {
        self.reads.into_inner()
    }
}

impl Store for RecordingStore<'_> {
    fn read(&self, loc: &Location) -> Result<Value, EvalError> {
        self.reads.borrow_mut().insert(loc.clone());
        self.inner.read(loc)
    }
}

/// Variable bindings plus the interpretation of `self`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env {
    vars: Vec<(String, Value)>,
    agent: Option<Value>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn for_agent(agent: Value) -> Self {
        Self {
            vars: Vec::new(),
            agent: Some(agent),
        }
    }

    pub fn agent(&self) -> Option<&Value> {
        self.agent.as_ref()
    }

    pub fn with(&self, name: &str, v: Value) -> Env {
        let mut e = self.clone();
        e.vars.push((name.to_string(), v));
        e
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

pub fn eval_term(sig: &Signature, store: &dyn Store, env: &Env, t: &Term) -> Result<Value, EvalError> {
    Interp::new(sig, store).term(env, t)
}

pub fn eval_formula(sig: &Signature, store: &dyn Store, env: &Env, f: &Formula) -> Result<bool, EvalError> {
    Interp::new(sig, store).formula(env, f)
}

pub fn collect_updates(sig: &Signature, store: &dyn Store, env: &Env, r: &Rule) -> Result<UpdateSet, EvalError> {
    let mut out = UpdateSet::new();
    Interp::new(sig, store).rule(env, r, &mut out)?;
    Ok(out)
}

/// Like [`collect_updates`], also returning the labels of rule nodes that
/// contributed at least one update, in evaluation order.
pub fn collect_updates_traced(
    sig: &Signature,
    store: &dyn Store,
    env: &Env,
    r: &Rule,
) -> Result<(UpdateSet, Vec<String>), EvalError> {
    let mut out = UpdateSet::new();
    let mut interp = Interp::new(sig, store);
    interp.fired = Some(Vec::new());
    interp.rule(env, r, &mut out)?;
    Ok((out, interp.fired.unwrap_or_default()))
}

/// Evaluates the location denoted by `func(args)` in `env`.
pub fn eval_location(
    sig: &Signature,
    store: &dyn Store,
    env: &Env,
    func: &str,
    args: &[Term],
) -> Result<Location, EvalError> {
    Interp::new(sig, store).location(env, func, args)
}

struct Interp<'a> {
    sig: &'a Signature,
    store: &'a dyn Store,
    active: Vec<String>,
    fired: Option<Vec<String>>,
}

impl<'a> Interp<'a> {
    fn new(sig: &'a Signature, store: &'a dyn Store) -> Self {
        Self {
            sig,
            store,
            active: Vec::new(),
            fired: None,
        }
    }

    fn location(&mut self, env: &Env, func: &str, args: &[Term]) -> Result<Location, EvalError> {
        let sym = self
            .sig
            .function(func)
            .ok_or_else(|| EvalError::UnknownFunction(func.to_string()))?;
        if sym.arity() != args.len() {
            return Err(EvalError::Arity {
                name: func.to_string(),
                expected: sym.arity(),
                found: args.len(),
            });
        }
        let values = args
            .iter()
            .map(|a| self.term(env, a))
            .collect::<Result<Vec<_>, _>>()?;
        let mut loc = Location::new(func, values);
        if sym.scope == Scope::AgentLocal {
            let owner = env
                .agent()
                .ok_or_else(|| EvalError::LocalOutsideAgent(func.to_string()))?;
            loc = loc.owned_by(owner.clone());
        }
        Ok(loc)
    }

    fn term(&mut self, env: &Env, t: &Term) -> Result<Value, EvalError> {
        match t {
            Term::Const(v) => Ok(v.clone()),
            Term::Var(name) => env
                .lookup(name)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(name.clone())),
            Term::SelfRef => env.agent().cloned().ok_or(EvalError::SelfOutsideAgent),
            Term::App(name, args) => {
                let sym = self
                    .sig
                    .function(name)
                    .ok_or_else(|| EvalError::UnknownFunction(name.clone()))?;
                if sym.kind == Kind::Derived {
                    return self.derived(env, name, args);
                }
                let loc = self.location(env, name, args)?;
                self.store.read(&loc)
            }
            Term::Builtin(op, args) => {
                if args.len() != op.arity() {
                    return Err(EvalError::Arity {
                        name: op.name().to_string(),
                        expected: op.arity(),
                        found: args.len(),
                    });
                }
                let vals = args
                    .iter()
                    .map(|a| self.term(env, a))
                    .collect::<Result<Vec<_>, _>>()?;
                builtin(*op, vals)
            }
            Term::List(items) => Ok(Value::Seq(
                items
                    .iter()
                    .map(|i| self.term(env, i))
                    .collect::<Result<Vec<_>, _>>()?,
            )),
        }
    }

    fn derived(&mut self, env: &Env, name: &str, args: &[Term]) -> Result<Value, EvalError> {
        let sym = self.sig.function(name).expect("checked by caller");
        let def = sym
            .definition
            .as_ref()
            .ok_or_else(|| EvalError::MissingDefinition(name.to_string()))?;
        if def.params.len() != args.len() {
            return Err(EvalError::Arity {
                name: name.to_string(),
                expected: def.params.len(),
                found: args.len(),
            });
        }
        if self.active.iter().any(|a| a == name) {
            return Err(EvalError::DerivedCycle(name.to_string()));
        }
        let mut inner = match env.agent() {
            Some(a) => Env::for_agent(a.clone()),
            None => Env::new(),
        };
        for (p, a) in def.params.iter().zip(args) {
            let v = self.term(env, a)?;
            inner = inner.with(p, v);
        }
        self.active.push(name.to_string());
        let result = match &def.body {
            DerivedBody::Term(t) => self.term(&inner, t),
            DerivedBody::Formula(f) => self.formula(&inner, f).map(Value::Bool),
        };
        self.active.pop();
        result
    }

    fn elements(&self, domain: &str) -> Result<Vec<Value>, EvalError> {
        self.sig
            .domain_elements(domain)
            .ok_or_else(|| EvalError::UnknownDomain(domain.to_string()))
    }

    fn formula(&mut self, env: &Env, f: &Formula) -> Result<bool, EvalError> {
        match f {
            Formula::Holds(t) => Ok(self.term(env, t)? == Value::Bool(true)),
            Formula::Eq(a, b) => Ok(self.term(env, a)? == self.term(env, b)?),
            Formula::InDomain(t, d) => {
                if d != super::syntax::BOOLEAN && !self.sig.domains.contains_key(d) {
                    return Err(EvalError::UnknownDomain(d.clone()));
                }
                let v = self.term(env, t)?;
                Ok(self.sig.domain_contains(d, &v))
            }
            Formula::InSeq(t, s) => {
                let v = self.term(env, t)?;
                match self.term(env, s)? {
                    Value::Seq(items) => Ok(items.contains(&v)),
                    Value::Undef => Ok(false),
                    other => Err(EvalError::Type {
                        op: "in".into(),
                        value: other,
                    }),
                }
            }
            Formula::Not(inner) => Ok(!self.formula(env, inner)?),
            Formula::And(parts) => {
                for p in parts {
                    if !self.formula(env, p)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(parts) => {
                for p in parts {
                    if self.formula(env, p)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Forall(var, dom, body) => {
                for e in self.elements(dom)? {
                    if !self.formula(&env.with(var, e), body)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Exists(var, dom, body) => {
                for e in self.elements(dom)? {
                    if self.formula(&env.with(var, e), body)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    fn rule(&mut self, env: &Env, r: &Rule, out: &mut UpdateSet) -> Result<(), EvalError> {
        if let (Some(label), Some(_)) = (&r.label, &self.fired) {
            let mut mine = UpdateSet::new();
            self.rule_kind(env, &r.kind, &mut mine)?;
            if !mine.is_empty() {
                if let Some(fired) = self.fired.as_mut() {
                    fired.push(label.clone());
                }
            }
            out.extend(mine);
            return Ok(());
        }
        self.rule_kind(env, &r.kind, out)
    }

    fn rule_kind(&mut self, env: &Env, kind: &RuleKind, out: &mut UpdateSet) -> Result<(), EvalError> {
        match kind {
            RuleKind::Skip => Ok(()),
            RuleKind::Assign { func, args, value } => {
                if self.sig.function(func).is_some_and(|s| s.kind == Kind::Derived) {
                    return Err(EvalError::DerivedWrite(func.clone()));
                }
                let loc = self.location(env, func, args)?;
                let v = self.term(env, value)?;
                out.insert(Update::new(loc, v));
                Ok(())
            }
            RuleKind::If { guard, then } => {
                if self.formula(env, guard)? {
                    self.rule(env, then, out)?;
                }
                Ok(())
            }
            RuleKind::Block(rules) => {
                for r in rules {
                    self.rule(env, r, out)?;
                }
                Ok(())
            }
            RuleKind::Forall { var, domain, body } => {
                for e in self.elements(domain)? {
                    self.rule(&env.with(var, e), body, out)?;
                }
                Ok(())
            }
            RuleKind::Choose {
                var,
                domain,
                with,
                rank,
                body,
            } => {
                let mut best: Option<(Value, Value)> = None;
                for e in self.elements(domain)? {
                    let inner = env.with(var, e.clone());
                    if !self.formula(&inner, with)? {
                        continue;
                    }
                    let score = match rank {
                        Some(t) => self.term(&inner, t)?,
                        None => Value::Undef,
                    };
                    // strict improvement only: ties keep the earlier element
                    if best.as_ref().is_none_or(|(s, _)| score > *s) {
                        best = Some((score, e));
                    }
                }
                if let Some((_, chosen)) = best {
                    self.rule(&env.with(var, chosen), body, out)?;
                }
                Ok(())
            }
            RuleKind::Call { rule, args } => {
                let def = self
                    .sig
                    .rules
                    .get(rule)
                    .ok_or_else(|| EvalError::UnknownRule(rule.clone()))?;
                if def.params.len() != args.len() {
                    return Err(EvalError::Arity {
                        name: rule.clone(),
                        expected: def.params.len(),
                        found: args.len(),
                    });
                }
                let mut inner = match env.agent() {
                    Some(a) => Env::for_agent(a.clone()),
                    None => Env::new(),
                };
                for (p, a) in def.params.iter().zip(args) {
                    inner = inner.with(p, self.term(env, a)?);
                }
                self.rule(&inner, &def.body, out)
            }
        }
    }
}

fn builtin(op: Builtin, vals: Vec<Value>) -> Result<Value, EvalError> {
    let type_err = |v: &Value| EvalError::Type {
        op: op.name().to_string(),
        value: v.clone(),
    };
    match op {
        Builtin::Add | Builtin::Sub => match (&vals[0], &vals[1]) {
            (Value::Undef, _) | (_, Value::Undef) => Ok(Value::Undef),
            (Value::Int(a), Value::Int(b)) => Ok(Value::Int(if op == Builtin::Add {
                a.saturating_add(*b)
            } else {
                a.saturating_sub(*b)
            })),
            (Value::Int(_), other) | (other, _) => Err(type_err(other)),
        },
        Builtin::Len => match &vals[0] {
            Value::Seq(items) => Ok(Value::Int(items.len() as i64)),
            Value::Undef => Ok(Value::Undef),
            other => Err(type_err(other)),
        },
        // undef behaves as the empty sequence
        Builtin::Append => match &vals[0] {
            Value::Seq(items) => {
                let mut items = items.clone();
                items.push(vals[1].clone());
                Ok(Value::Seq(items))
            }
            Value::Undef => Ok(Value::Seq(vec![vals[1].clone()])),
            other => Err(type_err(other)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::syntax::{DomainKind, FunctionSymbol, RuleDef, TypeRef};
    use proptest::prelude::*;

    fn dom(name: &str) -> TypeRef {
        TypeRef::Domain(name.into())
    }

    fn small_sig() -> Signature {
        let mut sig = Signature::default();
        sig.add_domain("items", DomainKind::Atoms(vec!["a".into(), "b".into(), "c".into()]));
        sig.add_domain("nums", DomainKind::Range(0, 5));
        sig.add_function(FunctionSymbol::new("score", vec![dom("items")], dom("nums"), Kind::Controlled));
        sig.add_function(FunctionSymbol::new("picked", vec![], dom("items"), Kind::Controlled));
        sig.add_function(FunctionSymbol::new("ok", vec![dom("items")], TypeRef::Boolean, Kind::Monitored));
        sig.add_function(FunctionSymbol::new("mine", vec![], TypeRef::Boolean, Kind::Controlled).local());
        sig
    }

    #[test]
    fn constant_evaluates_to_itself() {
        let sig = small_sig();
        let v = eval_term(&sig, &State::new(), &Env::new(), &Term::int(5)).unwrap();
        assert_eq!(v, Value::Int(5));
    }

    #[test]
    fn unset_location_reads_undef() {
        let sig = small_sig();
        let t = Term::app("score", vec![Term::atom("items", "a")]);
        assert_eq!(eval_term(&sig, &State::new(), &Env::new(), &t).unwrap(), Value::Undef);
    }

    #[test]
    fn errors_are_reported() {
        let sig = small_sig();
        let s = State::new();
        let env = Env::new();
        assert_eq!(
            eval_term(&sig, &s, &env, &Term::var("x")),
            Err(EvalError::UnboundVariable("x".into()))
        );
        assert!(matches!(
            eval_term(&sig, &s, &env, &Term::app("score", vec![])),
            Err(EvalError::Arity { .. })
        ));
        assert_eq!(eval_term(&sig, &s, &env, &Term::SelfRef), Err(EvalError::SelfOutsideAgent));
        assert!(matches!(
            eval_term(&sig, &s, &env, &Term::app("mine", vec![])),
            Err(EvalError::LocalOutsideAgent(_))
        ));
    }

    #[test]
    fn derived_cycle_detected() {
        let mut sig = small_sig();
        sig.add_function(
            FunctionSymbol::new("d1", vec![], TypeRef::Boolean, Kind::Derived)
                .defined_as(&[], DerivedBody::Term(Term::app("d2", vec![]))),
        );
        sig.add_function(
            FunctionSymbol::new("d2", vec![], TypeRef::Boolean, Kind::Derived)
                .defined_as(&[], DerivedBody::Term(Term::app("d1", vec![]))),
        );
        let r = eval_term(&sig, &State::new(), &Env::new(), &Term::app("d1", vec![]));
        assert!(matches!(r, Err(EvalError::DerivedCycle(_))));
    }

    #[test]
    fn local_locations_are_namespaced_by_agent() {
        let sig = small_sig();
        let r = Rule::assign("mine", vec![], Term::bool(true));
        let a = Value::atom("items", "a");
        let u = collect_updates(&sig, &State::new(), &Env::for_agent(a.clone()), &r).unwrap();
        let up = u.iter().next().unwrap();
        assert_eq!(up.location.owner, Some(a));
    }

    #[test]
    fn negation_of_true_is_false() {
        let sig = small_sig();
        let f = Formula::not(Formula::eq(Term::int(1), Term::int(1)));
        assert!(!eval_formula(&sig, &State::new(), &Env::new(), &f).unwrap());
        let undef_eq = Formula::eq(Term::undef(), Term::app("picked", vec![]));
        assert!(eval_formula(&sig, &State::new(), &Env::new(), &undef_eq).unwrap());
    }

    #[test]
    fn false_guard_contributes_nothing() {
        let sig = small_sig();
        let r = Rule::when(
            Formula::holds(Term::bool(false)),
            Rule::assign("picked", vec![], Term::atom("items", "a")),
        );
        assert!(collect_updates(&sig, &State::new(), &Env::new(), &r).unwrap().is_empty());
    }

    #[test]
    fn call_binds_parameters() {
        let mut sig = small_sig();
        sig.add_rule(RuleDef::new(
            "Pick",
            &["x"],
            Rule::assign("picked", vec![], Term::var("x")),
        ));
        let r = Rule::call("Pick", vec![Term::atom("items", "b")]);
        let u = collect_updates(&sig, &State::new(), &Env::new(), &r).unwrap();
        assert_eq!(u.iter().next().unwrap().value, Value::atom("items", "b"));
    }

    #[test]
    fn traced_collection_reports_labels() {
        let sig = small_sig();
        let r = Rule::block(vec![
            Rule::assign("picked", vec![], Term::atom("items", "a")).labeled("A"),
            Rule::when(Formula::holds(Term::bool(false)), Rule::skip()).labeled("B"),
            Rule::assign("picked", vec![], Term::atom("items", "a")).labeled("C"),
        ]);
        let (u, fired) = collect_updates_traced(&sig, &State::new(), &Env::new(), &r).unwrap();
        assert_eq!(u.len(), 1);
        assert_eq!(fired, vec!["A".to_string(), "C".to_string()]);
    }

    #[test]
    fn empty_choose_contributes_nothing() {
        let sig = small_sig();
        let r = Rule::choose(
            "x",
            "items",
            Formula::holds(Term::app("ok", vec![Term::var("x")])),
            None,
            Rule::assign("picked", vec![], Term::var("x")),
        );
        assert!(collect_updates(&sig, &State::new(), &Env::new(), &r).unwrap().is_empty());
    }

    #[test]
    fn arithmetic_and_sequences() {
        let sig = small_sig();
        let s = State::new();
        let env = Env::new();
        let t = Term::Builtin(Builtin::Sub, vec![Term::int(0), Term::int(1)]);
        assert_eq!(eval_term(&sig, &s, &env, &t).unwrap(), Value::Int(-1));
        let undef_minus = Term::Builtin(Builtin::Sub, vec![Term::undef(), Term::int(1)]);
        assert_eq!(eval_term(&sig, &s, &env, &undef_minus).unwrap(), Value::Undef);
        let app = Term::Builtin(Builtin::Append, vec![Term::undef(), Term::int(3)]);
        assert_eq!(eval_term(&sig, &s, &env, &app).unwrap(), Value::Seq(vec![Value::Int(3)]));
        let len = Term::Builtin(Builtin::Len, vec![Term::List(vec![Term::int(1), Term::int(2)])]);
        assert_eq!(eval_term(&sig, &s, &env, &len).unwrap(), Value::Int(2));
        let member = Formula::InSeq(Term::int(2), Term::List(vec![Term::int(1), Term::int(2)]));
        assert!(eval_formula(&sig, &s, &env, &member).unwrap());
    }

    // choose must agree with a brute-force argmax (least element on ties).
    proptest! {
        #[test]
        fn choose_matches_brute_force(scores in proptest::collection::vec(prop_oneof![Just(None), (0i64..4).prop_map(Some)], 6)) {
            let mut sig = Signature::default();
            let names: Vec<String> = (0..6).map(|i| format!("e{i}")).collect();
            sig.add_domain("elems", DomainKind::Atoms(names.clone()));
            sig.add_domain("nums", DomainKind::Range(0, 5));
            sig.add_function(FunctionSymbol::new("score", vec![dom("elems")], dom("nums"), Kind::Controlled));
            sig.add_function(FunctionSymbol::new("picked", vec![], dom("elems"), Kind::Controlled));
            let mut state = State::new();
            for (n, s) in names.iter().zip(&scores) {
                if let Some(s) = s {
                    state.set(Location::new("score", vec![Value::atom("elems", n)]), Value::Int(*s));
                }
            }
            let r = Rule::choose(
                "x",
                "elems",
                Formula::not(Formula::eq(Term::app("score", vec![Term::var("x")]), Term::undef())),
                Some(Term::app("score", vec![Term::var("x")])),
                Rule::assign("picked", vec![], Term::var("x")),
            );
            let u = collect_updates(&sig, &state, &Env::new(), &r).unwrap();

            let mut expected: Option<(i64, usize)> = None;
            for (i, s) in scores.iter().enumerate() {
                if let Some(s) = s {
                    if expected.is_none_or(|(best, _)| *s > best) {
                        expected = Some((*s, i));
                    }
                }
            }
            match expected {
                None => prop_assert!(u.is_empty()),
                Some((_, i)) => {
                    let chosen = &u.iter().next().unwrap().value;
                    prop_assert_eq!(chosen, &Value::atom("elems", &names[i]));
                }
            }
        }

        #[test]
        fn collection_is_deterministic(flags in proptest::collection::vec(any::<bool>(), 3)) {
            let sig = small_sig();
            let mut state = State::new();
            for (n, f) in ["a", "b", "c"].iter().zip(&flags) {
                state.set(Location::new("ok", vec![Value::atom("items", n)]), Value::Bool(*f));
            }
            let r = Rule::forall("x", "items", Rule::when(
                Formula::holds(Term::app("ok", vec![Term::var("x")])),
                Rule::assign("score", vec![Term::var("x")], Term::int(1)),
            ));
            let a = collect_updates(&sig, &state, &Env::new(), &r).unwrap();
            let b = collect_updates(&sig, &state, &Env::new(), &r).unwrap();
            prop_assert_eq!(a.len(), flags.iter().filter(|f| **f).count());
            prop_assert_eq!(a, b);
        }
    }
}
