//! Abstract syntax shared by the language front end, the executor and the
//! analyzer: signatures, terms, formulas and guarded-update rules.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::value::{Atom, Value};

/// Source position of a declaration. Two spans always compare equal so that
/// structural comparison of models ignores where things were written.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl Span {
    pub fn new(line: usize, col: usize) -> Self {
        Self { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

/// Classification of function symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Static,
    Controlled,
    Monitored,
    Shared,
    Derived,
    Out,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::Static,
        Kind::Controlled,
        Kind::Monitored,
        Kind::Shared,
        Kind::Derived,
        Kind::Out,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Kind::Static => "static",
            Kind::Controlled => "controlled",
            Kind::Monitored => "monitored",
            Kind::Shared => "shared",
            Kind::Derived => "derived",
            Kind::Out => "out",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.keyword() == s)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scope {
    #[default]
    Global,
    /// Locations are namespaced by the agent that reads or writes them.
    AgentLocal,
}

/// Argument or result type of a function symbol. All types are finite.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypeRef {
    Boolean,
    Domain(String),
    Seq(Box<TypeRef>),
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Boolean => f.write_str("boolean"),
            TypeRef::Domain(d) => f.write_str(d),
            TypeRef::Seq(inner) => write!(f, "seq {inner}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainKind {
    Atoms(Vec<String>),
    /// Inclusive integer range.
    Range(i64, i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainDecl {
    pub name: String,
    pub kind: DomainKind,
    pub span: Span,
}

impl DomainDecl {
    pub fn elements(&self) -> Vec<Value> {
        match &self.kind {
            DomainKind::Atoms(names) => names
                .iter()
                .map(|n| Value::Atom(Atom::new(&self.name, n)))
                .collect(),
            DomainKind::Range(lo, hi) => (*lo..=*hi).map(Value::Int).collect(),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (&self.kind, v) {
            (DomainKind::Atoms(names), Value::Atom(a)) => {
                a.domain == self.name && names.contains(&a.name)
            }
            (DomainKind::Range(lo, hi), Value::Int(i)) => lo <= i && i <= hi,
            _ => false,
        }
    }
}

/// Body of a derived function: either a term or a boolean formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DerivedBody {
    Term(Term),
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub params: Vec<String>,
    pub body: DerivedBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSymbol {
    pub name: String,
    pub args: Vec<TypeRef>,
    pub result: TypeRef,
    pub kind: Kind,
    pub scope: Scope,
    /// For monitored symbols: the agent domain allowed to write it. Every
    /// other agent sees the symbol as monitored.
    pub writer: Option<String>,
    pub definition: Option<Derivation>,
    pub span: Span,
}

impl FunctionSymbol {
    pub fn new(name: &str, args: Vec<TypeRef>, result: TypeRef, kind: Kind) -> Self {
        Self {
            name: name.to_string(),
            args,
            result,
            kind,
            scope: Scope::Global,
            writer: None,
            definition: None,
            span: Span::default(),
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn local(mut self) -> Self {
        self.scope = Scope::AgentLocal;
        self
    }

    pub fn written_by(mut self, domain: &str) -> Self {
        self.writer = Some(domain.to_string());
        self
    }

    pub fn defined_as(mut self, params: &[&str], body: DerivedBody) -> Self {
        self.definition = Some(Derivation {
            params: params.iter().map(|p| p.to_string()).collect(),
            body,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Add,
    Sub,
    Len,
    Append,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Add => "+",
            Builtin::Sub => "-",
            Builtin::Len => "len",
            Builtin::Append => "append",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Len => 1,
            _ => 2,
        }
    }

    pub fn from_call_name(s: &str) -> Option<Builtin> {
        match s {
            "len" => Some(Builtin::Len),
            "append" => Some(Builtin::Append),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Value),
    Var(String),
    SelfRef,
    App(String, Vec<Term>),
    Builtin(Builtin, Vec<Term>),
    List(Vec<Term>),
}

impl Term {
    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(name.to_string(), args)
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn atom(domain: &str, name: &str) -> Term {
        Term::Const(Value::atom(domain, name))
    }

    pub fn int(i: i64) -> Term {
        Term::Const(Value::Int(i))
    }

    pub fn bool(b: bool) -> Term {
        Term::Const(Value::Bool(b))
    }

    pub fn undef() -> Term {
        Term::Const(Value::Undef)
    }

    /// Calls `f` on every function symbol applied in this term.
    pub fn for_each_symbol(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Term::App(name, args) => {
                f(name);
                args.iter().for_each(|a| a.for_each_symbol(f));
            }
            Term::Builtin(_, args) | Term::List(args) => {
                args.iter().for_each(|a| a.for_each_symbol(f));
            }
            Term::Const(_) | Term::Var(_) | Term::SelfRef => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    /// A boolean-valued term used as a formula; holds iff it evaluates to true.
    Holds(Term),
    Eq(Term, Term),
    InDomain(Term, String),
    InSeq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Forall(String, String, Box<Formula>),
    Exists(String, String, Box<Formula>),
}

impl Formula {
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn holds(t: Term) -> Formula {
        Formula::Holds(t)
    }

    /// Top-level conjuncts, flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(parts) => parts.iter().flat_map(|p| p.conjuncts()).collect(),
            other => vec![other],
        }
    }

    pub fn for_each_symbol(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Formula::Holds(t) => t.for_each_symbol(f),
            Formula::Eq(a, b) | Formula::InSeq(a, b) => {
                a.for_each_symbol(f);
                b.for_each_symbol(f);
            }
            Formula::InDomain(t, _) => t.for_each_symbol(f),
            Formula::Not(inner) | Formula::Forall(_, _, inner) | Formula::Exists(_, _, inner) => {
                inner.for_each_symbol(f)
            }
            Formula::And(parts) | Formula::Or(parts) => {
                parts.iter().for_each(|p| p.for_each_symbol(f))
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Forall(..) | Formula::Exists(..) => 0,
            Formula::Or(_) => 1,
            Formula::And(_) => 2,
            Formula::Not(_) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Formula::Holds(t) => write!(f, "{t}"),
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::InDomain(t, d) => write!(f, "{t} in {d}"),
            Formula::InSeq(t, s) => write!(f, "{t} in {s}"),
            Formula::Not(inner) => {
                f.write_str("not ")?;
                inner.fmt_prec(f, 3)
            }
            Formula::And(parts) | Formula::Or(parts) => {
                let (sep, child) = if matches!(self, Formula::And(_)) {
                    (" and ", 3)
                } else {
                    (" or ", 2)
                };
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    p.fmt_prec(f, child)?;
                }
                Ok(())
            }
            Formula::Forall(v, d, body) | Formula::Exists(v, d, body) => {
                let q = if matches!(self, Formula::Forall(..)) {
                    "forall"
                } else {
                    "exists"
                };
                write!(f, "{q} {v} in {d} : ")?;
                body.fmt_prec(f, 0)
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(v) => write!(f, "{v}"),
            Term::Var(name) => f.write_str(name),
            Term::SelfRef => f.write_str("self"),
            Term::App(name, args) if args.is_empty() => f.write_str(name),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Term::Builtin(op @ (Builtin::Add | Builtin::Sub), args) => {
                write!(f, "{} {} ", args[0], op.name())?;
                if matches!(args[1], Term::Builtin(Builtin::Add | Builtin::Sub, _)) {
                    write!(f, "({})", args[1])
                } else {
                    write!(f, "{}", args[1])
                }
            }
            Term::Builtin(op, args) => {
                write!(f, "{}(", op.name())?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Term::List(items) => {
                f.write_str("[")?;
                write_args(f, items)?;
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleKind {
    Assign {
        func: String,
        args: Vec<Term>,
        value: Term,
    },
    If {
        guard: Formula,
        then: Box<Rule>,
    },
    Block(Vec<Rule>),
    Forall {
        var: String,
        domain: String,
        body: Box<Rule>,
    },
    Choose {
        var: String,
        domain: String,
        with: Formula,
        rank: Option<Term>,
        body: Box<Rule>,
    },
    Call {
        rule: String,
        args: Vec<Term>,
    },
    Skip,
}

/// A rule node. Labelled nodes are the units reported by the analyzer
/// and recorded as fired in traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub label: Option<String>,
    pub kind: RuleKind,
}

impl Rule {
    pub fn new(kind: RuleKind) -> Self {
        Self { label: None, kind }
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn assign(func: &str, args: Vec<Term>, value: Term) -> Rule {
        Rule::new(RuleKind::Assign {
            func: func.to_string(),
            args,
            value,
        })
    }

    pub fn when(guard: Formula, then: Rule) -> Rule {
        Rule::new(RuleKind::If {
            guard,
            then: Box::new(then),
        })
    }

    pub fn block(rules: Vec<Rule>) -> Rule {
        Rule::new(RuleKind::Block(rules))
    }

    pub fn forall(var: &str, domain: &str, body: Rule) -> Rule {
        Rule::new(RuleKind::Forall {
            var: var.to_string(),
            domain: domain.to_string(),
            body: Box::new(body),
        })
    }

    pub fn choose(var: &str, domain: &str, with: Formula, rank: Option<Term>, body: Rule) -> Rule {
        Rule::new(RuleKind::Choose {
            var: var.to_string(),
            domain: domain.to_string(),
            with,
            rank,
            body: Box::new(body),
        })
    }

    pub fn call(rule: &str, args: Vec<Term>) -> Rule {
        Rule::new(RuleKind::Call {
            rule: rule.to_string(),
            args,
        })
    }

    pub fn skip() -> Rule {
        Rule::new(RuleKind::Skip)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Rule,
    pub span: Span,
}

impl RuleDef {
    pub fn new(name: &str, params: &[&str], body: Rule) -> Self {
        Self {
            name: name.to_string(),
            params: params.iter().map(|p| p.to_string()).collect(),
            body,
            span: Span::default(),
        }
    }
}

/// Domains, function symbols and named rules: everything evaluation needs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signature {
    pub domains: IndexMap<String, DomainDecl>,
    pub functions: IndexMap<String, FunctionSymbol>,
    pub rules: IndexMap<String, RuleDef>,
}

pub const BOOLEAN: &str = "boolean";

impl Signature {
    pub fn add_domain(&mut self, name: &str, kind: DomainKind) {
        self.domains.insert(
            name.to_string(),
            DomainDecl {
                name: name.to_string(),
                kind,
                span: Span::default(),
            },
        );
    }

    pub fn add_function(&mut self, f: FunctionSymbol) {
        self.functions.insert(f.name.clone(), f);
    }

    pub fn add_rule(&mut self, r: RuleDef) {
        self.rules.insert(r.name.clone(), r);
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSymbol> {
        self.functions.get(name)
    }

    /// Elements of a quantifiable domain in declaration order.
    pub fn domain_elements(&self, name: &str) -> Option<Vec<Value>> {
        if name == BOOLEAN {
            return Some(vec![Value::Bool(false), Value::Bool(true)]);
        }
        self.domains.get(name).map(DomainDecl::elements)
    }

    pub fn domain_contains(&self, name: &str, v: &Value) -> bool {
        if name == BOOLEAN {
            return matches!(v, Value::Bool(_));
        }
        self.domains.get(name).is_some_and(|d| d.contains(v))
    }

    /// Membership of a value in a type; `undef` belongs to every type.
    pub fn type_contains(&self, ty: &TypeRef, v: &Value) -> bool {
        match (ty, v) {
            (_, Value::Undef) => true,
            (TypeRef::Boolean, Value::Bool(_)) => true,
            (TypeRef::Domain(d), v) => self.domain_contains(d, v),
            (TypeRef::Seq(inner), Value::Seq(items)) => {
                items.iter().all(|i| !i.is_undef() && self.type_contains(inner, i))
            }
            _ => false,
        }
    }

    /// Finite enumeration of a type including `undef`. Sequences are
    /// enumerated up to `max_seq_len` elements.
    pub fn type_values(&self, ty: &TypeRef, max_seq_len: usize) -> Vec<Value> {
        let mut out = vec![Value::Undef];
        match ty {
            TypeRef::Boolean => out.extend([Value::Bool(false), Value::Bool(true)]),
            TypeRef::Domain(d) => out.extend(self.domain_elements(d).unwrap_or_default()),
            TypeRef::Seq(inner) => {
                let elems: Vec<Value> = self
                    .type_values(inner, max_seq_len)
                    .into_iter()
                    .filter(|v| !v.is_undef())
                    .collect();
                let mut layer: Vec<Vec<Value>> = vec![Vec::new()];
                out.push(Value::Seq(Vec::new()));
                for _ in 0..max_seq_len {
                    let mut next = Vec::new();
                    for prefix in &layer {
                        for e in &elems {
                            let mut s = prefix.clone();
                            s.push(e.clone());
                            out.push(Value::Seq(s.clone()));
                            next.push(s);
                        }
                    }
                    layer = next;
                }
            }
        }
        out
    }

    /// Finds the atom domain declaring `name`.
    pub fn atom_named(&self, name: &str) -> Option<Atom> {
        self.domains.values().find_map(|d| match &d.kind {
            DomainKind::Atoms(names) if names.iter().any(|n| n == name) => {
                Some(Atom::new(&d.name, name))
            }
            _ => None,
        })
    }

    /// Decodes a JSON value produced by `Value::to_json`.
    pub fn value_from_json(&self, j: &serde_json::Value) -> Option<Value> {
        Some(match j {
            serde_json::Value::Null => Value::Undef,
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::Number(n) => Value::Int(n.as_i64()?),
            serde_json::Value::String(s) => Value::Atom(self.atom_named(s)?),
            serde_json::Value::Array(items) => Value::Seq(
                items
                    .iter()
                    .map(|i| self.value_from_json(i))
                    .collect::<Option<Vec<_>>>()?,
            ),
            serde_json::Value::Object(_) => return None,
        })
    }

    /// Parses a literal value written as in model text (`true`, `-3`, `undef`, an atom name).
    pub fn value_from_literal(&self, s: &str) -> Option<Value> {
        let s = s.trim();
        match s {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            "undef" => Some(Value::Undef),
            _ => s
                .parse::<i64>()
                .ok()
                .map(Value::Int)
                .or_else(|| self.atom_named(s).map(Value::Atom)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_display_parenthesizes_by_precedence() {
        let a = Formula::holds(Term::var("a"));
        let b = Formula::holds(Term::var("b"));
        let c = Formula::holds(Term::var("c"));
        let f = Formula::And(vec![a.clone(), Formula::Or(vec![b.clone(), c.clone()])]);
        assert_eq!(f.to_string(), "a and (b or c)");
        let g = Formula::not(Formula::Or(vec![a.clone(), b.clone()]));
        assert_eq!(g.to_string(), "not (a or b)");
        let h = Formula::not(Formula::eq(Term::var("x"), Term::undef()));
        assert_eq!(h.to_string(), "not x = undef");
        let nested = Formula::And(vec![a, Formula::And(vec![b, c])]);
        assert_eq!(nested.to_string(), "a and (b and c)");
    }

    #[test]
    fn conjuncts_flatten() {
        let f = Formula::And(vec![
            Formula::holds(Term::var("a")),
            Formula::And(vec![Formula::holds(Term::var("b")), Formula::holds(Term::var("c"))]),
        ]);
        assert_eq!(f.conjuncts().len(), 3);
        assert_eq!(Formula::holds(Term::var("a")).conjuncts().len(), 1);
    }

    #[test]
    fn term_display() {
        let t = Term::Builtin(
            Builtin::Sub,
            vec![Term::var("a"), Term::Builtin(Builtin::Sub, vec![Term::var("b"), Term::int(1)])],
        );
        assert_eq!(t.to_string(), "a - (b - 1)");
        assert_eq!(Term::app("owner", vec![Term::SelfRef]).to_string(), "owner(self)");
        assert_eq!(Term::app("flag", vec![]).to_string(), "flag");
        assert_eq!(Term::List(vec![]).to_string(), "[]");
    }

    #[test]
    fn seq_type_enumeration_is_bounded() {
        let mut sig = Signature::default();
        sig.add_domain("n", DomainKind::Range(1, 2));
        let vals = sig.type_values(&TypeRef::Seq(Box::new(TypeRef::Domain("n".into()))), 2);
        // undef, [], 2 of length one, 4 of length two
        assert_eq!(vals.len(), 1 + 1 + 2 + 4);
    }
}
