//! Lexer and recursive-descent parser for `.asm` model files.
//!
//! Identifiers are resolved after the whole file is read, so declarations
//! may appear in any order: a bare name becomes a bound variable, a nullary
//! function application or an atom, in that order of preference.

use std::collections::HashSet;

use crate::asm::{
    Builtin, Derivation, DerivedBody, DomainDecl, DomainKind, Formula, FunctionSymbol, Kind, Rule,
    RuleDef, RuleKind, Scope, Span, Term, TypeRef, Value, BOOLEAN,
};

use super::diag::Diagnostic;
use super::model::{AgentBinding, AgentSet, Model, PredicateDecl, RankingDecl};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

const SYMBOLS: [&str; 17] = [
    ":=", "!=", "->", "..", "{", "}", "(", ")", "[", "]", ",", ":", "=", "+", "-", ";", "@",
];

const KEYWORDS: [&str; 37] = [
    "dasm", "domain", "function", "init", "rule", "agent", "in", "runs", "predicate", "for",
    "ranking", "if", "then", "forall", "exists", "do", "choose", "with", "ranked", "by", "skip",
    "and", "or", "not", "true", "false", "undef", "self", "seq", "local", "static", "controlled",
    "monitored", "shared", "derived", "out", "boolean",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let span = Span::new(line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let n = text
                .parse::<i64>()
                .map_err(|_| Diagnostic::error(line, col, "E001", format!("integer `{text}` out of range")))?;
            col += i - start;
            out.push((Tok::Int(n), span));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push((Tok::Ident(chars[start..i].iter().collect()), span));
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'"') {
                return Err(Diagnostic::error(line, col, "E001", "unterminated string"));
            }
            let text: String = chars[start..i].iter().collect();
            col += text.chars().count() + 2;
            i += 1;
            out.push((Tok::Str(text), span));
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            i += sym.len();
            col += sym.len();
            out.push((Tok::Sym(sym), span));
            continue;
        }
        return Err(Diagnostic::error(line, col, "E001", format!("unexpected character `{c}`")));
    }
    out.push((Tok::Eof, Span::new(line, col)));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let s = self.span();
        Err(Diagnostic::error(s.line, s.col, "E002", msg))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        self.err(format!("expected {wanted}, found {}", self.peek().describe()))
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.unexpected(&format!("`{sym}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("an identifier"),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        match *self.peek() {
            Tok::Int(i) => {
                self.bump();
                Ok(if neg { -i } else { i })
            }
            _ => self.unexpected("an integer"),
        }
    }

    fn comma_list<T>(&mut self, close: &str, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if self.eat_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat_sym(close) {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    fn model(&mut self) -> PResult<(Model, Vec<Diagnostic>)> {
        if matches!(self.peek(), Tok::Eof) {
            return Err(Diagnostic::error(1, 1, "E003", "no model declaration"));
        }
        self.expect_kw("dasm")?;
        let mut model = Model::new(&self.ident()?);
        let mut diags = Vec::new();
        let dup = |diags: &mut Vec<Diagnostic>, span: Span, what: &str, name: &str| {
            diags.push(Diagnostic::error(
                span.line,
                span.col,
                "E004",
                format!("duplicate {what} `{name}`"),
            ))
        };
        loop {
            let span = self.span();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "domain" => {
                        let d = self.domain()?;
                        if model.sig.domains.contains_key(&d.name) {
                            dup(&mut diags, span, "domain", &d.name);
                        }
                        model.sig.domains.insert(d.name.clone(), d);
                    }
                    "function" => {
                        let f = self.function()?;
                        if model.sig.functions.contains_key(&f.name) {
                            dup(&mut diags, span, "function", &f.name);
                        }
                        model.sig.functions.insert(f.name.clone(), f);
                    }
                    "init" => {
                        self.bump();
                        if !model.init.is_empty() {
                            dup(&mut diags, span, "block", "init");
                        }
                        self.expect_sym("{")?;
                        while !self.eat_sym("}") {
                            model.init.push(self.rule()?);
                            self.eat_sym(";");
                        }
                    }
                    "rule" => {
                        let r = self.rule_def()?;
                        if model.sig.rules.contains_key(&r.name) {
                            dup(&mut diags, span, "rule", &r.name);
                        }
                        model.sig.rules.insert(r.name.clone(), r);
                    }
                    "agent" => model.agents.push(self.agent()?),
                    "predicate" => {
                        let p = self.predicate()?;
                        if model.predicates.contains_key(&p.name) {
                            dup(&mut diags, span, "predicate", &p.name);
                        }
                        model.predicates.insert(p.name.clone(), p);
                    }
                    "ranking" => {
                        self.bump();
                        let counter = self.term()?;
                        self.expect_kw("for")?;
                        let predicate = self.ident()?;
                        model.rankings.push(RankingDecl {
                            counter,
                            predicate,
                            span,
                        });
                    }
                    _ => return self.unexpected("a declaration"),
                },
                _ => return self.unexpected("a declaration"),
            }
        }
        Ok((model, diags))
    }

    fn domain(&mut self) -> PResult<DomainDecl> {
        let span = self.span();
        self.expect_kw("domain")?;
        let name = self.ident()?;
        self.expect_sym("=")?;
        let kind = if self.eat_sym("{") {
            DomainKind::Atoms(self.comma_list("}", |p| p.ident())?)
        } else {
            let lo = self.int()?;
            self.expect_sym("..")?;
            DomainKind::Range(lo, self.int()?)
        };
        Ok(DomainDecl { name, kind, span })
    }

    fn type_ref(&mut self) -> PResult<TypeRef> {
        if self.eat_kw("boolean") {
            Ok(TypeRef::Boolean)
        } else if self.eat_kw("seq") {
            Ok(TypeRef::Seq(Box::new(self.type_ref()?)))
        } else {
            Ok(TypeRef::Domain(self.ident()?))
        }
    }

    fn function(&mut self) -> PResult<FunctionSymbol> {
        let span = self.span();
        self.expect_kw("function")?;
        let name = self.ident()?;
        self.expect_sym(":")?;
        let mut types = vec![self.type_ref()?];
        while self.eat_kw("x") {
            types.push(self.type_ref()?);
        }
        let result = if self.eat_sym("->") {
            self.type_ref()?
        } else if types.len() == 1 {
            types.pop().expect("one type")
        } else {
            return self.unexpected("`->`");
        };
        let kind = match self.peek().clone() {
            Tok::Ident(k) => match Kind::from_keyword(&k) {
                Some(kind) => {
                    self.bump();
                    kind
                }
                None => return self.unexpected("a function kind"),
            },
            _ => return self.unexpected("a function kind"),
        };
        let mut f = FunctionSymbol::new(&name, types, result, kind);
        f.span = span;
        if self.eat_kw("by") {
            f.writer = Some(self.ident()?);
        }
        if self.eat_kw("local") {
            f.scope = Scope::AgentLocal;
        }
        if kind == Kind::Derived {
            let params = if self.eat_sym("(") {
                self.comma_list(")", |p| p.ident())?
            } else {
                Vec::new()
            };
            self.expect_sym(":=")?;
            let body = match self.formula()? {
                Formula::Holds(t) => DerivedBody::Term(t),
                other => DerivedBody::Formula(other),
            };
            f.definition = Some(Derivation { params, body });
        }
        Ok(f)
    }

    fn rule_def(&mut self) -> PResult<RuleDef> {
        let span = self.span();
        self.expect_kw("rule")?;
        let name = self.ident()?;
        let params = if self.eat_sym("(") {
            self.comma_list(")", |p| p.ident())?
        } else {
            Vec::new()
        };
        self.expect_sym("=")?;
        let body = self.rule()?;
        Ok(RuleDef {
            name,
            params,
            body,
            span,
        })
    }

    fn agent(&mut self) -> PResult<AgentBinding> {
        let span = self.span();
        self.expect_kw("agent")?;
        let first = self.ident()?;
        let set = if self.eat_kw("in") {
            AgentSet::Each {
                var: first,
                domain: self.ident()?,
            }
        } else {
            AgentSet::Single(first)
        };
        self.expect_kw("runs")?;
        let rule = self.ident()?;
        self.expect_sym("(")?;
        let args = self.comma_list(")", |p| p.term())?;
        Ok(AgentBinding {
            set,
            rule,
            args,
            span,
        })
    }

    fn predicate(&mut self) -> PResult<PredicateDecl> {
        let span = self.span();
        self.expect_kw("predicate")?;
        let name = self.ident()?;
        self.expect_kw("for")?;
        let var = self.ident()?;
        self.expect_kw("in")?;
        let domain = self.ident()?;
        self.expect_sym(":=")?;
        let formula = self.formula()?;
        Ok(PredicateDecl {
            name,
            var,
            domain,
            formula,
            span,
        })
    }

    fn rule(&mut self) -> PResult<Rule> {
        let label = if let Tok::Str(s) = self.peek().clone() {
            self.bump();
            self.expect_sym(":")?;
            Some(s)
        } else {
            None
        };
        let kind = self.rule_kind()?;
        Ok(Rule { label, kind })
    }

    fn rule_kind(&mut self) -> PResult<RuleKind> {
        if self.eat_kw("skip") {
            return Ok(RuleKind::Skip);
        }
        if self.eat_sym("{") {
            let mut rules = Vec::new();
            while !self.eat_sym("}") {
                rules.push(self.rule()?);
                self.eat_sym(";");
            }
            return Ok(RuleKind::Block(rules));
        }
        if self.eat_kw("if") {
            let guard = self.formula()?;
            self.expect_kw("then")?;
            return Ok(RuleKind::If {
                guard,
                then: Box::new(self.rule()?),
            });
        }
        if self.eat_kw("forall") {
            let var = self.ident()?;
            self.expect_kw("in")?;
            let domain = self.domain_name()?;
            self.expect_kw("do")?;
            return Ok(RuleKind::Forall {
                var,
                domain,
                body: Box::new(self.rule()?),
            });
        }
        if self.eat_kw("choose") {
            let var = self.ident()?;
            self.expect_kw("in")?;
            let domain = self.domain_name()?;
            self.expect_kw("with")?;
            let with = self.formula()?;
            let rank = if self.eat_kw("ranked") {
                self.expect_kw("by")?;
                Some(self.term()?)
            } else {
                None
            };
            self.expect_kw("do")?;
            return Ok(RuleKind::Choose {
                var,
                domain,
                with,
                rank,
                body: Box::new(self.rule()?),
            });
        }
        let name = self.ident()?;
        let args = if self.eat_sym("(") {
            Some(self.comma_list(")", |p| p.term())?)
        } else {
            None
        };
        if self.eat_sym(":=") {
            let value = self.term()?;
            return Ok(RuleKind::Assign {
                func: name,
                args: args.unwrap_or_default(),
                value,
            });
        }
        match args {
            Some(args) => Ok(RuleKind::Call { rule: name, args }),
            None => self.unexpected("`:=` or `(`"),
        }
    }

    fn domain_name(&mut self) -> PResult<String> {
        if self.eat_kw("boolean") {
            Ok(BOOLEAN.to_string())
        } else {
            self.ident()
        }
    }

    fn formula(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.conjunction()?];
        while self.eat_kw("or") {
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Formula::Or(parts)
        })
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.negation()?];
        while self.eat_kw("and") {
            parts.push(self.negation()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Formula::And(parts)
        })
    }

    fn negation(&mut self) -> PResult<Formula> {
        if self.eat_kw("not") {
            return Ok(Formula::Not(Box::new(self.negation()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Formula> {
        for q in ["forall", "exists"] {
            if self.eat_kw(q) {
                let var = self.ident()?;
                self.expect_kw("in")?;
                let dom = self.domain_name()?;
                self.expect_sym(":")?;
                let body = Box::new(self.formula()?);
                return Ok(if q == "forall" {
                    Formula::Forall(var, dom, body)
                } else {
                    Formula::Exists(var, dom, body)
                });
            }
        }
        if self.is_sym("(") {
            let save = self.pos;
            self.bump();
            if let Ok(f) = self.formula() {
                if self.eat_sym(")") && !self.continues_term() {
                    return Ok(f);
                }
            }
            self.pos = save;
        }
        let lhs = self.term()?;
        if self.eat_sym("=") {
            return Ok(Formula::Eq(lhs, self.term()?));
        }
        if self.eat_sym("!=") {
            return Ok(Formula::Not(Box::new(Formula::Eq(lhs, self.term()?))));
        }
        if self.eat_kw("in") {
            if self.eat_kw("boolean") {
                return Ok(Formula::InDomain(lhs, BOOLEAN.to_string()));
            }
            return Ok(Formula::InSeq(lhs, self.term()?));
        }
        Ok(Formula::Holds(lhs))
    }

    fn continues_term(&self) -> bool {
        self.is_sym("=") || self.is_sym("!=") || self.is_sym("+") || self.is_sym("-") || self.is_kw("in")
    }

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.is_sym("+") {
                Builtin::Add
            } else if self.is_sym("-") {
                Builtin::Sub
            } else {
                return Ok(lhs);
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Term::Builtin(op, vec![lhs, rhs]);
        }
    }

    fn unary(&mut self) -> PResult<Term> {
        if self.is_sym("-") {
            if let Tok::Int(_) = self.peek_at(1) {
                return Ok(Term::Const(Value::Int(self.int()?)));
            }
            return self.unexpected("a term");
        }
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Term::Const(Value::Int(i)))
            }
            Tok::Sym("[") => {
                self.bump();
                Ok(Term::List(self.comma_list("]", |p| p.term())?))
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.term()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Term::Const(Value::Bool(s == "true")))
                }
                "undef" => {
                    self.bump();
                    Ok(Term::Const(Value::Undef))
                }
                "self" => {
                    self.bump();
                    Ok(Term::SelfRef)
                }
                _ => {
                    let name = self.ident()?;
                    if self.eat_sym("(") {
                        let args = self.comma_list(")", |p| p.term())?;
                        Ok(match Builtin::from_call_name(&name) {
                            Some(b) => Term::Builtin(b, args),
                            None => Term::App(name, args),
                        })
                    } else {
                        Ok(Term::Var(name))
                    }
                }
            },
            _ => self.unexpected("a term"),
        }
    }
}

/// Resolves bare identifiers once every declaration is known.
struct Resolver<'m> {
    functions: HashSet<String>,
    domains: HashSet<String>,
    model: &'m Model,
    scope: Vec<String>,
}

impl Resolver<'_> {
    fn bound(&self, name: &str) -> bool {
        self.scope.iter().any(|s| s == name)
    }

    fn with<T>(&mut self, vars: &[String], f: impl FnOnce(&mut Self) -> T) -> T {
        let n = self.scope.len();
        self.scope.extend(vars.iter().cloned());
        let r = f(self);
        self.scope.truncate(n);
        r
    }

    fn term(&mut self, t: &mut Term) {
        match t {
            Term::Var(name) if !self.bound(name) => {
                if self.functions.contains(name.as_str()) {
                    *t = Term::App(name.clone(), Vec::new());
                } else if let Some(atom) = self.model.sig.atom_named(name) {
                    *t = Term::Const(Value::Atom(atom));
                }
            }
            Term::App(_, args) | Term::Builtin(_, args) | Term::List(args) => {
                args.iter_mut().for_each(|a| self.term(a))
            }
            _ => {}
        }
    }

    fn formula(&mut self, f: &mut Formula) {
        match f {
            Formula::Holds(t) | Formula::InDomain(t, _) => self.term(t),
            Formula::Eq(a, b) => {
                self.term(a);
                self.term(b);
            }
            Formula::InSeq(t, s) => {
                if let Term::Var(name) = s {
                    if !self.bound(name) && (self.domains.contains(name.as_str()) || name == BOOLEAN) {
                        let mut lhs = t.clone();
                        self.term(&mut lhs);
                        *f = Formula::InDomain(lhs, name.clone());
                        return;
                    }
                }
                self.term(t);
                self.term(s);
            }
            Formula::Not(inner) => self.formula(inner),
            Formula::And(parts) | Formula::Or(parts) => parts.iter_mut().for_each(|p| self.formula(p)),
            Formula::Forall(v, _, body) | Formula::Exists(v, _, body) => {
                let v = v.clone();
                self.with(&[v], |r| r.formula(body));
            }
        }
    }

    fn rule(&mut self, r: &mut Rule) {
        match &mut r.kind {
            RuleKind::Assign { args, value, .. } => {
                args.iter_mut().for_each(|a| self.term(a));
                self.term(value);
            }
            RuleKind::If { guard, then } => {
                self.formula(guard);
                self.rule(then);
            }
            RuleKind::Block(rules) => rules.iter_mut().for_each(|r| self.rule(r)),
            RuleKind::Forall { var, body, .. } => {
                let v = var.clone();
                self.with(&[v], |r| r.rule(body));
            }
            RuleKind::Choose {
                var, with, rank, body, ..
            } => {
                let v = var.clone();
                self.with(&[v], |r| {
                    r.formula(with);
                    if let Some(t) = rank {
                        r.term(t);
                    }
                    r.rule(body);
                });
            }
            RuleKind::Call { args, .. } => args.iter_mut().for_each(|a| self.term(a)),
            RuleKind::Skip => {}
        }
    }
}

fn resolve(model: &mut Model) {
    let snapshot = model.clone();
    let mut r = Resolver {
        functions: snapshot.sig.functions.keys().cloned().collect(),
        domains: snapshot.sig.domains.keys().cloned().collect(),
        model: &snapshot,
        scope: Vec::new(),
    };
    for f in model.sig.functions.values_mut() {
        if let Some(def) = &mut f.definition {
            let params = def.params.clone();
            r.with(&params, |r| match &mut def.body {
                DerivedBody::Term(t) => r.term(t),
                DerivedBody::Formula(f) => r.formula(f),
            });
        }
    }
    for rule in &mut model.init {
        r.rule(rule);
    }
    for def in model.sig.rules.values_mut() {
        let params = def.params.clone();
        r.with(&params, |r| r.rule(&mut def.body));
    }
    for b in &mut model.agents {
        let vars = match &b.set {
            AgentSet::Each { var, .. } => vec![var.clone()],
            AgentSet::Single(_) => Vec::new(),
        };
        r.with(&vars, |r| b.args.iter_mut().for_each(|a| r.term(a)));
    }
    for p in model.predicates.values_mut() {
        let v = p.var.clone();
        r.with(&[v], |r| r.formula(&mut p.formula));
    }
    for k in &mut model.rankings {
        r.term(&mut k.counter);
    }
}

/// Parses model text. Syntax errors stop at the first problem; duplicate
/// declarations are collected.
pub fn parse_model(src: &str) -> Result<Model, Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser { toks, pos: 0 };
    let (mut model, diags) = p.model().map_err(|d| vec![d])?;
    if !diags.is_empty() {
        return Err(diags);
    }
    resolve(&mut model);
    Ok(model)
}

/// Parses a single formula in the context of a model's declarations.
pub fn parse_formula(model: &Model, src: &str, bound: &[&str]) -> Result<Formula, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let mut f = p.formula()?;
    if !matches!(p.peek(), Tok::Eof) {
        return p.unexpected("end of formula");
    }
    let mut r = Resolver {
        functions: model.sig.functions.keys().cloned().collect(),
        domains: model.sig.domains.keys().cloned().collect(),
        model,
        scope: bound.iter().map(|s| s.to_string()).collect(),
    };
    r.formula(&mut f);
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"
        dasm Tiny
        domain items = {a, b}
        domain ticks = -1..3
        function flag : items -> boolean controlled
        function count : ticks controlled
        function inbox : items -> seq ticks shared
        function ready : items -> boolean derived (i) := flag(i) and not inbox(i) = []
        init {
          forall i in items do flag(i) := false
          count := 3
        }
        rule Step(me) = {
          "TICK": if count != 0 then count := count - 1
          "MARK": if ready(me) then { flag(me) := true inbox(me) := [] }
          "PICK": choose t in ticks with t in inbox(me) ranked by t do count := t
        }
        agent i in items runs Step(i)
        predicate idle for i in items := not flag(i)
    "#;

    #[test]
    fn parses_small_model() {
        let m = parse_model(TINY).unwrap();
        assert_eq!(m.name, "Tiny");
        assert_eq!(m.sig.domains.len(), 2);
        assert_eq!(m.sig.functions["count"].arity(), 0);
        assert!(matches!(
            m.sig.functions["inbox"].result,
            TypeRef::Seq(_)
        ));
        let units = m.program_units("Step");
        assert_eq!(
            units.iter().map(|u| u.id.as_str()).collect::<Vec<_>>(),
            ["TICK", "MARK", "PICK"]
        );
        // `count` resolved to a nullary application, `a` to an atom, `me` stays a variable
        let RuleKind::If { guard, .. } = &units[0].rule.kind else { panic!() };
        assert_eq!(
            *guard,
            Formula::Not(Box::new(Formula::Eq(Term::app("count", vec![]), Term::int(0))))
        );
        let RuleKind::Choose { with, .. } = &units[2].rule.kind else { panic!() };
        assert!(matches!(with, Formula::InSeq(Term::Var(_), Term::App(..))));
    }

    #[test]
    fn membership_in_domain_resolves() {
        let m = parse_model(TINY).unwrap();
        let f = parse_formula(&m, "x in items", &["x"]).unwrap();
        assert_eq!(f, Formula::InDomain(Term::var("x"), "items".into()));
    }

    #[test]
    fn empty_input_is_rejected() {
        let err = parse_model("   // nothing\n").unwrap_err();
        assert_eq!(err[0].message, "no model declaration");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_model("dasm X\ndomain d = {a,\n").unwrap_err();
        assert_eq!(err[0].line, 3);
        assert!(err[0].is_error());
    }

    #[test]
    fn duplicates_are_reported() {
        let err = parse_model("dasm X\ndomain d = {a}\ndomain d = {b}\n").unwrap_err();
        assert!(err[0].message.contains("duplicate domain"));
    }

    #[test]
    fn parenthesized_terms_inside_formulas() {
        let m = parse_model(TINY).unwrap();
        let f = parse_formula(&m, "(count - 1) = 0", &[]).unwrap();
        assert!(matches!(f, Formula::Eq(Term::Builtin(Builtin::Sub, _), _)));
        let g = parse_formula(&m, "(count = 0) or flag(a)", &[]).unwrap();
        assert!(matches!(g, Formula::Or(_)));
    }
}
