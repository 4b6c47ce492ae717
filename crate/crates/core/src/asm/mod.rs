//! Single-agent ASM semantics: values, locations, states, terms, formulas,
//! guarded-update rules and their evaluation.

mod eval;
mod state;
mod syntax;
mod value;

pub use eval::{
    collect_updates, collect_updates_traced, eval_formula, eval_location, eval_term, Env, EvalError,
    RecordingStore, Store,
};
pub use state::{apply_updates, check_consistent, Clash, Location, State, Update, UpdateSet};
pub use syntax::{
    Builtin, Derivation, DerivedBody, DomainDecl, DomainKind, Formula, FunctionSymbol, Kind, Rule,
    RuleDef, RuleKind, Scope, Signature, Span, Term, TypeRef, BOOLEAN,
};
pub use value::{Atom, Value};
