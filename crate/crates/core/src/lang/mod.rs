//! Model files: parsing, printing and validation.

mod diag;
mod model;
mod parse;
mod print;
mod validate;

pub use diag::{has_errors, Diagnostic, Severity};
pub use model::{AgentBinding, AgentInstance, AgentSet, Model, ModelError, PredicateDecl, RankingDecl, RuleUnit};
pub use parse::{is_keyword, parse_formula, parse_model};
pub use print::pretty_print;
pub use validate::validate_model;
