//! Starvation-risk analysis: risky functions, risky predicates, vulnerable
//! rules and the starvation-freedom certificate.

mod classify;
mod cycles;
mod footprint;
mod ground;
mod ranking;
mod risky;
mod vulnerable;

use thiserror::Error;

use crate::asm::EvalError;
use crate::exec::ExecError;
use crate::lang::ModelError;

pub use cycles::{waiting_cycles, WaitingCycle};
pub use classify::{classify_predicate, Method, Mode, PredicateVerdict, Verdict};
pub use footprint::{rule_footprints, write_sites, RuleFootprint, WriteSite};
pub use ground::{for_each_ground, GroundLimits, GroundStats, Overlay, PartialStore};
pub use ranking::{verify_ranking, verify_rankings, RankingCheck};
pub use risky::{compute_risky_functions, RiskReport, RiskyFunction, SafeFunction};
pub use vulnerable::{
    certify_starvation_free, detect_vulnerable_rules, f1_evidence, RuleStatus, RuleVerdict, VulnerabilityReport, CAVEAT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Exec(#[from] ExecError),
}
