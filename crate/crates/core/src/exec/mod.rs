//! Distributed execution: agent moves, schedulers, environment scripts,
//! exhaustive exploration and coherence checks.

mod env;
mod explore;
mod run;
mod step;
mod trace;

pub use env::{parse_location, update_to_json, updates_to_json, EnvironmentScript};
pub use explore::{
    check_coherence, enumerate_interleavings, footprint, independent, Coherence, Edge, InconsistentMove,
    StateGraph, DEFAULT_STATE_BUDGET,
};
pub use run::{run_distributed, Scheduler};
pub use step::{agent_step, agent_updates, find_agent, ExecError, StepOutcome};
pub use trace::{predicate_table, StepRecord, Termination, Trace, TraceStep};
