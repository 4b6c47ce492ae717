//! Enumeration of the abstract states a formula or rule can observe.
//!
//! Evaluation runs against a partial store. Reading an unassigned location
//! fails with `EvalError::Unassigned`, and the enumerator then branches over
//! every value of that location's type. Only locations actually read get
//! assigned, so the number of explored states stays small.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use crate::asm::{EvalError, Kind, Location, Signature, State, Store, UpdateSet, Value};

/// Reads statics from the initial state and everything else from a partial
/// assignment.
pub struct PartialStore<'a> {
    sig: &'a Signature,
    statics: &'a State,
    pub assigned: BTreeMap<Location, Value>,
}

impl Store for PartialStore<'_> {
    fn read(&self, loc: &Location) -> Result<Value, EvalError> {
        if self.sig.function(&loc.func).is_some_and(|f| f.kind == Kind::Static) {
            return Ok(self.statics.get(loc));
        }
        self.assigned
            .get(loc)
            .cloned()
            .ok_or_else(|| EvalError::Unassigned(loc.clone()))
    }
}

/// A store seen through a pending update set.
pub struct Overlay<'a> {
    pub base: &'a dyn Store,
    pub updates: &'a UpdateSet,
}

impl Store for Overlay<'_> {
    fn read(&self, loc: &Location) -> Result<Value, EvalError> {
        match self.updates.iter().find(|u| u.location == *loc) {
            Some(u) => Ok(u.value.clone()),
            None => self.base.read(loc),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundLimits {
    /// Longest sequence value enumerated.
    pub max_seq_len: usize,
    /// Maximum number of evaluations before giving up.
    pub budget: usize,
}

impl Default for GroundLimits {
    fn default() -> Self {
        Self {
            max_seq_len: 2,
            budget: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroundStats {
    pub evaluations: usize,
    pub truncated: bool,
}

/// Calls `visit` with every complete partial assignment on which `eval`
/// succeeds. `visit` may stop the enumeration early.
pub fn for_each_ground<T>(
    sig: &Signature,
    statics: &State,
    limits: GroundLimits,
    mut eval: impl FnMut(&dyn Store) -> Result<T, EvalError>,
    mut visit: impl FnMut(&BTreeMap<Location, Value>, T) -> ControlFlow<()>,
) -> Result<GroundStats, EvalError> {
    let mut stats = GroundStats::default();
    let mut stack = vec![BTreeMap::new()];
    while let Some(assigned) = stack.pop() {
        if stats.evaluations >= limits.budget {
            stats.truncated = true;
            break;
        }
        stats.evaluations += 1;
        let store = PartialStore {
            sig,
            statics,
            assigned,
        };
        match eval(&store) {
            Ok(t) => {
                if visit(&store.assigned, t).is_break() {
                    break;
                }
            }
            Err(EvalError::Unassigned(loc)) => {
                let ty = &sig
                    .function(&loc.func)
                    .ok_or_else(|| EvalError::UnknownFunction(loc.func.clone()))?
                    .result;
                // reversed so the stack pops values in declaration order
                for v in sig.type_values(ty, limits.max_seq_len).into_iter().rev() {
                    let mut next = store.assigned.clone();
                    next.insert(loc.clone(), v);
                    stack.push(next);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(stats)
}

/// Renders an assignment as `f(a) = v, ...`.
pub fn describe(assigned: &BTreeMap<Location, Value>) -> String {
    if assigned.is_empty() {
        return "any state".to_string();
    }
    assigned
        .iter()
        .map(|(l, v)| format!("{l} = {v}"))
        .collect::<Vec<_>>()
        .join(", ")
}
