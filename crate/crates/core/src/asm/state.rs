use std::collections::{btree_map, BTreeMap, BTreeSet};
use std::fmt;

use super::value::Value;

/// A function symbol applied to a tuple of argument values. Agent-local
/// symbols additionally carry the owning agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Location {
    pub func: String,
    pub args: Vec<Value>,
    pub owner: Option<Value>,
}

impl Location {
    pub fn new(func: &str, args: Vec<Value>) -> Self {
        Self {
            func: func.to_string(),
            args,
            owner: None,
        }
    }

    pub fn owned_by(mut self, agent: Value) -> Self {
        self.owner = Some(agent);
        self
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.func)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        if let Some(owner) = &self.owner {
            write!(f, "@{owner}")?;
        }
        Ok(())
    }
}

/// A finite map from locations to values; absent locations read as `undef`.
/// Writing `undef` removes the entry so equal states compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State {
    cells: BTreeMap<Location, Value>,
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, loc: &Location) -> Value {
        self.cells.get(loc).cloned().unwrap_or(Value::Undef)
    }

    pub fn set(&mut self, loc: Location, v: Value) {
        if v.is_undef() {
            self.cells.remove(&loc);
        } else {
            self.cells.insert(loc, v);
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Location, Value> {
        self.cells.iter()
    }

    /// Locations whose values differ between the two states.
    pub fn diff(&self, other: &State) -> BTreeSet<Location> {
        let mut out = BTreeSet::new();
        for (loc, v) in &self.cells {
            if other.cells.get(loc) != Some(v) {
                out.insert(loc.clone());
            }
        }
        for loc in other.cells.keys() {
            if !self.cells.contains_key(loc) {
                out.insert(loc.clone());
            }
        }
        out
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (loc, v)) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{loc} = {v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Update {
    pub location: Location,
    pub value: Value,
}

impl Update {
    pub fn new(location: Location, value: Value) -> Self {
        Self { location, value }
    }
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} := {}", self.location, self.value)
    }
}

/// A set of updates; identical updates collapse.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct UpdateSet {
    updates: BTreeSet<Update>,
}

impl UpdateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, u: Update) {
        self.updates.insert(u);
    }

    pub fn extend(&mut self, other: UpdateSet) {
        self.updates.extend(other.updates);
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Update> {
        self.updates.iter()
    }

    pub fn locations(&self) -> BTreeSet<Location> {
        self.updates.iter().map(|u| u.location.clone()).collect()
    }

    /// The first pair of updates assigning different values to one location.
    pub fn find_clash(&self) -> Option<Clash> {
        let mut prev: Option<&Update> = None;
        for u in &self.updates {
            if let Some(p) = prev {
                if p.location == u.location {
                    return Some(Clash {
                        location: u.location.clone(),
                        first: p.value.clone(),
                        second: u.value.clone(),
                    });
                }
            }
            prev = Some(u);
        }
        None
    }
}

impl FromIterator<Update> for UpdateSet {
    fn from_iter<I: IntoIterator<Item = Update>>(iter: I) -> Self {
        Self {
            updates: iter.into_iter().collect(),
        }
    }
}

impl<'a> IntoIterator for &'a UpdateSet {
    type Item = &'a Update;
    type IntoIter = std::collections::btree_set::Iter<'a, Update>;

    fn into_iter(self) -> Self::IntoIter {
        self.updates.iter()
    }
}

/// Two updates to the same location with different values.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("inconsistent updates to {location}: {first} vs {second}")]
pub struct Clash {
    pub location: Location,
    pub first: Value,
    pub second: Value,
}

/// True iff no location receives two different values.
pub fn check_consistent(u: &UpdateSet) -> bool {
    u.find_clash().is_none()
}

/// Fires an update set: the result agrees with `u` on its locations and with
/// `state` elsewhere. Inconsistent sets yield no next state.
pub fn apply_updates(state: &State, u: &UpdateSet) -> Result<State, Clash> {
    if let Some(clash) = u.find_clash() {
        return Err(clash);
    }
    let mut next = state.clone();
    for up in u {
        next.set(up.location.clone(), up.value.clone());
    }
    Ok(next)
}
