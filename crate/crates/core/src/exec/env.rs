use std::collections::BTreeMap;

use serde_json::{json, Map};

use crate::asm::{Kind, Location, Signature, Update, UpdateSet, Value};

use super::step::ExecError;

/// Updates injected by the environment, keyed by global step index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnvironmentScript {
    batches: BTreeMap<usize, Vec<Update>>,
}

/// Parses `f`, `f(a1,a2)` or `f(a1)@owner` against a signature.
pub fn parse_location(sig: &Signature, text: &str) -> Result<Location, ExecError> {
    let bad = || ExecError::Script(format!("malformed location `{text}`"));
    let (body, owner) = match text.rsplit_once('@') {
        Some((b, o)) => (b.trim(), Some(sig.value_from_literal(o).ok_or_else(bad)?)),
        None => (text.trim(), None),
    };
    let (func, args) = match body.split_once('(') {
        Some((f, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(bad)?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner
                    .split(',')
                    .map(|a| sig.value_from_literal(a).ok_or_else(bad))
                    .collect::<Result<Vec<_>, _>>()?
            };
            (f.trim(), args)
        }
        None => (body, Vec::new()),
    };
    let sym = sig
        .function(func)
        .ok_or_else(|| ExecError::Script(format!("unknown function `{func}`")))?;
    if sym.arity() != args.len() {
        return Err(ExecError::Script(format!(
            "`{func}` expects {} argument(s), got {}",
            sym.arity(),
            args.len()
        )));
    }
    let mut loc = Location::new(func, args);
    loc.owner = owner;
    Ok(loc)
}

pub fn update_to_json(u: &Update) -> serde_json::Value {
    json!({"location": u.location.to_string(), "value": u.value.to_json()})
}

pub fn updates_to_json<'a>(us: impl IntoIterator<Item = &'a Update>) -> serde_json::Value {
    serde_json::Value::Array(us.into_iter().map(update_to_json).collect())
}

impl EnvironmentScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: usize, u: Update) {
        self.batches.entry(step).or_default().push(u);
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn batch(&self, step: usize) -> UpdateSet {
        self.batches
            .get(&step)
            .map(|b| b.iter().cloned().collect())
            .unwrap_or_default()
    }

    /// One past the last step with a batch; zero for an empty script.
    pub fn horizon(&self) -> usize {
        self.batches.keys().next_back().map_or(0, |s| s + 1)
    }

    /// True if some batch is scheduled strictly after `step`.
    pub fn pending_after(&self, step: usize) -> bool {
        self.batches.range(step + 1..).next().is_some()
    }

    pub fn steps(&self) -> impl Iterator<Item = (usize, &[Update])> {
        self.batches.iter().map(|(s, b)| (*s, b.as_slice()))
    }

    /// Rejects updates whose target is not monitored or shared.
    pub fn check(&self, sig: &Signature) -> Result<(), ExecError> {
        for (step, batch) in &self.batches {
            for u in batch {
                let kind = sig.function(&u.location.func).map(|f| f.kind);
                if !matches!(kind, Some(Kind::Monitored | Kind::Shared)) {
                    return Err(ExecError::Script(format!(
                        "step {step}: `{}` is not monitored or shared",
                        u.location.func
                    )));
                }
            }
        }
        Ok(())
    }

    /// `{"<step>": [{"location": "f(a)", "value": ...}]}`
    pub fn from_json(sig: &Signature, text: &str) -> Result<Self, ExecError> {
        let raw: BTreeMap<String, Vec<RawUpdate>> =
            serde_json::from_str(text).map_err(|e| ExecError::Script(e.to_string()))?;
        let mut script = Self::new();
        for (step, batch) in raw {
            let step: usize = step
                .parse()
                .map_err(|_| ExecError::Script(format!("bad step index `{step}`")))?;
            for u in batch {
                let loc = parse_location(sig, &u.location)?;
                let value = sig
                    .value_from_json(&u.value)
                    .ok_or_else(|| ExecError::Script(format!("bad value {} for {}", u.value, u.location)))?;
                script.push(step, Update::new(loc, value));
            }
        }
        script.check(sig)?;
        Ok(script)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = Map::new();
        for (step, batch) in &self.batches {
            m.insert(step.to_string(), updates_to_json(batch));
        }
        serde_json::Value::Object(m)
    }
}

#[derive(serde::Deserialize)]
struct RawUpdate {
    location: String,
    #[serde(default)]
    value: serde_json::Value,
}

impl FromIterator<(usize, Location, Value)> for EnvironmentScript {
    fn from_iter<I: IntoIterator<Item = (usize, Location, Value)>>(iter: I) -> Self {
        let mut s = Self::new();
        for (step, loc, v) in iter {
            s.push(step, Update::new(loc, v));
        }
        s
    }
}
