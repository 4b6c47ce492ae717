use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::asm::{DerivedBody, Kind};
use crate::lang::Model;

use super::footprint::{formula_symbols, term_symbols, write_sites, WriteSite};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RiskyFunction {
    pub name: String,
    /// How the symbol became risky: its seed kind, the tainted writers or
    /// the risky symbols in its definition.
    pub chain: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafeFunction {
    pub name: String,
    /// A writer rule that reads no risky symbol.
    pub escape: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RiskReport {
    /// In the order symbols became risky.
    pub risky: Vec<RiskyFunction>,
    /// Controlled symbols that stayed safe.
    pub safe: Vec<SafeFunction>,
    pub iterations: usize,
}

impl RiskReport {
    pub fn is_risky(&self, name: &str) -> bool {
        self.risky.iter().any(|r| r.name == name)
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.risky.iter().map(|r| r.name.clone()).collect()
    }
}

fn site_label(s: &WriteSite) -> String {
    s.unit.clone()
}

/// Monitored and shared symbols are risky. A controlled symbol becomes
/// risky once every rule assignment to it reads a risky symbol, and a
/// derived symbol once its definition mentions one. Iterates to a fixpoint.
pub fn compute_risky_functions(model: &Model) -> RiskReport {
    let sites = write_sites(model);
    let mut by_symbol: BTreeMap<&str, Vec<&WriteSite>> = BTreeMap::new();
    for s in &sites {
        by_symbol.entry(s.symbol.as_str()).or_default().push(s);
    }

    let mut risky: Vec<RiskyFunction> = Vec::new();
    let mut names: BTreeSet<String> = BTreeSet::new();
    for f in model.sig.functions.values() {
        if matches!(f.kind, Kind::Monitored | Kind::Shared) {
            names.insert(f.name.clone());
            risky.push(RiskyFunction {
                name: f.name.clone(),
                chain: vec![f.kind.keyword().to_string()],
            });
        }
    }

    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut added = Vec::new();
        for f in model.sig.functions.values() {
            if names.contains(&f.name) {
                continue;
            }
            match f.kind {
                Kind::Controlled => {
                    let Some(ws) = by_symbol.get(f.name.as_str()) else { continue };
                    let tainted: Vec<(&WriteSite, Vec<&String>)> = ws
                        .iter()
                        .map(|s| (*s, s.reads.iter().filter(|r| names.contains(*r)).collect::<Vec<_>>()))
                        .collect();
                    if tainted.iter().all(|(_, hits)| !hits.is_empty()) {
                        let mut chain: Vec<String> = Vec::new();
                        for (s, hits) in tainted {
                            let line = format!(
                                "{} reads {}",
                                site_label(s),
                                hits.iter().map(|h| h.as_str()).collect::<Vec<_>>().join(", ")
                            );
                            if !chain.contains(&line) {
                                chain.push(line);
                            }
                        }
                        added.push(RiskyFunction {
                            name: f.name.clone(),
                            chain,
                        });
                    }
                }
                Kind::Derived => {
                    let mut deps = BTreeSet::new();
                    if let Some(def) = &f.definition {
                        match &def.body {
                            DerivedBody::Term(t) => term_symbols(t, &mut deps),
                            DerivedBody::Formula(phi) => formula_symbols(phi, &mut deps),
                        }
                    }
                    let hits: Vec<String> = deps.into_iter().filter(|d| names.contains(d)).collect();
                    if !hits.is_empty() {
                        added.push(RiskyFunction {
                            name: f.name.clone(),
                            chain: vec![format!("defined over {}", hits.join(", "))],
                        });
                    }
                }
                _ => {}
            }
        }
        if added.is_empty() {
            break;
        }
        for r in added {
            names.insert(r.name.clone());
            risky.push(r);
        }
    }

    let safe = model
        .sig
        .functions
        .values()
        .filter(|f| f.kind == Kind::Controlled && !names.contains(&f.name))
        .map(|f| {
            let escape = by_symbol
                .get(f.name.as_str())
                .and_then(|ws| ws.iter().find(|s| s.reads.iter().all(|r| !names.contains(r))))
                .map(|s| site_label(s))
                .unwrap_or_else(|| "initialization only".to_string());
            SafeFunction {
                name: f.name.clone(),
                escape,
            }
        })
        .collect();

    RiskReport {
        risky,
        safe,
        iterations,
    }
}
