//! Bundled models: dining philosophers (baseline and with a turn-granting
//! scheduler) and the AODV initiator (with and without timeout).

mod aodv;
mod dp;

use serde::Deserialize;
use thiserror::Error;

use crate::exec::EnvironmentScript;
use crate::lang::{parse_model, Model};

pub use aodv::{aodv_script, build_aodv, AodvParams, Topology, MAX_SEQNUM};
pub use dp::{adversarial_schedule, build_dining_philosophers, philosopher, DpVariant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelsError {
    #[error("need at least 2 philosophers, got {0}")]
    TooFewPhilosophers(usize),
    #[error("need at least 2 hosts, got {0}")]
    TooFewHosts(usize),
    #[error("timeout_init must be at least 1, got {0}")]
    Timeout(i64),
    #[error("malformed topology: {0}")]
    Topology(String),
    #[error("unknown corpus entry `{0}`")]
    UnknownEntry(String),
}

/// Builder parameters of a corpus entry.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BuilderParams {
    Dp {
        n: usize,
        variant: String,
    },
    Aodv {
        hosts: usize,
        topology: String,
        with_timeout: bool,
        #[serde(default = "default_timeout")]
        timeout_init: i64,
    },
}

fn default_timeout() -> i64 {
    5
}

/// Analysis results a corpus entry must reproduce.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ExpectedVerdicts {
    pub risky_functions: Vec<String>,
    /// Predicate name to `risky` or `not-risky`.
    pub predicates: std::collections::BTreeMap<String, String>,
    pub vulnerable: Vec<String>,
    pub certificate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub file: String,
    #[serde(default)]
    pub env: Option<String>,
    pub builder: BuilderParams,
    pub expected: ExpectedVerdicts,
}

const FILES: [(&str, &str); 7] = [
    ("dining_philosophers.asm", include_str!("../../corpus/dining_philosophers.asm")),
    ("dining_philosophers_2.asm", include_str!("../../corpus/dining_philosophers_2.asm")),
    (
        "dining_philosophers_bakery.asm",
        include_str!("../../corpus/dining_philosophers_bakery.asm"),
    ),
    ("aodv_no_timeout.asm", include_str!("../../corpus/aodv_no_timeout.asm")),
    ("aodv_timeout.asm", include_str!("../../corpus/aodv_timeout.asm")),
    ("aodv_partitioned.env.json", include_str!("../../corpus/aodv_partitioned.env.json")),
    ("manifest.json", include_str!("../../corpus/manifest.json")),
];

/// Text of a bundled corpus file.
pub fn corpus_file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// All corpus entries with their expected verdicts.
pub fn corpus() -> Vec<CorpusEntry> {
    #[derive(Deserialize)]
    struct Manifest {
        entries: Vec<CorpusEntry>,
    }
    let text = corpus_file("manifest.json").expect("bundled manifest");
    serde_json::from_str::<Manifest>(text)
        .expect("bundled manifest is valid")
        .entries
}

impl CorpusEntry {
    /// Parses the bundled DSL file.
    pub fn parse(&self) -> Model {
        let text = corpus_file(&self.file).expect("bundled model file");
        parse_model(text).unwrap_or_else(|d| panic!("{}: {}", self.file, d[0]))
    }

    /// Runs the builder with the recorded parameters.
    pub fn build(&self) -> Result<(Model, EnvironmentScript), ModelsError> {
        self.builder.build()
    }
}

impl BuilderParams {
    pub fn build(&self) -> Result<(Model, EnvironmentScript), ModelsError> {
        match self {
            BuilderParams::Dp { n, variant } => {
                let v = match variant.as_str() {
                    "baseline" => DpVariant::Baseline,
                    "bakery" => DpVariant::Bakery,
                    other => return Err(ModelsError::UnknownEntry(other.to_string())),
                };
                Ok((build_dining_philosophers(*n, v)?, EnvironmentScript::new()))
            }
            BuilderParams::Aodv {
                hosts,
                topology,
                with_timeout,
                timeout_init,
            } => {
                let mut p = AodvParams::new(*hosts, topology.parse()?);
                if *with_timeout {
                    p = p.with_timeout(*timeout_init);
                }
                build_aodv(&p)
            }
        }
    }
}

/// Looks up a corpus entry by name.
pub fn corpus_entry(name: &str) -> Result<CorpusEntry, ModelsError> {
    corpus()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ModelsError::UnknownEntry(name.to_string()))
}
