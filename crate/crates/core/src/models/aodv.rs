use std::collections::{BTreeSet, VecDeque};
use std::str::FromStr;

use crate::asm::{
    Builtin, DerivedBody, DomainKind, Formula, FunctionSymbol, Kind, Location, Rule, RuleDef, Term,
    TypeRef, Value,
};
use crate::exec::EnvironmentScript;
use crate::lang::{AgentBinding, AgentSet, Model, PredicateDecl, RankingDecl};

use super::ModelsError;

/// Undirected links between hosts, numbered from 1. Host 1 is the initiator
/// and the highest-numbered host is the destination.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    pub links: BTreeSet<(usize, usize)>,
}

impl Topology {
    /// No links at all.
    pub fn partitioned() -> Self {
        Self::default()
    }

    /// `h1 - h2 - ... - hn`.
    pub fn line(hosts: usize) -> Self {
        Self {
            links: (1..hosts).map(|i| (i, i + 1)).collect(),
        }
    }

    fn check(&self, hosts: usize) -> Result<(), ModelsError> {
        for &(a, b) in &self.links {
            if a == b || a == 0 || b == 0 || a > hosts || b > hosts {
                return Err(ModelsError::Topology(format!("bad link {a}-{b} for {hosts} hosts")));
            }
        }
        Ok(())
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.links.contains(&(a.min(b), a.max(b)))
    }

    /// Hop count between two hosts, if connected.
    pub fn distance(&self, from: usize, to: usize, hosts: usize) -> Option<usize> {
        let mut dist = vec![None; hosts + 1];
        dist[from] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(h) = queue.pop_front() {
            let d = dist[h].expect("visited");
            for (n, slot) in dist.iter_mut().enumerate().skip(1) {
                if slot.is_none() && self.adjacent(h, n) {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist[to]
    }
}

/// `"none"` or a comma-separated list of links such as `1-2,2-3`.
impl FromStr for Topology {
    type Err = ModelsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::partitioned());
        }
        let mut links = BTreeSet::new();
        for part in s.split(',') {
            let (a, b) = part
                .split_once('-')
                .ok_or_else(|| ModelsError::Topology(format!("expected `a-b`, got `{part}`")))?;
            let parse = |x: &str| {
                x.trim()
                    .trim_start_matches('h')
                    .parse::<usize>()
                    .map_err(|_| ModelsError::Topology(format!("bad host `{x}`")))
            };
            let (a, b) = (parse(a)?, parse(b)?);
            links.insert((a.min(b), a.max(b)));
        }
        Ok(Self { links })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AodvParams {
    pub hosts: usize,
    pub topology: Topology,
    pub with_timeout: bool,
    pub timeout_init: i64,
    /// Steps per hop, each way, before the scripted reply reaches the initiator.
    pub hop_delay: usize,
}

impl AodvParams {
    pub fn new(hosts: usize, topology: Topology) -> Self {
        Self {
            hosts,
            topology,
            with_timeout: false,
            timeout_init: 5,
            hop_delay: 1,
        }
    }

    pub fn with_timeout(mut self, timeout_init: i64) -> Self {
        self.with_timeout = true;
        self.timeout_init = timeout_init;
        self
    }
}

/// Largest sequence number carried by replies.
pub const MAX_SEQNUM: i64 = 3;

fn ty(d: &str) -> TypeRef {
    TypeRef::Domain(d.to_string())
}

fn app(f: &str, args: Vec<Term>) -> Term {
    Term::app(f, args)
}

fn holds(f: &str, args: Vec<Term>) -> Formula {
    Formula::holds(app(f, args))
}

fn host(i: usize) -> Value {
    Value::atom("hosts", &format!("h{i}"))
}

/// The initiator program of AODV route discovery together with the
/// environment script driving neighbourhood, session requests and replies.
pub fn build_aodv(p: &AodvParams) -> Result<(Model, EnvironmentScript), ModelsError> {
    if p.hosts < 2 {
        return Err(ModelsError::TooFewHosts(p.hosts));
    }
    if p.with_timeout && p.timeout_init < 1 {
        return Err(ModelsError::Timeout(p.timeout_init));
    }
    p.topology.check(p.hosts)?;
    let timeout = p.with_timeout;

    let mut m = Model::new(if timeout {
        "AodvInitiatorTimeout"
    } else {
        "AodvInitiator"
    });
    let hs: Vec<String> = (1..=p.hosts).map(|i| format!("h{i}")).collect();
    m.sig.add_domain("hosts", DomainKind::Atoms(hs.clone()));
    m.sig.add_domain("seqnums", DomainKind::Range(1, MAX_SEQNUM));
    if timeout {
        m.sig.add_domain("ticks", DomainKind::Range(-1, p.timeout_init));
    }

    let h = ty("hosts");
    let hh = vec![h.clone(), h.clone()];
    let b = TypeRef::Boolean;
    m.sig.add_function(FunctionSymbol::new("dest", vec![], h.clone(), Kind::Static));
    m.sig.add_function(FunctionSymbol::new("neighb", hh.clone(), b.clone(), Kind::Monitored));
    m.sig.add_function(FunctionSymbol::new("wishToInitiate", hh.clone(), b.clone(), Kind::Shared));
    m.sig.add_function(FunctionSymbol::new("routingTable", hh.clone(), ty("seqnums"), Kind::Controlled));
    m.sig.add_function(FunctionSymbol::new(
        "requests",
        vec![h.clone()],
        TypeRef::Seq(Box::new(h.clone())),
        Kind::Shared,
    ));
    m.sig.add_function(FunctionSymbol::new(
        "replies",
        vec![h.clone()],
        TypeRef::Seq(Box::new(ty("seqnums"))),
        Kind::Shared,
    ));
    m.sig.add_function(FunctionSymbol::new("waiting", hh.clone(), b.clone(), Kind::Controlled).local());
    if timeout {
        m.sig.add_function(FunctionSymbol::new("timeout", hh.clone(), ty("ticks"), Kind::Controlled).local());
    }
    m.sig.add_function(
        FunctionSymbol::new("routeFound", vec![h.clone()], b.clone(), Kind::Derived).defined_as(
            &["h"],
            DerivedBody::Formula(Formula::Exists(
                "r".into(),
                "seqnums".into(),
                Box::new(Formula::InSeq(Term::var("r"), app("replies", vec![Term::var("h")]))),
            )),
        ),
    );
    m.sig.add_function(FunctionSymbol::new("session", hh, b.clone(), Kind::Out));
    m.sig.add_function(FunctionSymbol::new("beacon", vec![h], b, Kind::Out));

    m.init.push(Rule::assign("dest", vec![], Term::atom("hosts", &hs[p.hosts - 1])));

    let me = Term::SelfRef;
    let dest = app("dest", vec![]);
    let sd = || vec![Term::SelfRef, app("dest", vec![])];
    let wish = holds("wishToInitiate", sd());
    let not_waiting = Formula::not(holds("waiting", sd()));
    let no_route = Formula::eq(app("routingTable", sd()), Term::undef());

    let rule1 = Rule::when(
        Formula::And(vec![
            wish.clone(),
            not_waiting.clone(),
            Formula::Or(vec![holds("neighb", sd()), Formula::not(no_route.clone())]),
        ]),
        Rule::block(vec![
            Rule::call("CommunicationSession", vec![dest.clone()]),
            Rule::assign("wishToInitiate", sd(), Term::bool(false)),
        ]),
    )
    .labeled("RULE 1");

    let mut broadcast = vec![
        Rule::call("BroadcastRREQ", vec![]),
        Rule::assign("waiting", sd(), Term::bool(true)),
    ];
    if timeout {
        broadcast.push(Rule::assign("timeout", sd(), Term::int(p.timeout_init)));
    }
    let rule2 = Rule::when(
        Formula::And(vec![
            wish,
            not_waiting,
            Formula::not(holds("neighb", sd())),
            no_route,
        ]),
        Rule::block(broadcast),
    )
    .labeled("RULE 2");

    let found = Rule::when(
        holds("routeFound", vec![me.clone()]),
        Rule::block(vec![
            Rule::choose(
                "r",
                "seqnums",
                Formula::InSeq(Term::var("r"), app("replies", vec![me.clone()])),
                Some(Term::var("r")),
                Rule::assign("routingTable", sd(), Term::var("r")),
            ),
            Rule::call("CommunicationSession", vec![dest.clone()]),
            Rule::assign("wishToInitiate", sd(), Term::bool(false)),
            Rule::assign("waiting", sd(), Term::bool(false)),
            Rule::assign("replies", vec![me.clone()], Term::List(vec![])),
        ]),
    );
    let mut wait_body = vec![found];
    if timeout {
        wait_body.push(Rule::assign(
            "timeout",
            sd(),
            Term::Builtin(Builtin::Sub, vec![app("timeout", sd()), Term::int(1)]),
        ));
    }
    let rule3 = Rule::when(holds("waiting", sd()), Rule::block(wait_body))
        .labeled(if timeout { "RULE 3'" } else { "RULE 3" });

    let mut units = vec![rule1, rule2, rule3];
    if timeout {
        units.push(
            Rule::when(
                Formula::And(vec![
                    holds("waiting", sd()),
                    Formula::eq(app("timeout", sd()), Term::int(0)),
                ]),
                Rule::block(vec![
                    Rule::assign("wishToInitiate", sd(), Term::bool(false)),
                    Rule::assign("waiting", sd(), Term::bool(false)),
                ]),
            )
            .labeled("RULE 4"),
        );
    }
    units.push(Rule::assign("beacon", vec![me.clone()], Term::bool(true)).labeled("HELLO"));
    m.sig.add_rule(RuleDef::new("Initiator", &[], Rule::block(units)));

    let n = Term::var("n");
    m.sig.add_rule(RuleDef::new(
        "BroadcastRREQ",
        &[],
        Rule::forall(
            "n",
            "hosts",
            Rule::when(
                holds("neighb", vec![me.clone(), n.clone()]),
                Rule::assign(
                    "requests",
                    vec![n.clone()],
                    Term::Builtin(Builtin::Append, vec![app("requests", vec![n]), me.clone()]),
                ),
            ),
        ),
    ));
    m.sig.add_rule(RuleDef::new(
        "CommunicationSession",
        &["d"],
        Rule::assign("session", vec![me, Term::var("d")], Term::bool(true)),
    ));

    m.agents.push(AgentBinding {
        set: AgentSet::Single(hs[0].clone()),
        rule: "Initiator".into(),
        args: vec![],
        span: Default::default(),
    });
    m.predicates.insert(
        "waiting".into(),
        PredicateDecl {
            name: "waiting".into(),
            var: "x".into(),
            domain: "hosts".into(),
            formula: holds("waiting", vec![Term::var("x"), dest]),
            span: Default::default(),
        },
    );
    if timeout {
        m.rankings.push(RankingDecl {
            counter: app("timeout", sd()),
            predicate: "waiting".into(),
            span: Default::default(),
        });
    }

    Ok((m, aodv_script(p)))
}

/// Step 0 sets up the links and the session request; on connected
/// topologies a reply reaches the initiator after a round trip.
pub fn aodv_script(p: &AodvParams) -> EnvironmentScript {
    let mut s = EnvironmentScript::new();
    for &(a, b) in &p.topology.links {
        for (x, y) in [(a, b), (b, a)] {
            s.push(
                0,
                crate::asm::Update::new(Location::new("neighb", vec![host(x), host(y)]), Value::Bool(true)),
            );
        }
    }
    s.push(
        0,
        crate::asm::Update::new(
            Location::new("wishToInitiate", vec![host(1), host(p.hosts)]),
            Value::Bool(true),
        ),
    );
    if let Some(d) = p.topology.distance(1, p.hosts, p.hosts) {
        if d > 1 {
            let seq = (d as i64).min(MAX_SEQNUM);
            s.push(
                2 * d * p.hop_delay,
                crate::asm::Update::new(
                    Location::new("replies", vec![host(1)]),
                    Value::Seq(vec![Value::Int(seq)]),
                ),
            );
        }
    }
    s
}
