use crate::asm::{
    DomainKind, Formula, FunctionSymbol, Kind, Rule, RuleDef, Term, TypeRef, Value,
};
use crate::lang::{AgentBinding, AgentSet, Model, PredicateDecl};

use super::ModelsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpVariant {
    Baseline,
    /// Adds a turn-granting scheduler and guards RULE 1 with `isMyTurn`.
    Bakery,
}

fn ty(d: &str) -> TypeRef {
    TypeRef::Domain(d.to_string())
}

fn app(f: &str, args: Vec<Term>) -> Term {
    Term::app(f, args)
}

fn fork_of(side: &str, who: Term) -> Term {
    app("owner", vec![app(side, vec![who])])
}

fn holds_both(who: Term) -> Formula {
    Formula::And(vec![
        Formula::eq(fork_of("rightFork", who.clone()), who.clone()),
        Formula::eq(fork_of("leftFork", who.clone()), who),
    ])
}

/// Philosophers `p1..pn` around a ring of forks `f1..fn`; `p_i` has `f_i` on
/// the right and `f_{i-1}` on the left.
pub fn build_dining_philosophers(n: usize, variant: DpVariant) -> Result<Model, ModelsError> {
    if n < 2 {
        return Err(ModelsError::TooFewPhilosophers(n));
    }
    let bakery = variant == DpVariant::Bakery;
    let mut m = Model::new(if bakery {
        "DiningPhilosophersBakery"
    } else {
        "DiningPhilosophers"
    });
    let ps: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
    let fs: Vec<String> = (1..=n).map(|i| format!("f{i}")).collect();
    m.sig.add_domain("philosophers", DomainKind::Atoms(ps.clone()));
    m.sig.add_domain("forks", DomainKind::Atoms(fs.clone()));
    if bakery {
        m.sig.add_domain("schedulers", DomainKind::Atoms(vec!["scheduler".into()]));
    }

    let phil = ty("philosophers");
    m.sig.add_function(FunctionSymbol::new("rightFork", vec![phil.clone()], ty("forks"), Kind::Static));
    m.sig.add_function(FunctionSymbol::new("leftFork", vec![phil.clone()], ty("forks"), Kind::Static));
    if bakery {
        m.sig.add_function(FunctionSymbol::new("next", vec![phil.clone()], phil.clone(), Kind::Static));
    }
    m.sig.add_function(FunctionSymbol::new("owner", vec![ty("forks")], phil.clone(), Kind::Shared));
    if bakery {
        m.sig.add_function(
            FunctionSymbol::new("isMyTurn", vec![phil.clone()], TypeRef::Boolean, Kind::Monitored)
                .written_by("schedulers"),
        );
        m.sig.add_function(FunctionSymbol::new("current", vec![], phil.clone(), Kind::Controlled));
    }

    let p = |i: usize| Term::atom("philosophers", &ps[i]);
    let f = |i: usize| Term::atom("forks", &fs[i]);
    for i in 0..n {
        m.init.push(Rule::assign("rightFork", vec![p(i)], f(i)));
        m.init.push(Rule::assign("leftFork", vec![p(i)], f((i + n - 1) % n)));
        if bakery {
            m.init.push(Rule::assign("next", vec![p(i)], p((i + 1) % n)));
        }
    }
    m.init.push(Rule::forall(
        "f",
        "forks",
        Rule::assign("owner", vec![Term::var("f")], Term::undef()),
    ));
    if bakery {
        m.init.push(Rule::assign("isMyTurn", vec![p(0)], Term::bool(true)));
        m.init.push(Rule::assign("current", vec![], p(0)));
    }

    let me = Term::SelfRef;
    let mut take_guard = vec![
        Formula::eq(fork_of("rightFork", me.clone()), Term::undef()),
        Formula::eq(fork_of("leftFork", me.clone()), Term::undef()),
    ];
    if bakery {
        take_guard.insert(0, Formula::holds(app("isMyTurn", vec![me.clone()])));
    }
    let take = Rule::when(
        Formula::And(take_guard),
        Rule::block(vec![
            Rule::assign("owner", vec![app("rightFork", vec![me.clone()])], me.clone()),
            Rule::assign("owner", vec![app("leftFork", vec![me.clone()])], me.clone()),
        ]),
    )
    .labeled(if bakery { "RULE 1'" } else { "RULE 1" });
    let release = Rule::when(
        holds_both(me.clone()),
        Rule::block(vec![
            Rule::call("Eat", vec![me.clone()]),
            Rule::assign("owner", vec![app("rightFork", vec![me.clone()])], Term::undef()),
            Rule::assign("owner", vec![app("leftFork", vec![me.clone()])], Term::undef()),
        ]),
    )
    .labeled("RULE 2");
    m.sig
        .add_rule(RuleDef::new("PhilosopherProgram", &["p"], Rule::block(vec![take, release])));
    m.sig.add_rule(RuleDef::new("Eat", &["p"], Rule::skip()));
    if bakery {
        let cur = app("current", vec![]);
        let advance = Rule::when(
            holds_both(cur.clone()),
            Rule::block(vec![
                Rule::assign("isMyTurn", vec![cur.clone()], Term::bool(false)),
                Rule::assign("isMyTurn", vec![app("next", vec![cur.clone()])], Term::bool(true)),
                Rule::assign("current", vec![], app("next", vec![cur])),
            ]),
        )
        .labeled("ADVANCE");
        m.sig.add_rule(RuleDef::new("Scheduler", &[], Rule::block(vec![advance])));
    }

    m.agents.push(AgentBinding {
        set: AgentSet::Each {
            var: "p".into(),
            domain: "philosophers".into(),
        },
        rule: "PhilosopherProgram".into(),
        args: vec![Term::var("p")],
        span: Default::default(),
    });
    if bakery {
        m.agents.push(AgentBinding {
            set: AgentSet::Single("scheduler".into()),
            rule: "Scheduler".into(),
            args: vec![],
            span: Default::default(),
        });
    }

    let pv = Term::var("p");
    let thinking = Formula::not(Formula::Or(vec![
        Formula::eq(fork_of("rightFork", pv.clone()), pv.clone()),
        Formula::eq(fork_of("leftFork", pv.clone()), pv.clone()),
    ]));
    for (name, formula) in [("thinking", thinking), ("eating", holds_both(pv))] {
        m.predicates.insert(
            name.into(),
            PredicateDecl {
                name: name.into(),
                var: "p".into(),
                domain: "philosophers".into(),
                formula,
                span: Default::default(),
            },
        );
    }
    Ok(m)
}

/// A schedule of `steps` entries that keeps `p1` from ever eating: `p1`
/// moves on every odd step while its two neighbours `p2` and `p_n` take
/// turns so that one of them always holds a fork `p1` needs.
pub fn adversarial_schedule(n: usize, steps: usize) -> Vec<String> {
    let last = format!("p{n}");
    // Each neighbour takes and releases on consecutive even slots; the other
    // grabs in between so p1 never sees both forks free.
    let cycle = ["p2", last.as_str(), "p2", "p2", last.as_str(), last.as_str()];
    let mut out = Vec::with_capacity(steps);
    let mut k = 0;
    for step in 0..steps {
        if step % 2 == 1 {
            out.push("p1".to_string());
        } else {
            let who = if k < 2 { cycle[k] } else { cycle[2 + (k - 2) % 4] };
            out.push(who.to_string());
            k += 1;
        }
    }
    out
}

/// The agent value of philosopher `i` (1-based).
pub fn philosopher(i: usize) -> Value {
    Value::atom("philosophers", &format!("p{i}"))
}
