use asmstarve_core::lang::{parse_model, pretty_print, validate_model, Severity};
use asmstarve_core::models::{build_aodv, build_dining_philosophers, AodvParams, DpVariant, Topology};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Emits random but well-scoped model text over a fixed signature.
struct Gen {
    rng: ChaCha8Rng,
    bound: Vec<String>,
    fresh: usize,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs[self.rng.random_range(0..xs.len())]
    }

    fn var(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    fn term(&mut self, depth: usize) -> String {
        let leaf = depth == 0 || self.rng.random_bool(0.4);
        if leaf {
            if !self.bound.is_empty() && self.rng.random_bool(0.4) {
                let i = self.rng.random_range(0..self.bound.len());
                return self.bound[i].clone();
            }
            return self.pick(&["a", "b", "c", "undef", "self", "n", "-2", "3", "[]", "k", "true"]).to_string();
        }
        match self.rng.random_range(0..6) {
            0 => format!("g({})", self.term(depth - 1)),
            1 => format!("h({}, {})", self.term(depth - 1), self.term(depth - 1)),
            2 => format!("n + {}", self.rng.random_range(0..3)),
            3 => "len(s)".to_string(),
            4 => format!("append(s, {})", self.term(depth - 1)),
            _ => format!("[{}, {}]", self.term(depth - 1), self.term(depth - 1)),
        }
    }

    fn formula(&mut self, depth: usize) -> String {
        if depth == 0 {
            return match self.rng.random_range(0..4) {
                0 => "flag".to_string(),
                1 => format!("{} = {}", self.term(1), self.term(1)),
                2 => format!("{} in ds", self.term(1)),
                _ => format!("{} != {}", self.term(1), self.term(1)),
            };
        }
        match self.rng.random_range(0..6) {
            0 => format!("not {}", self.formula(depth - 1)),
            1 => format!("({} and {})", self.formula(depth - 1), self.formula(depth - 1)),
            2 => format!("({} or {})", self.formula(depth - 1), self.formula(depth - 1)),
            3 => {
                let v = self.var();
                let q = self.pick(&["exists", "forall"]);
                self.bound.push(v.clone());
                let body = self.formula(depth - 1);
                self.bound.pop();
                format!("({q} {v} in ds : {body})")
            }
            4 => format!("{} in s", self.term(1)),
            _ => self.formula(0),
        }
    }

    fn rule(&mut self, depth: usize) -> String {
        if depth == 0 {
            return match self.rng.random_range(0..4) {
                0 => "skip".to_string(),
                1 => format!("g({}) := {}", self.term(1), self.term(2)),
                2 => format!("Sub({})", self.term(1)),
                _ => format!("k := {}", self.term(1)),
            };
        }
        match self.rng.random_range(0..5) {
            0 => format!("if {} then {}", self.formula(2), self.rule(depth - 1)),
            1 => format!("{{\n{}\n{}\n}}", self.rule(depth - 1), self.rule(depth - 1)),
            2 => {
                let v = self.var();
                self.bound.push(v.clone());
                let body = self.rule(depth - 1);
                self.bound.pop();
                format!("forall {v} in ds do {body}")
            }
            3 => {
                let v = self.var();
                self.bound.push(v.clone());
                let with = self.formula(1);
                let body = self.rule(depth - 1);
                self.bound.pop();
                let rank = if self.rng.random_bool(0.5) { " ranked by n" } else { "" };
                format!("choose {v} in ds with {with}{rank} do {body}")
            }
            _ => self.rule(0),
        }
    }

    fn model(seed: u64) -> String {
        let mut g = Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bound: Vec::new(),
            fresh: 0,
        };
        let mut s = String::from(
            "dasm Gen\ndomain ds = {a, b, c}\ndomain nums = -2..3\n\
             function flag : boolean shared\nfunction n : nums controlled\n\
             function k : ds controlled local\nfunction g : ds -> ds controlled\n\
             function h : ds x ds -> ds monitored\nfunction s : seq ds shared\n\
             function d : ds -> boolean derived (x) := g(x) = a\n\
             init {\n  n := 0\n}\n",
        );
        let units = g.rng.random_range(1..4);
        s.push_str("rule Main = {\n");
        for i in 0..units {
            let body = g.rule(3);
            s.push_str(&format!("\"U{i}\": {body}\n"));
        }
        s.push_str("}\n");
        s.push_str("rule Sub(p) = g(p) := p\n");
        s.push_str("agent a runs Main()\n");
        let phi = g.formula(2);
        s.push_str(&format!("predicate p for x in ds := {phi}\n"));
        s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let src = Gen::model(seed);
        let m = parse_model(&src).unwrap_or_else(|d| panic!("{src}\n{d:?}"));
        let printed = pretty_print(&m);
        let again = parse_model(&printed).unwrap_or_else(|d| panic!("{printed}\n{d:?}"));
        prop_assert_eq!(&m, &again);
        prop_assert_eq!(pretty_print(&again), printed);
    }

    #[test]
    fn validation_is_deterministic(seed in any::<u64>()) {
        let m = parse_model(&Gen::model(seed)).unwrap();
        prop_assert_eq!(validate_model(&m), validate_model(&m));
    }
}

#[test]
fn builders_round_trip_at_several_sizes() {
    let mut models = Vec::new();
    for n in 2..=7 {
        models.push(build_dining_philosophers(n, DpVariant::Baseline).unwrap());
        models.push(build_dining_philosophers(n, DpVariant::Bakery).unwrap());
    }
    for hosts in 2..=5 {
        models.push(build_aodv(&AodvParams::new(hosts, Topology::line(hosts))).unwrap().0);
        models.push(build_aodv(&AodvParams::new(hosts, Topology::partitioned()).with_timeout(3)).unwrap().0);
    }
    for m in models {
        let text = pretty_print(&m);
        assert_eq!(parse_model(&text).unwrap(), m, "{}", m.name);
        assert!(validate_model(&m).iter().all(|d| d.severity != Severity::Error), "{}", m.name);
    }
}

#[test]
fn monitored_write_is_rejected() {
    let src = "dasm Bad\ndomain ags = {a}\nfunction m : boolean monitored\nrule P = m := true\nagent a runs P()\n";
    let m = parse_model(src).unwrap();
    let diags = validate_model(&m);
    assert!(diags.iter().any(|d| d.severity == Severity::Error && d.message.contains("monitored")));
}

#[test]
fn parse_errors_carry_positions() {
    let err = parse_model("dasm X\ndomain d = {a\n").unwrap_err();
    assert!(!err.is_empty());
    assert!(err[0].line >= 2);
}
