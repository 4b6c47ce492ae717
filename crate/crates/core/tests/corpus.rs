use asmstarve_core::exec::EnvironmentScript;
use asmstarve_core::lang::{has_errors, parse_model, pretty_print, validate_model};
use asmstarve_core::models::{corpus, corpus_file};

#[test]
fn builders_match_bundled_files() {
    for entry in corpus() {
        let parsed = entry.parse();
        let (built, env) = entry.build().unwrap();
        assert_eq!(parsed, built, "{}", entry.name);
        if let Some(env_file) = &entry.env {
            let text = corpus_file(env_file).unwrap();
            let bundled = EnvironmentScript::from_json(&built.sig, text).unwrap();
            assert_eq!(bundled, env, "{}", entry.name);
        }
    }
}

#[test]
fn bundled_models_validate_clean() {
    for entry in corpus() {
        let diags = validate_model(&entry.parse());
        assert!(diags.is_empty(), "{}: {:?}", entry.name, diags);
    }
}

#[test]
fn bundled_models_round_trip() {
    for entry in corpus() {
        let m = entry.parse();
        let text = pretty_print(&m);
        let again = parse_model(&text).unwrap();
        assert_eq!(m, again, "{}", entry.name);
        assert_eq!(pretty_print(&again), text);
        assert!(!has_errors(&validate_model(&again)));
    }
}

#[test]
fn dp_model_shape() {
    let m = corpus()[0].parse();
    assert_eq!(m.agent_instances().unwrap().len(), 5);
    let ids: Vec<_> = m.program_units("PhilosopherProgram").into_iter().map(|u| u.id).collect();
    assert_eq!(ids, ["RULE 1", "RULE 2"]);
    assert_eq!(m.predicates.keys().collect::<Vec<_>>(), ["thinking", "eating"]);
}
