use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use watchtower_core::builtin::{self, techniques as keys};
use watchtower_core::model::{
    bind_function_instance, bindings, codes, params, parse_catena, serialize_catena, validate_catena, BindError,
    Binding, Catena, DataEntry, DocumentError, EntrySource, ParamError,
};
use watchtower_core::testkit::{self, effort_control};

#[test]
fn effort_control_catena_is_valid() {
    let c = effort_control::catena();
    let sources = c
        .data_entries
        .iter()
        .filter(|e| !matches!(e.source, EntrySource::Derived { .. }))
        .count();
    assert_eq!(sources, 3);
    assert_eq!(c.web_forms.len(), 1);
    assert_eq!(c.functions.len(), 2);
    assert_eq!(c.views.len(), 1);
    let report = validate_catena(&c, &builtin::registry());
    assert!(report.is_ok(), "{:?}", report.diagnostics);
}

#[test]
fn type_mismatch_is_reported() {
    let mut c = effort_control::catena();
    c.data_entries.push(DataEntry::form("series", "time-series"));
    c.functions[0]
        .bindings
        .insert("effort".into(), Binding::One("series".into()));
    let report = validate_catena(&c, &builtin::registry());
    assert!(!report.is_ok());
    assert!(report.has_code(codes::TYPE_MISMATCH));
    assert!(report.errors().any(|d| d.message.contains("type mismatch")));
}

#[test]
fn two_cycle_is_reported() {
    let runtime = testkit::mix_runtime();
    let mut c = Catena::new("c", "p");
    c.data_entries.push(DataEntry::form("src", "time-series"));
    for (id, other) in [("f1", "f2"), ("f2", "f1")] {
        c.functions.push(watchtower_core::model::FunctionInstance {
            id: id.into(),
            spec: testkit::MIX.into(),
            bindings: [(
                "in".to_owned(),
                Binding::Many(vec!["src".into(), format!("{other}.out").into()]),
            )]
            .into(),
            params: Default::default(),
            outputs: [("out".to_owned(), format!("{id}.out").into())].into(),
        });
        c.data_entries
            .push(DataEntry::derived(&format!("{id}.out"), "time-series", id, "out"));
    }
    let report = validate_catena(&c, &runtime.registry);
    assert!(report.has_code(codes::CYCLE), "{:?}", report.diagnostics);
    assert!(report.errors().any(|d| d.message.contains("cycle")));
}

#[test]
fn bind_tolerance_check() {
    let registry = builtin::registry();
    let spec = &registry.functions[keys::TOLERANCE_CHECK];
    let mut c = Catena::new("c", "p");
    c.data_entries.push(DataEntry::form("actual", "control-metric"));
    c.data_entries.push(DataEntry::form("baseline", "control-metric"));

    let bound = bind_function_instance(
        &c,
        "trc",
        spec,
        bindings([("actual", "actual"), ("baseline", "baseline")]),
        params([("yellow", json!(0.1))]),
    )
    .unwrap();
    assert_eq!(bound.outputs.len(), 1);
    assert_eq!(bound.outputs[0].spec, "indicator-table");
    assert_eq!(bound.outputs[0].version, 0);

    let unbound = bind_function_instance(&c, "trc", spec, bindings([("actual", "actual")]), params([]));
    assert_eq!(unbound.unwrap_err(), BindError::UnboundPort("baseline".into()));
    assert!(BindError::UnboundPort("baseline".into())
        .to_string()
        .contains("unbound port"));

    let negative = bind_function_instance(
        &c,
        "trc",
        spec,
        bindings([("actual", "actual"), ("baseline", "baseline")]),
        params([("yellow", json!(-0.1))]),
    )
    .unwrap_err();
    assert!(matches!(negative, BindError::Param(ParamError::Constraint { .. })));
    assert!(negative.to_string().contains("constraint violation"));
}

#[test]
fn arity_violation_rejected() {
    let registry = builtin::registry();
    let spec = &registry.functions[keys::AGGREGATE_EFFORT];
    let mut c = Catena::new("c", "p");
    c.data_entries.push(DataEntry::form("e1", "effort-table"));
    c.data_entries.push(DataEntry::form("h", "activity-hierarchy"));
    let mut b = bindings([("hierarchy", "h")]);
    b.insert("effort".into(), Binding::Many(vec!["e1".into(), "e1".into()]));
    let err = bind_function_instance(&c, "agg", spec, b, params([])).unwrap_err();
    assert!(matches!(err, BindError::Arity { .. }));
}

#[test]
fn effort_control_round_trip() {
    let c = effort_control::catena();
    let text = serialize_catena(&c);
    assert_eq!(parse_catena(&text, &builtin::registry()).unwrap(), c);
}

#[test]
fn missing_section_reports_path() {
    let text = r#"{"meta": {"id": "c", "project": "p"}, "functions": []}"#;
    let err = parse_catena(text, &builtin::registry()).unwrap_err();
    match &err {
        DocumentError::Malformed { message, .. } => assert!(message.contains("data_entries"), "{message}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn unknown_spec_is_named() {
    let mut c = effort_control::catena();
    c.functions[1].spec = "evax".into();
    let err = parse_catena(&serialize_catena(&c), &builtin::registry()).unwrap_err();
    assert!(matches!(&err, DocumentError::UnknownSpecs(ids) if ids == &["evax".to_owned()]));
    assert!(err.to_string().contains("evax"));
}

#[test]
fn validation_is_pure() {
    let runtime = testkit::mix_runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let c = testkit::random_dag_catena(&mut rng, 12, 3);
        let bad = testkit::add_back_edge(&mut rng, &c);
        for cat in [&c, &bad] {
            let a = serde_json::to_string(&validate_catena(cat, &runtime.registry)).unwrap();
            let b = serde_json::to_string(&validate_catena(cat, &runtime.registry)).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn diagnostics_sorted_by_subject_then_code() {
    let mut c = effort_control::catena();
    c.functions[0].spec = "nope".into();
    c.views[0].spec = "nope-view".into();
    c.data_entries.push(DataEntry::form("bad id!", "nope-type"));
    let report = validate_catena(&c, &builtin::registry());
    let keys: Vec<(&str, &str)> = report
        .diagnostics
        .iter()
        .map(|d| (d.subject.as_str(), d.code.as_str()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(report.diagnostics.len() >= 3);
}

#[test]
fn accepted_bindings_match_port_types() {
    let runtime = testkit::mix_runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let c = testkit::random_dag_catena(&mut rng, 10, 2);
        assert!(validate_catena(&c, &runtime.registry).is_ok());
        for f in &c.functions {
            let spec = &runtime.registry.functions[&f.spec];
            for (port, binding) in &f.bindings {
                let want = &spec.input(port).unwrap().data_type;
                for e in binding.entries() {
                    assert_eq!(&c.entry(e.as_str()).unwrap().spec, want);
                }
            }
        }
    }
}
