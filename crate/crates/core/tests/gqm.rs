use std::collections::BTreeSet;

use serde_json::json;
use watchtower_core::builtin::{self, techniques as keys, types as dt, views};
use watchtower_core::gqm::{
    analyze_deviations, analyze_indicator, compose_catena, instantiated_components, package_results, parse_gqm_plan,
    Detection, DeviationAnalysis, MetricCoverage, PlanError, ProjectContext, ReferenceEvent,
};
use watchtower_core::ids::EntryId;
use watchtower_core::model::{
    validate_catena, Catena, ComponentBody, ComponentKind, ComponentRegistry, FunctionSpec, OutputPortSpec, PortSpec,
    RenderKind,
};
use watchtower_core::store::{FileRepository, Payload, PayloadStore};
use watchtower_core::techniques::types::Status;
use watchtower_core::testkit::{effort_control, synthetic, ts};

fn ctx() -> ProjectContext {
    ProjectContext {
        project: effort_control::PROJECT_ID.into(),
        catena: "candidate".into(),
        roles: vec!["developer".into()],
    }
}

/// Spec-id sequences of every entry → function* → view path whose first
/// entry has `source_type`, ending in the render kind of the view.
fn paths(c: &Catena, registry: &ComponentRegistry, source_type: &str) -> BTreeSet<(Vec<String>, RenderKind)> {
    fn walk(
        c: &Catena,
        registry: &ComponentRegistry,
        entry: &EntryId,
        trail: &mut Vec<String>,
        out: &mut BTreeSet<(Vec<String>, RenderKind)>,
    ) {
        for v in &c.views {
            if v.bindings.values().any(|b| b.entries().contains(entry)) {
                out.insert((trail.clone(), registry.views[&v.spec].render));
            }
        }
        for f in &c.functions {
            if f.input_entries().any(|e| e == entry) {
                trail.push(f.spec.to_string());
                for o in f.outputs.values() {
                    walk(c, registry, o, trail, out);
                }
                trail.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    for e in c.data_entries.iter().filter(|e| e.spec.as_str() == source_type) {
        walk(c, registry, &e.id, &mut Vec::new(), &mut out);
    }
    out
}

#[test]
fn parse_example_plan() {
    let plan = parse_gqm_plan(effort_control::GQM_PLAN).unwrap();
    assert_eq!(plan.goals.len(), 1);
    assert_eq!(plan.questions.len(), 1);
    assert!(!plan.metrics.is_empty());
    assert_eq!(plan.goals[0].viewpoint, "project-manager");
}

#[test]
fn parse_errors() {
    let bad = effort_control::GQM_PLAN.replace(r#""question": "Q1""#, r#""question": "Q9""#);
    let err = parse_gqm_plan(&bad).unwrap_err();
    let PlanError::References(issues) = &err else {
        panic!("{err}")
    };
    assert_eq!(issues[0].path, "metrics[0].question");
    assert!(err.to_string().contains("Q9"));
    let empty = parse_gqm_plan("{}").unwrap();
    assert!(empty.goals.is_empty());
}

#[test]
fn effort_control_composition() {
    let registry = builtin::registry();
    let plan = parse_gqm_plan(effort_control::GQM_PLAN).unwrap();
    let r = compose_catena(&plan, &registry, &ctx());
    let report = validate_catena(&r.catena, &registry);
    assert!(report.is_ok(), "{:?}", report.errors().collect::<Vec<_>>());
    assert!(r.coverage["M1"].is_matched());
    assert_eq!(r.goals["G1"], 1.0);
    let found = paths(&r.catena, &registry, dt::EFFORT_TABLE);
    assert!(
        found.contains(&(
            vec![keys::AGGREGATE_EFFORT.to_owned(), keys::TOLERANCE_CHECK.to_owned()],
            RenderKind::BarChartDrilldown
        )),
        "{found:?}"
    );
    let view = r.catena.view("M1.view").unwrap();
    assert_eq!(view.visible_to, BTreeSet::from(["project-manager".to_owned()]));
    assert!(r.catena.data_entries.iter().filter(|e| e.is_form_managed()).all(|e| {
        r.catena
            .web_forms
            .iter()
            .any(|f| f.bindings.values().any(|b| *b == e.id))
    }));
    assert_eq!(compose_catena(&plan, &registry, &ctx()), r);
}

#[test]
fn missing_data_type_is_unmatched() {
    let registry = builtin::registry();
    let plan = parse_gqm_plan(
        &effort_control::GQM_PLAN.replace(r#""data_type": "effort-table""#, r#""data_type": "defect-list""#),
    )
    .unwrap();
    let r = compose_catena(&plan, &registry, &ctx());
    assert_eq!(
        r.coverage["M1"],
        MetricCoverage::Unmatched {
            missing: vec![ComponentKind::DataType]
        }
    );
    assert_eq!(r.goals["G1"], 0.0);
    assert!(r.catena.functions.is_empty());
}

fn rival(id: &str) -> ComponentBody {
    ComponentBody::Function(FunctionSpec {
        id: id.into(),
        name: id.into(),
        description: String::new(),
        inputs: vec![PortSpec::one("effort", dt::EFFORT_TABLE)],
        outputs: vec![OutputPortSpec {
            name: "series".into(),
            data_type: dt::TIME_SERIES.into(),
        }],
        params: vec![],
        implementation: keys::EFFORT_TO_SERIES.into(),
        tags: vec!["rivalry".into()],
    })
}

#[test]
fn tie_break_by_reuse_then_id() {
    let mut registry = builtin::registry();
    registry.insert(rival("x.beta"));
    registry.insert(rival("x.alpha"));
    let plan = parse_gqm_plan(
        &effort_control::GQM_PLAN
            .replace(r#"["effort", "tolerance"]"#, r#"["rivalry"]"#)
            .replace(r#""bar-chart-drilldown""#, r#""line-chart""#),
    )
    .unwrap();
    let chosen = |registry: &ComponentRegistry| {
        compose_catena(&plan, registry, &ctx()).catena.functions[0]
            .spec
            .to_string()
    };
    assert_eq!(chosen(&registry), "x.alpha");
    registry.reuse.insert("x.beta".into(), 2);
    assert_eq!(chosen(&registry), "x.beta");
    let r = compose_catena(&plan, &registry, &ctx());
    assert_eq!(
        r.coverage["M1"],
        MetricCoverage::Matched {
            components: vec![dt::EFFORT_TABLE.into(), "x.beta".into(), views::SERIES_LINE.into()]
        }
    );
}

fn indicator_payload(version: u64, at: i64, status: &str) -> Payload {
    Payload {
        data_type: dt::INDICATOR_TABLE.into(),
        version,
        produced_at: ts(at),
        body: json!({"rows": [{"activity": "A", "status": status}]}),
    }
}

#[test]
fn deviation_classification() {
    let e: EntryId = "ind".into();
    let event = |at| {
        vec![ReferenceEvent {
            description: "overrun".into(),
            at: ts(at),
        }]
    };
    let green: Vec<Payload> = (1..=4).map(|v| indicator_payload(v, v as i64, "green")).collect();
    assert_eq!(
        analyze_indicator(&e, &green, &event(3)).events[0].detection,
        Detection::NotDetected
    );

    let mut h: Vec<Payload> = (1..=5).map(|v| indicator_payload(v, v as i64, "green")).collect();
    h.push(indicator_payload(6, 6, "red"));
    h.push(indicator_payload(7, 7, "green"));
    let a = analyze_indicator(&e, &h, &event(6));
    assert_eq!(a.events[0].detection, Detection::Detected);
    assert_eq!(a.first_non_green, Some(ts(6)));
    assert_eq!(a.final_status, Some(Status::Green));

    let mut late: Vec<Payload> = (1..=7).map(|v| indicator_payload(v, v as i64, "no-baseline")).collect();
    late.push(indicator_payload(8, 8, "red"));
    assert_eq!(
        analyze_indicator(&e, &late, &event(6)).events[0].detection,
        Detection::DetectedLate
    );

    // Appending later versions never moves the first non-green earlier.
    let mut longer = h.clone();
    longer.push(indicator_payload(8, 8, "yellow"));
    assert_eq!(analyze_indicator(&e, &longer, &event(6)).first_non_green, Some(ts(6)));
}

#[test]
fn synthetic_overrun_detected_in_week_six() {
    let (_, store) = synthetic::run().unwrap();
    let indicator: EntryId = effort_control::INDICATOR_ENTRY.into();
    assert_eq!(store.latest_version(&indicator), u64::from(synthetic::WEEKS));
    let a = analyze_deviations(&store, &[indicator], &[synthetic::overrun_event()]);
    let first = a.indicators[0].first_non_green.unwrap();
    assert_eq!(synthetic::week_of(first), synthetic::OVERRUN_WEEK);
    assert_eq!(a.indicators[0].events[0].detection, Detection::Detected);
    assert_eq!(a.indicators[0].final_status, Some(Status::Red));
}

#[test]
fn effort_control_package() {
    let dir = tempfile::tempdir().unwrap();
    let mut repo = FileRepository::open(dir.path()).unwrap();
    repo.seed_builtin().unwrap();
    repo.put_catena(&effort_control::catena()).unwrap();
    let ids: BTreeSet<String> = instantiated_components(&effort_control::catena())
        .keys()
        .map(ToString::to_string)
        .collect();
    assert_eq!(
        ids,
        ["agg.effort", "check.tolerance", "form.plan-import", "view.effort-bars"]
            .into_iter()
            .map(String::from)
            .collect()
    );
    let (id, pkg) = package_results(
        &mut repo,
        &DeviationAnalysis::default(),
        &effort_control::CATENA_ID.into(),
        &effort_control::PROJECT_ID.into(),
        "",
    )
    .unwrap();
    assert_eq!(id, "proj-1/1");
    assert_eq!(pkg.reused.len(), 4);
    assert!(pkg.deviations.is_empty());

    let (_, store) = synthetic::run().unwrap();
    let a = analyze_deviations(&store, &[effort_control::INDICATOR_ENTRY.into()], &[]);
    let (_, pkg) = package_results(
        &mut repo,
        &a,
        &effort_control::CATENA_ID.into(),
        &effort_control::PROJECT_ID.into(),
        "late",
    )
    .unwrap();
    assert_eq!(pkg.deviations.len(), 1);
    assert_eq!(repo.reuse_counts()["agg.effort"], 2);

    let err = package_results(&mut repo, &a, &"nope".into(), &effort_control::PROJECT_ID.into(), "");
    assert!(err.is_err());
}
