use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use watchtower_core::builtin::parsers;
use watchtower_core::collection::parse_document;
use watchtower_core::engine::{
    build_dependency_graph, execution_order, InstanceStatus, Node, Runtime, ViewCache, ViewStatus,
};
use watchtower_core::ids::{EntryId, InstanceId};
use watchtower_core::model::{Binding, Catena, DataEntry, RenderKind, ViewInstance};
use watchtower_core::store::{MemoryStore, PayloadStore};
use watchtower_core::testkit::{self, effort_control, ts};

fn loaded_effort_control() -> (Catena, MemoryStore) {
    let c = effort_control::catena();
    let mut store = MemoryStore::new();
    let plan = parse_document(parsers::PLAN_CSV, effort_control::PLAN_CSV).unwrap();
    store
        .put_payload(
            &effort_control::PLAN_ENTRY.into(),
            &"activity-hierarchy".into(),
            ts(0),
            plan["activity-hierarchy"].clone(),
        )
        .unwrap();
    store
        .put_payload(
            &effort_control::BASELINE_ENTRY.into(),
            &"control-metric".into(),
            ts(0),
            plan["control-metric"].clone(),
        )
        .unwrap();
    let effort = parse_document(parsers::EFFORT_CSV, effort_control::EFFORT_CSV).unwrap();
    store
        .put_payload(
            &effort_control::EFFORT_ENTRY.into(),
            &"effort-table".into(),
            ts(0),
            effort["effort-table"].clone(),
        )
        .unwrap();
    (c, store)
}

fn entry(id: &str) -> Node {
    Node::Entry(id.into())
}

fn func(id: &str) -> Node {
    Node::Function(id.into())
}

#[test]
fn effort_control_graph_edges() {
    let g = build_dependency_graph(&effort_control::catena());
    let edges: BTreeSet<(Node, Node)> = g.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect();
    let want: BTreeSet<(Node, Node)> = [
        (entry("effort"), func("agg")),
        (entry("plan"), func("agg")),
        (func("agg"), entry("agg.actual")),
        (entry("agg.actual"), func("trc")),
        (entry("baseline"), func("trc")),
        (func("trc"), entry("trc.indicators")),
    ]
    .into_iter()
    .collect();
    assert_eq!(edges, want);
}

#[test]
fn graph_without_functions_has_only_entries() {
    let mut c = Catena::new("c", "p");
    c.data_entries.push(DataEntry::form("a", "time-series"));
    c.data_entries.push(DataEntry::form("b", "time-series"));
    let g = build_dependency_graph(&c);
    assert!(g.edges.is_empty());
    assert_eq!(g.nodes, BTreeSet::from([entry("a"), entry("b")]));
}

#[test]
fn edge_count_matches_binding_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n = rng.gen_range(0..=30);
        let c = testkit::random_dag_catena(&mut rng, n, 3);
        let mut expected = 0;
        for f in &c.functions {
            for b in f.bindings.values() {
                expected += b.entries().len();
            }
            expected += f.outputs.len();
        }
        assert_eq!(build_dependency_graph(&c).edge_count(), expected);
    }
}

#[test]
fn effort_control_order() {
    let order = execution_order(&build_dependency_graph(&effort_control::catena())).unwrap();
    assert_eq!(order, vec![InstanceId::from("agg"), InstanceId::from("trc")]);
}

#[test]
fn independent_instances_in_id_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut c = testkit::random_dag_catena(&mut rng, 0, 1);
    for id in ["b", "a"] {
        c.functions.push(watchtower_core::model::FunctionInstance {
            id: id.into(),
            spec: testkit::MIX.into(),
            bindings: [("in".to_owned(), Binding::Many(vec!["src.00".into()]))].into(),
            params: Default::default(),
            outputs: [("out".to_owned(), format!("{id}.out").into())].into(),
        });
    }
    let order = execution_order(&build_dependency_graph(&c)).unwrap();
    assert_eq!(order, vec![InstanceId::from("a"), InstanceId::from("b")]);
}

/// Exhaustive oracle: every producer precedes every consumer of its output.
fn respects_every_edge(c: &Catena, order: &[InstanceId]) -> bool {
    let pos: BTreeMap<&InstanceId, usize> = order.iter().enumerate().map(|(i, f)| (f, i)).collect();
    for consumer in &c.functions {
        for producer in &c.functions {
            let feeds = producer
                .outputs
                .values()
                .any(|o| consumer.input_entries().any(|e| e == o));
            if feeds && pos[&producer.id] >= pos[&consumer.id] {
                return false;
            }
        }
    }
    order.len() == c.functions.len()
}

#[test]
fn random_orders_respect_edges() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let c = testkit::random_dag_catena(&mut rng, 30, 4);
        let order = execution_order(&build_dependency_graph(&c)).unwrap();
        assert!(respects_every_edge(&c, &order));
    }
}

#[test]
fn effort_control_executes() {
    let (c, mut store) = loaded_effort_control();
    let rt = Runtime::builtin();
    let r = rt.execute_catena(&c, &mut store, ts(10)).unwrap();
    assert_eq!(r.executed, vec![InstanceId::from("agg"), InstanceId::from("trc")]);
    assert!(r.all_ok(), "{:?}", r.statuses);
    assert_eq!(store.latest_version(&effort_control::INDICATOR_ENTRY.into()), 1);
    assert_eq!(r.written[&EntryId::from(effort_control::INDICATOR_ENTRY)], 1);
    assert_eq!(r.stale_views, BTreeSet::from([InstanceId::from(effort_control::VIEW)]));
}

#[test]
fn missing_effort_skips_both() {
    let c = effort_control::catena();
    let (_, full) = loaded_effort_control();
    let mut store = MemoryStore::new();
    for e in [effort_control::PLAN_ENTRY, effort_control::BASELINE_ENTRY] {
        let p = full.latest(&e.into()).unwrap();
        store
            .put_payload(&e.into(), &p.data_type, p.produced_at, p.body)
            .unwrap();
    }
    let r = Runtime::builtin().execute_catena(&c, &mut store, ts(10)).unwrap();
    assert_eq!(r.status("agg"), Some(&InstanceStatus::SkippedMissingInput));
    assert_eq!(r.status("trc"), Some(&InstanceStatus::SkippedMissingInput));
    assert!(r.written.is_empty());
}

#[test]
fn poisoned_baseline_fails_only_trc() {
    let (c, mut store) = loaded_effort_control();
    store
        .put_payload(
            &effort_control::BASELINE_ENTRY.into(),
            &"control-metric".into(),
            ts(1),
            json!({"entries": "oops"}),
        )
        .unwrap();
    let r = Runtime::builtin().execute_catena(&c, &mut store, ts(10)).unwrap();
    assert_eq!(r.status("agg"), Some(&InstanceStatus::Ok));
    assert!(matches!(r.status("trc"), Some(InstanceStatus::Failed { .. })));
    assert_eq!(store.latest_version(&effort_control::INDICATOR_ENTRY.into()), 0);
}

#[test]
fn failure_skips_downstream() {
    let (c, mut store) = loaded_effort_control();
    store
        .put_payload(
            &effort_control::EFFORT_ENTRY.into(),
            &"effort-table".into(),
            ts(1),
            json!({"records": [
                {"person": "x", "activity": "ZZ", "date": "2024-01-01", "hours": 1.0}
            ]}),
        )
        .unwrap();
    let r = Runtime::builtin().execute_catena(&c, &mut store, ts(10)).unwrap();
    let InstanceStatus::Failed { reason } = r.status("agg").unwrap() else {
        panic!("agg should fail");
    };
    assert!(reason.contains("ZZ"), "{reason}");
    assert_eq!(r.status("trc"), Some(&InstanceStatus::SkippedMissingInput));
}

#[test]
fn baseline_change_reruns_only_trc() {
    let (c, mut store) = loaded_effort_control();
    let rt = Runtime::builtin();
    rt.execute_catena(&c, &mut store, ts(10)).unwrap();
    let before_actual = store.latest_version(&effort_control::ACTUAL_ENTRY.into());
    let r = rt
        .propagate_update(&c, &mut store, &[effort_control::BASELINE_ENTRY.into()], ts(20))
        .unwrap();
    assert_eq!(r.executed, vec![InstanceId::from("trc")]);
    assert_eq!(
        store.latest_version(&effort_control::ACTUAL_ENTRY.into()),
        before_actual
    );
    assert_eq!(store.latest_version(&effort_control::INDICATOR_ENTRY.into()), 2);
    assert!(r.stale_views.contains(effort_control::VIEW));
}

#[test]
fn unbound_entry_change_runs_nothing() {
    let (mut c, mut store) = loaded_effort_control();
    c.data_entries.push(DataEntry::form("loose", "time-series"));
    let r = Runtime::builtin()
        .propagate_update(&c, &mut store, &["loose".into()], ts(20))
        .unwrap();
    assert!(r.executed.is_empty());
    assert!(r.stale_views.is_empty());
}

#[test]
fn execution_is_deterministic() {
    let rt = testkit::mix_runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let c = testkit::random_dag_catena(&mut rng, 20, 3);
        let mut a = MemoryStore::new();
        testkit::seed_sources(&mut rng, &c, &mut a, ts(0));
        let mut b = a.clone();
        let ra = rt.execute_catena(&c, &mut a, ts(5)).unwrap();
        let rb = rt.execute_catena(&c, &mut b, ts(5)).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.latest_bodies(), b.latest_bodies());
    }
}

#[test]
fn versions_strictly_increase_across_runs() {
    let (c, mut store) = loaded_effort_control();
    let rt = Runtime::builtin();
    for run in 1..=3 {
        rt.execute_catena(&c, &mut store, ts(run)).unwrap();
        let history = store.history(&effort_control::INDICATOR_ENTRY.into());
        let versions: Vec<u64> = history.iter().map(|p| p.version).collect();
        assert_eq!(versions, (1..=run as u64).collect::<Vec<_>>());
    }
}

#[test]
fn incremental_matches_full_on_random_catenas() {
    let rt = testkit::mix_runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..25 {
        let n = rng.gen_range(1..=30);
        let c = testkit::random_dag_catena(&mut rng, n, 4);
        let mut store = MemoryStore::new();
        testkit::seed_sources(&mut rng, &c, &mut store, ts(0));
        rt.execute_catena(&c, &mut store, ts(1)).unwrap();
        let sources: Vec<EntryId> = c
            .data_entries
            .iter()
            .filter(|e| e.is_form_managed())
            .map(|e| e.id.clone())
            .collect();
        let changed: Vec<EntryId> = sources.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        for e in &changed {
            let body = testkit::random_series(&mut rng, 3);
            store.put_payload(e, &"time-series".into(), ts(2), body).unwrap();
        }
        let mut full = store.clone();
        let inc = rt.propagate_update(&c, &mut store, &changed, ts(3)).unwrap();
        rt.execute_catena(&c, &mut full, ts(3)).unwrap();
        assert_eq!(store.latest_bodies(), full.latest_bodies());
        let reach = build_dependency_graph(&c).functions_reachable_from(&changed);
        assert_eq!(inc.executed.iter().cloned().collect::<BTreeSet<_>>(), reach);
    }
}

#[test]
fn effort_control_view_for_project_manager() {
    let (c, mut store) = loaded_effort_control();
    let rt = Runtime::builtin();
    rt.execute_catena(&c, &mut store, ts(10)).unwrap();
    let models = rt.refresh_views(&c, &store, [effort_control::ROLE]);
    assert_eq!(models.len(), 1);
    let m = &models[0];
    assert_eq!(m.render, RenderKind::BarChartDrilldown);
    assert_eq!(m.status, ViewStatus::Ok);
    assert_eq!(m.content["series"], json!(["planned", "actual", "deviation"]));
    let root = &m.content["roots"][0];
    assert_eq!(root["activity"], "P");
    assert_eq!(root["actual"], json!(112.0));
    assert_eq!(root["children"].as_array().unwrap().len(), 2);

    assert!(rt.refresh_views(&c, &store, ["developer"]).is_empty());
    assert!(rt.refresh_views(&c, &store, []).is_empty());
}

#[test]
fn missing_inputs_yield_no_data() {
    let c = effort_control::catena();
    let models = Runtime::builtin().refresh_views(&c, &MemoryStore::new(), [effort_control::ROLE]);
    assert_eq!(models[0].status, ViewStatus::NoData);
    assert_eq!(models[0].content, Value::Null);
}

fn panel_catena() -> Catena {
    let mut c = effort_control::catena();
    for (id, spec) in [("lights", "view.indicator-lights"), ("table", "view.indicator-table")] {
        let port = if spec.ends_with("table") { "data" } else { "indicators" };
        c.views.push(ViewInstance {
            id: id.into(),
            spec: spec.into(),
            bindings: watchtower_core::model::bindings([(port, effort_control::INDICATOR_ENTRY)]),
            params: Default::default(),
            children: BTreeMap::new(),
            visible_to: BTreeSet::from([effort_control::ROLE.to_owned()]),
        });
    }
    c.views.push(ViewInstance {
        id: "overview".into(),
        spec: "view.panel".into(),
        bindings: watchtower_core::model::bindings([("indicators", effort_control::INDICATOR_ENTRY)]),
        params: Default::default(),
        children: BTreeMap::from([("right".into(), "table".into()), ("left".into(), "lights".into())]),
        visible_to: BTreeSet::from([effort_control::ROLE.to_owned(), "sponsor".to_owned()]),
    });
    c
}

#[test]
fn parent_embeds_children_in_slot_order() {
    let (_, mut store) = loaded_effort_control();
    let c = panel_catena();
    assert!(watchtower_core::model::validate_catena(&c, &builtin_registry()).is_ok());
    let rt = Runtime::builtin();
    rt.execute_catena(&c, &mut store, ts(10)).unwrap();
    let models = rt.refresh_views(&c, &store, [effort_control::ROLE]);
    let ids: Vec<&str> = models.iter().map(|m| m.view.as_str()).collect();
    assert_eq!(ids, vec!["effort-chart", "overview"]);
    let panel = &models[1];
    let slots: Vec<(&str, &str)> = panel
        .children
        .iter()
        .map(|c| (c.slot.as_str(), c.model.view.as_str()))
        .collect();
    assert_eq!(slots, vec![("left", "lights"), ("right", "table")]);
    assert_eq!(panel.content["worst"], "red");

    // The sponsor sees the panel but none of its children.
    let sponsor = rt.refresh_views(&c, &store, ["sponsor"]);
    assert_eq!(sponsor.len(), 1);
    assert!(sponsor[0].children.is_empty());
}

fn builtin_registry() -> watchtower_core::model::ComponentRegistry {
    watchtower_core::builtin::registry()
}

#[test]
fn cache_tracks_staleness() {
    let (c, mut store) = loaded_effort_control();
    let rt = Runtime::builtin();
    rt.execute_catena(&c, &mut store, ts(10)).unwrap();
    let mut cache = ViewCache::new();
    assert!(cache.is_stale(&c, effort_control::VIEW, &store));
    cache.record(&rt.refresh_views(&c, &store, [effort_control::ROLE]));
    assert!(cache.stale_views(&c, &store).is_empty());
    rt.propagate_update(&c, &mut store, &[effort_control::BASELINE_ENTRY.into()], ts(11))
        .unwrap();
    assert!(cache.is_stale(&c, effort_control::VIEW, &store));
}
