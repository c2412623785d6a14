//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;
use watchtower_cli::{cmd_run, cmd_seed, load_registry};
use watchtower_core::builtin::{parsers, techniques as keys, types as dt, views};
use watchtower_core::collection::{submit_form, FormSubmission};
use watchtower_core::engine::{build_dependency_graph, Runtime};
use watchtower_core::gqm::{analyze_deviations, compose_catena, parse_gqm_plan, Detection, ProjectContext};
use watchtower_core::ids::EntryId;
use watchtower_core::model::{
    codes, parse_catena, serialize_catena, validate_catena, Catena, ComponentRegistry, EntrySource, RenderKind,
    ViewInstance,
};
use watchtower_core::store::{FileRepository, MemoryStore, PayloadStore};
use watchtower_core::techniques::types::{ActivityHierarchy, EffortTable};
use watchtower_core::techniques::{aggregate_effort, earned_value_analysis};
use watchtower_core::testkit::{self, effort_control, synthetic, ts, ROLES};
use watchtower_service::{router, AppState, Principal, Principals, Shared};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/effort-control")
        .join(rel)
}

fn within(limit: Duration, started: Instant) {
    let took = started.elapsed();
    assert!(took < limit, "took {took:?}, limit {limit:?}");
}

// Effort control golden scenario.

/// Minimal CSV reader for the fixtures: header row, comma separated, no
/// quoting.
fn csv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .map(|h| h.to_string())
                .zip(l.split(',').map(str::to_owned))
                .collect()
        })
        .collect()
}

fn effort_control_golden() {
    let started = Instant::now();
    let repo = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    cmd_seed(repo.path(), &mut Vec::new()).unwrap();

    let registry = load_registry(Some(repo.path())).unwrap();
    let c = parse_catena(&std::fs::read_to_string(fixture("catena.json")).unwrap(), &registry).unwrap();
    let sources = c
        .data_entries
        .iter()
        .filter(|e| !matches!(e.source, EntrySource::Derived { .. }))
        .count();
    assert_eq!(
        (sources, c.web_forms.len(), c.functions.len(), c.views.len()),
        (3, 1, 2, 1)
    );

    cmd_run(
        &fixture("catena.json"),
        Some(repo.path()),
        &fixture("data"),
        out.path(),
        &mut Vec::new(),
    )
    .unwrap();
    let models: Vec<Value> = std::fs::read_dir(out.path().join("views"))
        .unwrap()
        .map(|e| serde_json::from_str(&std::fs::read_to_string(e.unwrap().path()).unwrap()).unwrap())
        .collect();
    let bars: Vec<&Value> = models.iter().filter(|m| m["render"] == "bar-chart-drilldown").collect();
    assert_eq!(bars.len(), 1, "bar chart models");
    assert_eq!(models.len(), 1);

    let plan = csv_rows(&std::fs::read_to_string(fixture("data/plan-upload.csv")).unwrap());
    let effort = csv_rows(&std::fs::read_to_string(fixture("data/effort.csv")).unwrap());
    let parent: BTreeMap<&str, &str> = plan
        .iter()
        .filter(|r| !r["parent_id"].is_empty())
        .map(|r| (r["activity_id"].as_str(), r["parent_id"].as_str()))
        .collect();
    let planned: BTreeMap<&str, f64> = plan
        .iter()
        .map(|r| (r["activity_id"].as_str(), r["baseline_effort_h"].parse().unwrap()))
        .collect();
    let mut actual: BTreeMap<&str, f64> = planned.keys().map(|a| (*a, 0.0)).collect();
    for r in &effort {
        let hours: f64 = r["hours"].parse().unwrap();
        let mut a = r["activity_id"].as_str();
        loop {
            *actual.get_mut(a).unwrap() += hours;
            match parent.get(a) {
                Some(p) => a = p,
                None => break,
            }
        }
    }
    let expected_status = |a: &str| {
        let d = (actual[a] - planned[a]) / planned[a];
        if d <= 0.1 {
            "green"
        } else if d <= 0.2 {
            "yellow"
        } else {
            "red"
        }
    };

    fn visit(node: &Value, seen: &mut BTreeMap<String, (f64, String)>) {
        seen.insert(
            node["activity"].as_str().unwrap().to_owned(),
            (
                node["actual"].as_f64().unwrap(),
                node["status"].as_str().unwrap().to_owned(),
            ),
        );
        for child in node["children"].as_array().unwrap() {
            visit(child, seen);
        }
    }
    let roots = bars[0]["content"]["roots"].as_array().unwrap();
    let root_ids: Vec<&str> = roots.iter().map(|r| r["activity"].as_str().unwrap()).collect();
    assert_eq!(root_ids, vec!["P"]);
    let mut seen = BTreeMap::new();
    for r in roots {
        visit(r, &mut seen);
    }
    assert_eq!(seen.len(), planned.len());
    for (a, (got, status)) in &seen {
        assert_eq!(*got, actual[a.as_str()], "actual of {a}");
        assert_eq!(status, expected_status(a), "status of {a}");
    }
    within(Duration::from_secs(5), started);
}

// Incremental and full execution agree.

fn incremental_equivalence() {
    let started = Instant::now();
    let rt = testkit::mix_runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0002);
    for case in 0..200 {
        let n = rng.gen_range(1..=30);
        let sources = rng.gen_range(1..=5);
        let c = testkit::random_dag_catena(&mut rng, n, sources);
        assert!(validate_catena(&c, &rt.registry).is_ok(), "case {case} invalid");
        let mut store = MemoryStore::new();
        testkit::seed_sources(&mut rng, &c, &mut store, ts(0));
        rt.execute_catena(&c, &mut store, ts(1)).unwrap();
        let inputs: Vec<EntryId> = c
            .data_entries
            .iter()
            .filter(|e| e.is_form_managed())
            .map(|e| e.id.clone())
            .collect();
        let changed: Vec<EntryId> = inputs.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        for e in &changed {
            let len = rng.gen_range(1..=6);
            store
                .put_payload(e, &dt::TIME_SERIES.into(), ts(2), testkit::random_series(&mut rng, len))
                .unwrap();
        }
        let mut full = store.clone();
        let inc = rt.propagate_update(&c, &mut store, &changed, ts(3)).unwrap();
        rt.execute_catena(&c, &mut full, ts(3)).unwrap();
        assert_eq!(store.latest_bodies(), full.latest_bodies(), "case {case} payloads");
        let reach = build_dependency_graph(&c).functions_reachable_from(&changed);
        assert_eq!(
            inc.executed.iter().cloned().collect::<BTreeSet<_>>(),
            reach,
            "case {case} executed set"
        );
    }
    within(Duration::from_secs(60), started);
}

// Cycle rejection.

fn cycle_rejection() {
    let rt = testkit::mix_runtime();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0003);
    let mut rejected = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=30);
        let c = testkit::random_dag_catena(&mut rng, n, 3);
        assert!(validate_catena(&c, &rt.registry).is_ok());
        let bad = testkit::add_back_edge(&mut rng, &c);
        let report = validate_catena(&bad, &rt.registry);
        if !report.is_ok() && report.has_code(codes::CYCLE) {
            rejected += 1;
        }
    }
    assert_eq!(rejected, 100);
}

// Earned value identities.

fn eva_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0004);
    for case in 0..500 {
        let n = rng.gen_range(1..=80);
        let c = testkit::random_eva_case(&mut rng, n);
        let r = earned_value_analysis(&c.hierarchy, &c.progress, &c.cost, c.status_date).unwrap();
        assert!((r.sv - (r.ev - r.pv)).abs() <= 1e-9, "case {case} sv");
        assert!((r.cv - (r.ev - r.ac)).abs() <= 1e-9, "case {case} cv");
        match r.spi {
            Some(spi) => assert!((spi * r.pv - r.ev).abs() <= 1e-9, "case {case} spi"),
            None => assert_eq!(r.pv, 0.0),
        }
        match r.cpi {
            Some(cpi) => assert!((cpi * r.ac - r.ev).abs() <= 1e-9, "case {case} cpi"),
            None => assert_eq!(r.ac, 0.0),
        }
    }
    for case in 0..500 {
        let n = rng.gen_range(1..=80);
        let c = testkit::on_plan_eva_case(&mut rng, n);
        let r = earned_value_analysis(&c.hierarchy, &c.progress, &c.cost, c.status_date).unwrap();
        assert!(
            (r.spi.unwrap() - 1.0).abs() <= 1e-12,
            "on-plan case {case} spi {:?}",
            r.spi
        );
        assert!(
            (r.cpi.unwrap() - 1.0).abs() <= 1e-12,
            "on-plan case {case} cpi {:?}",
            r.cpi
        );
    }
}

// Aggregation conservation.

fn subtree_sums(effort: &EffortTable, h: &ActivityHierarchy) -> BTreeMap<String, f64> {
    let parent: BTreeMap<&str, Option<&str>> = h
        .activities
        .iter()
        .map(|a| (a.id.as_str(), a.parent.as_deref()))
        .collect();
    let mut out: BTreeMap<String, f64> = h.activities.iter().map(|a| (a.id.clone(), 0.0)).collect();
    for r in &effort.records {
        let mut cur = Some(r.activity.as_str());
        while let Some(a) = cur {
            *out.get_mut(a).unwrap() += r.hours;
            cur = parent[a];
        }
    }
    out
}

fn aggregation_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0005);
    for case in 0..60 {
        let n = if case == 0 { 500 } else { rng.gen_range(1..=500) };
        let m = if case == 0 { 5000 } else { rng.gen_range(0..=5000) };
        let h = testkit::random_hierarchy(&mut rng, n);
        let effort = testkit::random_effort(&mut rng, &h, m);
        let got = aggregate_effort(&effort, &h).unwrap().to_map().unwrap();
        let column: f64 = effort.records.iter().map(|r| r.hours).sum();
        assert_eq!(got["a0000"], column, "case {case} root");
        assert_eq!(got, subtree_sums(&effort, &h), "case {case} nodes");
    }
}

// Synthetic deviation detection.

fn synthetic_detection() {
    let (_, store) = synthetic::run().unwrap();
    let indicator: EntryId = effort_control::INDICATOR_ENTRY.into();
    let a = analyze_deviations(&store, std::slice::from_ref(&indicator), &[synthetic::overrun_event()]);
    let first = a.indicators[0].first_non_green.expect("a non-green status");
    assert_eq!(synthetic::week_of(first), synthetic::OVERRUN_WEEK);
    assert_eq!(a.indicators[0].events[0].detection, Detection::Detected);
}

// Composition round trip.

fn entry_paths(c: &Catena, registry: &ComponentRegistry, source_type: &str) -> BTreeSet<(Vec<String>, RenderKind)> {
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

fn composition_round_trip() {
    let repo = tempfile::tempdir().unwrap();
    cmd_seed(repo.path(), &mut Vec::new()).unwrap();
    let registry = load_registry(Some(repo.path())).unwrap();
    let plan = parse_gqm_plan(effort_control::GQM_PLAN).unwrap();
    let ctx = ProjectContext {
        project: effort_control::PROJECT_ID.into(),
        catena: "candidate".into(),
        roles: vec![],
    };
    let r = compose_catena(&plan, &registry, &ctx);
    let report = validate_catena(&r.catena, &registry);
    assert!(report.is_ok(), "{:?}", report.diagnostics);
    let text = serialize_catena(&r.catena);
    assert_eq!(parse_catena(&text, &registry).unwrap(), r.catena);
    let path = (
        vec![keys::AGGREGATE_EFFORT.to_owned(), keys::TOLERANCE_CHECK.to_owned()],
        RenderKind::BarChartDrilldown,
    );
    assert!(entry_paths(&r.catena, &registry, dt::EFFORT_TABLE).contains(&path));
    for m in &plan.metrics {
        assert!(r.coverage[&m.id].is_matched(), "metric {}", m.id);
    }
}

// Serialization and store round trips.

fn files_on_disk(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn serialization_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0008);
    let registry = testkit::mix_runtime().registry;
    for case in 0..100 {
        let n = rng.gen_range(0..=30);
        let sources = rng.gen_range(1..=4);
        let c = testkit::random_dag_catena(&mut rng, n, sources);
        let text = serialize_catena(&c);
        let back = parse_catena(&text, &registry).unwrap();
        assert_eq!(back, c, "case {case}");
        assert_eq!(serialize_catena(&back), text, "case {case} text");
    }

    let dir = tempfile::tempdir().unwrap();
    let records = {
        let mut repo = FileRepository::open(dir.path()).unwrap();
        repo.seed_builtin().unwrap();
        repo.put_catena(&effort_control::catena()).unwrap();
        for i in 0..10 {
            let mut c = testkit::random_dag_catena(&mut rng, 8, 2);
            c.meta.id = format!("random-{i}").as_str().into();
            repo.put_catena(&c).unwrap();
            let at = ts(rng.gen_range(0..1_000_000));
            testkit::seed_sources(&mut rng, &c, &mut repo, at);
        }
        repo.snapshot()
    };
    let before = files_on_disk(dir.path());
    let reopened = FileRepository::open(dir.path()).unwrap();
    assert_eq!(reopened.snapshot(), records);
    drop(reopened);
    assert_eq!(files_on_disk(dir.path()), before);
}

// Service contract.

struct Harness {
    _dir: tempfile::TempDir,
    state: AppState,
    app: Router,
}

fn principal(id: &str, roles: BTreeSet<String>) -> Principal {
    Principal {
        id: id.into(),
        name: id.into(),
        roles,
        token: format!("tok-{id}"),
    }
}

fn roles(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|r| r.to_string()).collect()
}

impl Harness {
    fn new(extra: Vec<Principal>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let shared = Shared::open(dir.path().join("store"), dir.path().join("data")).unwrap();
        let mut users = vec![
            principal("admin", roles(&["admin"])),
            principal("pm", roles(&[effort_control::ROLE])),
            principal("dev", roles(&["developer"])),
        ];
        users.extend(extra);
        let state = AppState::new(shared, Principals::new(users));
        Harness {
            _dir: dir,
            app: router(state.clone()),
            state,
        }
    }

    async fn call(&self, method: Method, uri: &str, user: Option<&str>, body: &str) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(u) = user {
            req = req.header("authorization", format!("Bearer tok-{u}"));
        }
        let resp = self
            .app
            .clone()
            .oneshot(req.body(Body::from(body.to_owned())).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    async fn snapshot(&self) -> BTreeMap<String, String> {
        self.state.shared.read().await.snapshot()
    }

    async fn put_catena(&self, c: &Catena) -> StatusCode {
        let uri = format!("/catenas/{}", c.meta.id);
        self.call(Method::PUT, &uri, Some("admin"), &serialize_catena(c))
            .await
            .0
    }
}

fn plan_upload(csv: &str) -> Value {
    json!({ "format": parsers::PLAN_CSV, "content": csv })
}

fn effort_records(scale: f64) -> Value {
    json!({ "records": [
        {"person": "ann", "activity": "A1", "date": "2024-01-08", "hours": 32.0 * scale},
        {"person": "ann", "activity": "A2", "date": "2024-02-05", "hours": 25.0 * scale},
        {"person": "bob", "activity": "B", "date": "2024-02-20", "hours": 55.0 * scale}
    ]})
}

fn oracle_contents(c: &Catena, submissions: &[(&str, Value)]) -> Vec<Value> {
    let rt = Runtime::builtin();
    let mut store = MemoryStore::new();
    for (i, (form, content)) in submissions.iter().enumerate() {
        let sub = FormSubmission {
            form: (*form).into(),
            submitted_by: "oracle".into(),
            submitted_at: ts(i as i64),
            content: serde_json::from_value(content.clone()).unwrap(),
        };
        let changed = submit_form(&sub, c, &rt.registry, &mut store).unwrap();
        rt.propagate_update(c, &mut store, &changed, ts(i as i64)).unwrap();
    }
    rt.refresh_views(c, &store, [effort_control::ROLE])
        .iter()
        .map(|m| m.content.clone())
        .collect()
}

fn contents(models: &Value) -> Vec<Value> {
    models
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["content"].clone())
        .collect()
}

fn random_roles(rng: &mut ChaCha8Rng, min: usize) -> BTreeSet<String> {
    let k = rng.gen_range(min..=ROLES.len());
    ROLES.choose_multiple(rng, k).map(|r| r.to_string()).collect()
}

fn random_view_catena(rng: &mut ChaCha8Rng) -> Catena {
    let mut c = effort_control::interactive_catena();
    c.views.clear();
    let n = rng.gen_range(1..=6);
    for i in 0..n {
        let (spec, port) = [
            (views::EFFORT_BARS, "indicators"),
            (views::INDICATOR_LIGHTS, "indicators"),
            (views::INDICATOR_TABLE, "data"),
        ]
        .choose(rng)
        .copied()
        .unwrap();
        let mut bindings = watchtower_core::model::bindings([(port, effort_control::INDICATOR_ENTRY)]);
        if spec == views::EFFORT_BARS {
            bindings.extend(watchtower_core::model::bindings([(
                "hierarchy",
                effort_control::PLAN_ENTRY,
            )]));
        }
        c.views.push(ViewInstance {
            id: format!("v{i}").as_str().into(),
            spec: spec.into(),
            bindings,
            params: Default::default(),
            children: BTreeMap::new(),
            visible_to: random_roles(rng, 0),
        });
    }
    if n >= 2 && rng.gen_bool(0.5) {
        c.views.push(ViewInstance {
            id: "panel".into(),
            spec: views::PANEL.into(),
            bindings: watchtower_core::model::bindings([("indicators", effort_control::INDICATOR_ENTRY)]),
            params: Default::default(),
            children: BTreeMap::from([("left".to_owned(), "v0".into()), ("right".to_owned(), "v1".into())]),
            visible_to: random_roles(rng, 0),
        });
    }
    c
}

fn collect_view_ids(models: &Value, out: &mut Vec<String>) {
    for m in models.as_array().unwrap() {
        out.push(m["view"].as_str().unwrap().to_owned());
        let children: Vec<Value> = m["children"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["model"].clone())
            .collect();
        collect_view_ids(&Value::Array(children), out);
    }
}

async fn service_contract() {
    const VIEWS: &str = "/catenas/effort-control/views";

    // Read-your-writes.
    let h = Harness::new(vec![]);
    let c = effort_control::interactive_catena();
    assert!(h.put_catena(&c).await.is_success());
    let mut history = Vec::new();
    for (form, content) in [
        ("plan-upload", plan_upload(effort_control::PLAN_CSV)),
        ("log-effort", effort_records(1.0)),
        ("log-effort", effort_records(0.5)),
        (
            "plan-upload",
            plan_upload(&effort_control::PLAN_CSV.replace(",50\n", ",45\n")),
        ),
    ] {
        let (s, body) = h
            .call(
                Method::POST,
                &format!("/forms/{form}"),
                Some("pm"),
                &content.to_string(),
            )
            .await;
        assert_eq!(s, StatusCode::OK, "{body}");
        history.push((form, content));
        let (s, models) = h.call(Method::GET, VIEWS, Some("pm"), "").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(
            contents(&models),
            oracle_contents(&c, &history),
            "after {} submissions",
            history.len()
        );
    }

    // Denied and rejected requests leave the store untouched.
    let before = h.snapshot().await;
    let bad_value = json!({"values": {"person": "ann", "activity": "A1", "date": "2024-01-08", "hours": "x"}});
    let broken_plan = plan_upload(&effort_control::PLAN_CSV.replace("A2,A,", "A2,Z,"));
    let mut broken_catena = c.clone();
    broken_catena.functions[0].bindings.clear();
    let attempts: Vec<(Method, String, Option<&str>, String, StatusCode)> = vec![
        (
            Method::POST,
            "/forms/log-effort".into(),
            Some("pm"),
            bad_value.to_string(),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::POST,
            "/forms/plan-upload".into(),
            Some("pm"),
            broken_plan.to_string(),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::POST,
            "/forms/log-effort".into(),
            Some("pm"),
            "{".into(),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::POST,
            "/forms/log-effort".into(),
            Some("dev"),
            effort_records(2.0).to_string(),
            StatusCode::FORBIDDEN,
        ),
        (
            Method::POST,
            "/forms/log-effort".into(),
            None,
            effort_records(2.0).to_string(),
            StatusCode::UNAUTHORIZED,
        ),
        (
            Method::PUT,
            "/catenas/effort-control".into(),
            Some("pm"),
            serialize_catena(&c),
            StatusCode::FORBIDDEN,
        ),
        (
            Method::PUT,
            "/catenas/effort-control".into(),
            Some("admin"),
            serialize_catena(&broken_catena),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::DELETE,
            "/catenas/effort-control".into(),
            Some("dev"),
            String::new(),
            StatusCode::FORBIDDEN,
        ),
    ];
    for (method, uri, user, body, expected) in attempts {
        let (s, resp) = h.call(method.clone(), &uri, user, &body).await;
        assert_eq!(s, expected, "{method} {uri} as {user:?}: {resp}");
        assert_eq!(
            h.snapshot().await,
            before,
            "{method} {uri} as {user:?} changed the store"
        );
    }

    // Role filtering over randomized assignments.
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0009);
    let assignments: Vec<(String, BTreeSet<String>)> =
        (0..100).map(|i| (format!("u{i}"), random_roles(&mut rng, 1))).collect();
    let h = Harness::new(assignments.iter().map(|(id, r)| principal(id, r.clone())).collect());
    for (user, held) in &assignments {
        let c = random_view_catena(&mut rng);
        assert!(h.put_catena(&c).await.is_success());
        let (s, models) = h.call(Method::GET, VIEWS, Some(user), "").await;
        assert_eq!(s, StatusCode::OK);
        let mut seen = Vec::new();
        collect_view_ids(&models, &mut seen);
        let unique: BTreeSet<String> = seen.iter().cloned().collect();
        assert_eq!(unique.len(), seen.len(), "duplicate views {seen:?}");
        let allowed: BTreeSet<String> = c
            .views
            .iter()
            .filter(|v| v.visible_to.iter().any(|r| held.contains(r)))
            .map(|v| v.id.to_string())
            .collect();
        assert_eq!(unique, allowed, "roles {held:?}");
    }
}

fn service_contract_blocking() {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap()
        .block_on(service_contract());
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() {
    let criteria: [(&str, fn()); 9] = [
        ("effort control golden scenario via cmd_run", effort_control_golden),
        (
            "incremental and full execution agree on 200 catenas",
            incremental_equivalence,
        ),
        ("100 back-edge mutations rejected", cycle_rejection),
        ("earned value identities on 500 cases", eva_identities),
        ("aggregation conservation", aggregation_conservation),
        ("synthetic overrun detected in week 6", synthetic_detection),
        ("composition round trip", composition_round_trip),
        ("serialization and store round trips", serialization_round_trips),
        ("service contract", service_contract_blocking),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run));
        let took = started.elapsed();
        match outcome {
            Ok(()) => println!("PASS {}. {name} ({took:.2?})", i + 1),
            Err(p) => {
                failed += 1;
                println!("FAIL {}. {name} ({took:.2?}): {}", i + 1, panic_message(p.as_ref()));
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
