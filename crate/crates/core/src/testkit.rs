//! Fixtures and random generators shared by tests and benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::builtin::{self, daos, forms, techniques as keys, types as dt, views};
use crate::engine::Runtime;
use crate::ids::{EntryId, InstanceId};
use crate::model::{
    params, Binding, Bindings, Catena, CollectionWindow, ComponentBody, DataEntry, EntrySource, FunctionInstance,
    FunctionSpec, OutputPortSpec, ParamKind, ParamSpec, Params, PortSpec, ViewInstance, WebFormInstance,
};
use crate::store::PayloadStore;
use crate::techniques::eva::planned_fraction;
use crate::techniques::types::{Activity, ActivityHierarchy, ControlMetric, EffortRecord, EffortTable};
use crate::techniques::{TechniqueError, TechniqueInputs, TechniqueOutputs, TechniqueRegistry};

/// Implementation key and spec id of the test mixing function.
pub const MIX: &str = "test.mix";

/// Roles used by generated view visibility sets.
pub const ROLES: [&str; 4] = ["project-manager", "developer", "quality-engineer", "sponsor"];

pub fn ts(seconds: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(seconds, 0).single().expect("valid timestamp")
}

/// Many-input time-series function: one point holding the sum of every input
/// value plus `offset`.
pub fn mix_spec() -> FunctionSpec {
    FunctionSpec {
        id: MIX.into(),
        name: "Mix".into(),
        description: String::new(),
        inputs: vec![PortSpec::many("in", dt::TIME_SERIES)],
        outputs: vec![OutputPortSpec {
            name: "out".into(),
            data_type: dt::TIME_SERIES.into(),
        }],
        params: vec![ParamSpec::new("offset", ParamKind::Number).with_default(json!(0.0))],
        implementation: MIX.into(),
        tags: vec!["test".into()],
    }
}

fn mix(inputs: &TechniqueInputs, params: &Params) -> Result<TechniqueOutputs, TechniqueError> {
    let offset = params.get("offset").and_then(Value::as_f64).unwrap_or(0.0);
    let mut total = offset;
    for body in inputs.bodies("in")? {
        let points = body["points"]
            .as_array()
            .ok_or_else(|| TechniqueError::invalid("not a time series"))?;
        for p in points {
            total += p["value"]
                .as_f64()
                .ok_or_else(|| TechniqueError::invalid("non-numeric value"))?;
        }
    }
    Ok(BTreeMap::from([(
        "out".to_owned(),
        json!({ "points": [{ "t": "2024-01-01T00:00:00Z", "value": total }] }),
    )]))
}

/// Built-in runtime extended with the mixing function.
pub fn mix_runtime() -> Runtime {
    let mut registry = builtin::registry();
    registry.insert(ComponentBody::Function(mix_spec()));
    let mut techniques = TechniqueRegistry::builtin();
    techniques.register(MIX, mix);
    Runtime::new(registry, techniques)
}

/// A random valid catena over the mixing function: `sources` form-managed
/// time-series entries and `functions` instances each consuming one to three
/// earlier entries. Instance ids are shuffled so that id order and
/// dependency order disagree. Views bind random entries and carry random
/// visibility sets drawn from [`ROLES`].
pub fn random_dag_catena<R: Rng>(rng: &mut R, functions: usize, sources: usize) -> Catena {
    let mut c = Catena::new("random", "random-project");
    let mut available: Vec<EntryId> = Vec::new();
    for i in 0..sources.max(1) {
        let id = format!("src.{i:02}");
        c.data_entries.push(DataEntry::form(&id, dt::TIME_SERIES));
        available.push(id.into());
    }
    c.web_forms.push(WebFormInstance {
        id: "upload".into(),
        spec: forms::TIMESERIES_IMPORT.into(),
        bindings: BTreeMap::from([(dt::TIME_SERIES.into(), available[0].clone())]),
        fields: BTreeMap::new(),
    });
    let mut names: Vec<usize> = (0..functions).collect();
    names.shuffle(rng);
    for (i, name) in names.into_iter().enumerate() {
        let id = format!("f{name:03}");
        let k = rng.gen_range(1..=3.min(available.len()));
        let mut ins: Vec<EntryId> = available.choose_multiple(rng, k).cloned().collect();
        ins.sort();
        let out: EntryId = format!("{id}.out").into();
        c.functions.push(FunctionInstance {
            id: id.as_str().into(),
            spec: MIX.into(),
            bindings: Bindings::from([("in".to_owned(), Binding::Many(ins))]),
            params: params([("offset", json!(i as f64))]),
            outputs: BTreeMap::from([("out".to_owned(), out.clone())]),
        });
        c.data_entries
            .push(DataEntry::derived(out.as_str(), dt::TIME_SERIES, &id, "out"));
        available.push(out);
    }
    let n_views = rng.gen_range(1..=4);
    for v in 0..n_views {
        let k = rng.gen_range(1..=2.min(available.len()));
        let mut ins: Vec<EntryId> = available.choose_multiple(rng, k).cloned().collect();
        ins.sort();
        let visible_to: BTreeSet<String> = ROLES
            .iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(|r| r.to_string())
            .collect();
        c.views.push(ViewInstance {
            id: format!("view.{v}").into(),
            spec: views::SERIES_LINE.into(),
            bindings: Bindings::from([("series".to_owned(), Binding::Many(ins))]),
            params: Params::new(),
            children: BTreeMap::new(),
            visible_to,
        });
    }
    c
}

fn output_of(f: &FunctionInstance) -> EntryId {
    f.outputs["out"].clone()
}

fn upstream_functions(c: &Catena, of: &InstanceId) -> BTreeSet<InstanceId> {
    let producer: BTreeMap<&EntryId, &InstanceId> = c
        .functions
        .iter()
        .flat_map(|f| f.outputs.values().map(move |e| (e, &f.id)))
        .collect();
    let mut seen = BTreeSet::new();
    let mut stack = vec![of.clone()];
    while let Some(id) = stack.pop() {
        let f = c.function(id.as_str()).expect("known function");
        for e in f.input_entries() {
            if let Some(p) = producer.get(e) {
                if seen.insert((*p).clone()) {
                    stack.push((*p).clone());
                }
            }
        }
    }
    seen
}

fn add_input(c: &mut Catena, to: &InstanceId, entry: EntryId) {
    let f = c.functions.iter_mut().find(|f| &f.id == to).expect("known function");
    if let Some(Binding::Many(v)) = f.bindings.get_mut("in") {
        if !v.contains(&entry) {
            v.push(entry);
            v.sort();
        }
    }
}

/// Adds one back edge to a mixing catena: some function consumes the output
/// of a function downstream of it. Requires at least one function.
pub fn add_back_edge<R: Rng>(rng: &mut R, catena: &Catena) -> Catena {
    let mut c = catena.clone();
    let ids: Vec<InstanceId> = c.functions.iter().map(|f| f.id.clone()).collect();
    let with_upstream: Vec<(InstanceId, BTreeSet<InstanceId>)> = ids
        .iter()
        .map(|id| (id.clone(), upstream_functions(&c, id)))
        .filter(|(_, up)| !up.is_empty())
        .collect();
    if let Some((down, ups)) = with_upstream.choose(rng) {
        let up = ups
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .choose(rng)
            .cloned()
            .expect("non-empty");
        let out = output_of(c.function(down.as_str()).expect("known"));
        add_input(&mut c, &up, out);
    } else if ids.len() == 1 {
        let only = ids[0].clone();
        let out = output_of(c.function(only.as_str()).expect("known"));
        add_input(&mut c, &only, out);
    } else {
        let pair: Vec<&InstanceId> = ids.choose_multiple(rng, 2).collect();
        let (a, b) = (pair[0].clone(), pair[1].clone());
        let a_out = output_of(c.function(a.as_str()).expect("known"));
        let b_out = output_of(c.function(b.as_str()).expect("known"));
        add_input(&mut c, &b, a_out);
        add_input(&mut c, &a, b_out);
    }
    c
}

/// Random time-series body with `n` daily points and small integer values.
pub fn random_series<R: Rng>(rng: &mut R, n: usize) -> Value {
    let points: Vec<Value> = (0..n)
        .map(|i| {
            json!({
                "t": format!("2024-01-{:02}T00:00:00Z", i + 1),
                "value": rng.gen_range(-50..=50) as f64,
            })
        })
        .collect();
    json!({ "points": points })
}

/// Stores a random payload for every form-managed entry.
pub fn seed_sources<R: Rng, S: PayloadStore + ?Sized>(rng: &mut R, catena: &Catena, store: &mut S, at: DateTime<Utc>) {
    for e in catena.data_entries.iter().filter(|e| e.is_form_managed()) {
        let n = rng.gen_range(1..=5);
        store
            .put_payload(&e.id, &e.spec, at, random_series(rng, n))
            .expect("store accepts payload");
    }
}

/// Random single-root hierarchy of `n` activities `a0000`, `a0001`, ... in
/// which each activity's parent precedes it. Baselines are multiples of 0.25.
pub fn random_hierarchy<R: Rng>(rng: &mut R, n: usize) -> ActivityHierarchy {
    let base = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    let activities = (0..n.max(1))
        .map(|i| {
            let start = base + Duration::days(rng.gen_range(0..200));
            let end = start + Duration::days(rng.gen_range(0..100));
            Activity {
                id: format!("a{i:04}"),
                name: format!("Activity {i}"),
                parent: (i > 0).then(|| format!("a{:04}", rng.gen_range(0..i))),
                start,
                end,
                baseline_effort_h: rng.gen_range(0..=400) as f64 * 0.25,
            }
        })
        .collect();
    ActivityHierarchy { activities }
}

/// Random effort records against `hierarchy`. Hours are positive multiples
/// of 0.25, so sums are exact.
pub fn random_effort<R: Rng>(rng: &mut R, hierarchy: &ActivityHierarchy, n: usize) -> EffortTable {
    let base = NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date");
    let records = (0..n)
        .map(|_| {
            let a = &hierarchy.activities[rng.gen_range(0..hierarchy.activities.len())];
            EffortRecord {
                person: format!("p{}", rng.gen_range(0..8)),
                activity: a.id.clone(),
                date: base + Duration::days(rng.gen_range(0..300)),
                hours: rng.gen_range(1..=48) as f64 * 0.25,
            }
        })
        .collect();
    EffortTable { records }
}

/// Inputs for one earned value analysis run.
#[derive(Debug, Clone)]
pub struct EvaCase {
    pub hierarchy: ActivityHierarchy,
    pub progress: ControlMetric,
    pub cost: ControlMetric,
    pub status_date: NaiveDate,
}

/// Random plan with random progress and per-leaf cost. The status date lies
/// within the project's date range.
pub fn random_eva_case<R: Rng>(rng: &mut R, n: usize) -> EvaCase {
    let hierarchy = random_hierarchy(rng, n);
    let mut progress = BTreeMap::new();
    let mut cost = BTreeMap::new();
    for leaf in hierarchy.leaves() {
        progress.insert(leaf.id.clone(), rng.gen_range(0.0..=1.0));
        cost.insert(leaf.id.clone(), rng.gen_range(0.0..500.0));
    }
    let status_date = mid_date(&hierarchy);
    EvaCase {
        progress: ControlMetric::from_map(&progress),
        cost: ControlMetric::from_map(&cost),
        status_date,
        hierarchy,
    }
}

/// Random plan whose progress equals the planned fraction and whose cost
/// equals planned value, leaf by leaf. The status date is chosen so that at
/// least one leaf with a positive baseline has started.
pub fn on_plan_eva_case<R: Rng>(rng: &mut R, n: usize) -> EvaCase {
    let mut hierarchy = random_hierarchy(rng, n);
    for a in &mut hierarchy.activities {
        if a.baseline_effort_h == 0.0 {
            a.baseline_effort_h = 1.0;
        }
    }
    let leaves: Vec<Activity> = hierarchy.leaves().into_iter().cloned().collect();
    let pick = &leaves[rng.gen_range(0..leaves.len())];
    let status_date = pick.end + Duration::days(rng.gen_range(0..30));
    let mut progress = BTreeMap::new();
    let mut cost = BTreeMap::new();
    for leaf in &leaves {
        let f = planned_fraction(leaf, status_date);
        progress.insert(leaf.id.clone(), f);
        cost.insert(leaf.id.clone(), leaf.baseline_effort_h * f);
    }
    EvaCase {
        progress: ControlMetric::from_map(&progress),
        cost: ControlMetric::from_map(&cost),
        status_date,
        hierarchy,
    }
}

fn mid_date(h: &ActivityHierarchy) -> NaiveDate {
    let start = h.activities.iter().map(|a| a.start).min().expect("non-empty");
    let end = h.activities.iter().map(|a| a.end).max().expect("non-empty");
    start + (end - start) / 2
}

pub mod effort_control {
    //! The effort-control example: plan upload form, effort file, effort
    //! aggregation, tolerance range check, and a drill-down bar chart.

    use super::*;

    pub const CATENA_ID: &str = "effort-control";
    pub const PROJECT_ID: &str = "proj-1";
    pub const ROLE: &str = "project-manager";
    pub const PLAN_ENTRY: &str = "plan";
    pub const BASELINE_ENTRY: &str = "baseline";
    pub const EFFORT_ENTRY: &str = "effort";
    pub const PLAN_FORM: &str = "plan-upload";
    pub const AGG: &str = "agg";
    pub const TRC: &str = "trc";
    pub const ACTUAL_ENTRY: &str = "agg.actual";
    pub const INDICATOR_ENTRY: &str = "trc.indicators";
    pub const VIEW: &str = "effort-chart";
    pub const EFFORT_FILE: &str = "effort.csv";

    pub const PLAN_CSV: &str = "\
activity_id,parent_id,name,start,end,baseline_effort_h
P,,Project,2024-01-01,2024-03-31,100
A,P,Design,2024-01-01,2024-02-15,50
A1,A,Architecture,2024-01-01,2024-01-31,30
A2,A,Interfaces,2024-02-01,2024-02-15,20
B,P,Build,2024-02-16,2024-03-31,50
";

    pub const EFFORT_CSV: &str = "\
person_id,activity_id,date,hours
ann,A1,2024-01-08,16
bob,A1,2024-01-15,16
ann,A2,2024-02-05,25
bob,B,2024-02-20,30
cid,B,2024-03-04,25
";

    /// The catena: three source entries, one web form, two functions, and
    /// one view.
    pub fn catena() -> Catena {
        let registry = builtin::registry();
        let mut c = Catena::new(CATENA_ID, PROJECT_ID);
        c.data_entries.push(DataEntry::form(PLAN_ENTRY, dt::ACTIVITY_HIERARCHY));
        c.data_entries.push(DataEntry::form(BASELINE_ENTRY, dt::CONTROL_METRIC));
        c.data_entries.push(DataEntry {
            id: EFFORT_ENTRY.into(),
            spec: dt::EFFORT_TABLE.into(),
            source: EntrySource::Dao {
                package: daos::FILE_EFFORT.into(),
                connection: params([("path", json!(EFFORT_FILE))]),
                window: CollectionWindow {
                    start: ts(1_704_067_200),
                    end: ts(1_735_603_200),
                    interval_s: 86_400,
                },
            },
            version: 0,
        });
        c.web_forms.push(WebFormInstance {
            id: PLAN_FORM.into(),
            spec: forms::PLAN_IMPORT.into(),
            bindings: BTreeMap::from([
                (dt::ACTIVITY_HIERARCHY.into(), PLAN_ENTRY.into()),
                (dt::CONTROL_METRIC.into(), BASELINE_ENTRY.into()),
            ]),
            fields: BTreeMap::new(),
        });
        let agg = &registry.functions[keys::AGGREGATE_EFFORT];
        c.instantiate_function(
            AGG,
            agg,
            crate::model::bindings([("effort", EFFORT_ENTRY), ("hierarchy", PLAN_ENTRY)]),
            Params::new(),
        )
        .expect("aggregation binds");
        let trc = &registry.functions[keys::TOLERANCE_CHECK];
        c.instantiate_function(
            TRC,
            trc,
            crate::model::bindings([("actual", ACTUAL_ENTRY), ("baseline", BASELINE_ENTRY)]),
            params([
                ("yellow", json!(0.1)),
                ("red", json!(0.2)),
                ("mode", json!("above-only")),
            ]),
        )
        .expect("tolerance check binds");
        c.views.push(ViewInstance {
            id: VIEW.into(),
            spec: views::EFFORT_BARS.into(),
            bindings: crate::model::bindings([("indicators", INDICATOR_ENTRY), ("hierarchy", PLAN_ENTRY)]),
            params: Params::new(),
            children: BTreeMap::new(),
            visible_to: BTreeSet::from([ROLE.to_owned()]),
        });
        c
    }

    /// Effort form id of [`interactive_catena`].
    pub const EFFORT_FORM: &str = "log-effort";

    /// The example catena with effort entered through a manual-entry form
    /// instead of a pull connector.
    pub fn interactive_catena() -> Catena {
        let mut c = catena();
        let effort = c
            .data_entries
            .iter_mut()
            .find(|e| e.id == EFFORT_ENTRY)
            .expect("effort entry exists");
        effort.source = EntrySource::Form;
        c.web_forms.push(WebFormInstance {
            id: EFFORT_FORM.into(),
            spec: forms::EFFORT_ENTRY.into(),
            bindings: BTreeMap::from([(dt::EFFORT_TABLE.into(), EFFORT_ENTRY.into())]),
            fields: BTreeMap::new(),
        });
        c
    }

    /// A GQM plan in the spirit of the example: keep actual effort below
    /// the planned effort, seen by the project manager.
    pub const GQM_PLAN: &str = r#"{
  "goals": [
    {
      "id": "G1",
      "object": "project effort",
      "purpose": "control",
      "quality_focus": "adherence of actual effort to planned effort",
      "viewpoint": "project-manager",
      "context": "single development project"
    }
  ],
  "questions": [
    { "id": "Q1", "goal": "G1", "text": "Does the actual effort per activity stay below the planned effort?" }
  ],
  "metrics": [
    {
      "id": "M1",
      "question": "Q1",
      "name": "actual effort per activity",
      "data_type": "effort-table",
      "technique_tags": ["effort", "tolerance"],
      "view_kind": "bar-chart-drilldown"
    }
  ]
}
"#;
}

/// A twelve-week project run week by week through the effort control
/// catena. Effort follows the plan until [`synthetic::OVERRUN_WEEK`], after
/// which every activity books 30% more than planned.
pub mod synthetic {
    use super::*;
    use crate::engine::EngineError;
    use crate::gqm::ReferenceEvent;
    use crate::store::MemoryStore;

    pub const WEEKS: u32 = 12;
    pub const OVERRUN_WEEK: u32 = 6;
    pub const OVERRUN: f64 = 0.3;

    /// Weekly planned hours per leaf activity.
    pub const LEAVES: [(&str, f64); 3] = [("design", 8.0), ("build", 24.0), ("test", 12.0)];

    pub fn project_start() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0)
            .single()
            .expect("valid timestamp")
    }

    /// Moment the week's report is produced: Friday noon of week `week` (1-based).
    pub fn report_time(week: u32) -> DateTime<Utc> {
        project_start() + Duration::weeks(i64::from(week) - 1) + Duration::days(4) + Duration::hours(12)
    }

    /// Week number (1-based) containing `t`.
    pub fn week_of(t: DateTime<Utc>) -> u32 {
        ((t - project_start()).num_days() / 7 + 1) as u32
    }

    pub fn hierarchy() -> ActivityHierarchy {
        let start = project_start().date_naive();
        let end = start + Duration::weeks(i64::from(WEEKS)) - Duration::days(1);
        let total: f64 = LEAVES.iter().map(|(_, h)| h * f64::from(WEEKS)).sum();
        let mut activities = vec![Activity {
            id: "project".into(),
            name: "Project".into(),
            parent: None,
            start,
            end,
            baseline_effort_h: total,
        }];
        activities.extend(LEAVES.iter().map(|(id, h)| Activity {
            id: (*id).into(),
            name: id.to_uppercase(),
            parent: Some("project".into()),
            start,
            end,
            baseline_effort_h: h * f64::from(WEEKS),
        }));
        ActivityHierarchy { activities }
    }

    /// Planned effort of one week, per activity including the root.
    pub fn weekly_baseline() -> ControlMetric {
        let mut map: BTreeMap<String, f64> = LEAVES.iter().map(|(id, h)| ((*id).to_owned(), *h)).collect();
        map.insert("project".into(), LEAVES.iter().map(|(_, h)| h).sum());
        ControlMetric::from_map(&map)
    }

    /// Effort booked in week `week`, split evenly between two people.
    pub fn weekly_effort(week: u32) -> EffortTable {
        let factor = if week >= OVERRUN_WEEK { 1.0 + OVERRUN } else { 1.0 };
        let date = (report_time(week) - Duration::days(1)).date_naive();
        let records = LEAVES
            .iter()
            .flat_map(|(id, h)| {
                ["alice", "bob"].into_iter().map(move |person| EffortRecord {
                    person: person.into(),
                    activity: (*id).into(),
                    date,
                    hours: h * factor / 2.0,
                })
            })
            .collect();
        EffortTable { records }
    }

    /// Reference event marking the start of the overrun.
    pub fn overrun_event() -> ReferenceEvent {
        ReferenceEvent {
            description: "effort overrun begins".into(),
            at: report_time(OVERRUN_WEEK),
        }
    }

    /// Runs all weeks through the effort control catena and returns the
    /// catena and the populated store.
    pub fn run() -> Result<(Catena, MemoryStore), EngineError> {
        let catena = effort_control::catena();
        let runtime = Runtime::builtin();
        let mut store = MemoryStore::new();
        let plan: EntryId = effort_control::PLAN_ENTRY.into();
        let baseline: EntryId = effort_control::BASELINE_ENTRY.into();
        let effort: EntryId = effort_control::EFFORT_ENTRY.into();
        store.put_payload(
            &plan,
            &dt::ACTIVITY_HIERARCHY.into(),
            project_start(),
            encode(&hierarchy()),
        )?;
        for week in 1..=WEEKS {
            let at = report_time(week);
            store.put_payload(&baseline, &dt::CONTROL_METRIC.into(), at, encode(&weekly_baseline()))?;
            store.put_payload(&effort, &dt::EFFORT_TABLE.into(), at, encode(&weekly_effort(week)))?;
            runtime.propagate_update(&catena, &mut store, &[baseline.clone(), effort.clone()], at)?;
        }
        Ok((catena, store))
    }

    fn encode<T: serde::Serialize>(v: &T) -> Value {
        serde_json::to_value(v).expect("serializable")
    }
}
