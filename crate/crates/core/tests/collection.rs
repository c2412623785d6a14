use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use watchtower_core::builtin::{self, forms, types as dt};
use watchtower_core::collection::{
    import_effort_table, import_project_plan, poll_due, pull_entry, submit_form, DaoRegistry, FormError,
    FormSubmission, PullError, PullState, SubmissionContent,
};
use watchtower_core::ids::EntryId;
use watchtower_core::model::{Catena, DataEntry, WebFormInstance};
use watchtower_core::store::{MemoryStore, PayloadStore};
use watchtower_core::testkit::{effort_control, ts};

#[test]
fn plan_import_three_rows() {
    let text = "activity_id,parent_id,name,start,end,baseline_effort_h\n\
                root,,Root,2024-01-01,2024-03-31,100\n\
                A,root,A,2024-01-01,2024-02-01,60\n\
                B,root,B,2024-02-01,2024-03-31,40\n";
    let (h, baseline) = import_project_plan(text).unwrap();
    assert_eq!(h.activities.len(), 3);
    assert_eq!(baseline.entries.len(), 3);
    assert_eq!(h.roots(), vec!["root"]);
}

#[test]
fn plan_import_errors() {
    let header = "activity_id,parent_id,name,start,end,baseline_effort_h\n";
    let err = import_project_plan(&format!(
        "{header}root,,R,2024-01-01,2024-01-02,1\nA,X,A,2024-01-01,2024-01-02,1\n"
    ))
    .unwrap_err();
    assert!(err.to_string().contains("dangling parent X at row 2"), "{err}");
    assert_eq!(import_project_plan(header).unwrap_err().to_string(), "no activities");
}

#[test]
fn effort_import_negative_hours() {
    let err =
        import_effort_table("person_id,activity_id,date,hours\nann,A,2024-01-01,2\nbob,A,2024-01-02,-1\n").unwrap_err();
    assert_eq!(err.issues()[0].row, 2);
}

#[test]
fn effort_import_thousand_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut text = String::from("person_id,activity_id,date,hours\n");
    let mut hours_col = Vec::new();
    for i in 0..1000 {
        let hours = format!(
            "{}.{}",
            rng.gen_range(0..12),
            ["25", "5", "75", "0"][rng.gen_range(0..4)]
        );
        let hours = if hours == "0.0" { "1.0".to_owned() } else { hours };
        writeln!(
            text,
            "p{},A{},2024-{:02}-{:02},{hours}",
            i % 7,
            i % 13,
            1 + i % 12,
            1 + i % 28
        )
        .unwrap();
        hours_col.push(hours);
    }
    let table = import_effort_table(&text).unwrap();
    assert_eq!(table.records.len(), 1000);
    let column: f64 = hours_col.iter().map(|h| h.parse::<f64>().unwrap()).sum();
    let parsed: f64 = table.records.iter().map(|r| r.hours).sum();
    assert_eq!(parsed, column);
    assert_eq!(import_effort_table(&text).unwrap(), table);
}

#[test]
fn poll_due_rule() {
    let c = effort_control::catena();
    let effort: EntryId = effort_control::EFFORT_ENTRY.into();
    let t = ts(1_710_000_000);
    let mut state = PullState::default();
    assert_eq!(poll_due(&c, &state, t), vec![effort.clone()]);
    state.last_pulled.insert(effort.clone(), t);
    assert!(poll_due(&c, &state, t + chrono::Duration::hours(23)).is_empty());
    assert_eq!(poll_due(&c, &state, t + chrono::Duration::hours(24)), vec![effort]);
    assert!(poll_due(&c, &PullState::default(), ts(1_800_000_000)).is_empty());
}

fn effort_entry(c: &Catena) -> &DataEntry {
    c.data_entries
        .iter()
        .find(|e| e.id.as_str() == effort_control::EFFORT_ENTRY)
        .unwrap()
}

#[test]
fn pull_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = effort_control::catena();
    let registry = builtin::registry();
    let daos = DaoRegistry::builtin(dir.path());
    let mut store = MemoryStore::new();
    let mut state = PullState::default();
    let entry = effort_entry(&c);

    let err = pull_entry(entry, &registry, &daos, &mut store, &mut state, ts(1)).unwrap_err();
    assert!(matches!(err, PullError::Unreachable { .. }), "{err}");
    assert_eq!(store.latest_version(&entry.id), 0);
    assert!(state.last_pulled.is_empty());

    std::fs::write(dir.path().join(effort_control::EFFORT_FILE), effort_control::EFFORT_CSV).unwrap();
    let p1 = pull_entry(entry, &registry, &daos, &mut store, &mut state, ts(2)).unwrap();
    assert_eq!(p1.version, 1);
    assert_eq!(state.last_pulled[&entry.id], ts(2));

    let p2 = pull_entry(entry, &registry, &daos, &mut store, &mut state, ts(3)).unwrap();
    assert_eq!(p2.version, 2);
    assert_eq!(p1.body, p2.body);

    std::fs::write(
        dir.path().join(effort_control::EFFORT_FILE),
        format!("{}dan,B,2024-03-05,4\n", effort_control::EFFORT_CSV),
    )
    .unwrap();
    let p3 = pull_entry(entry, &registry, &daos, &mut store, &mut state, ts(4)).unwrap();
    assert_eq!(p3.version, 3);
    assert_ne!(p3.body, p2.body);

    std::fs::write(
        dir.path().join(effort_control::EFFORT_FILE),
        "person_id,activity_id,date,hours\nx,A,nope,1\n",
    )
    .unwrap();
    assert!(pull_entry(entry, &registry, &daos, &mut store, &mut state, ts(5)).is_err());
    assert_eq!(store.latest_version(&entry.id), 3);
    assert_eq!(state.last_pulled[&entry.id], ts(4));
}

fn effort_form_catena() -> Catena {
    let mut c = Catena::new("c", "p");
    c.data_entries.push(DataEntry::form("effort-entry", dt::EFFORT_TABLE));
    c.web_forms.push(WebFormInstance {
        id: "log-effort".into(),
        spec: forms::EFFORT_ENTRY.into(),
        bindings: BTreeMap::from([(dt::EFFORT_TABLE.into(), "effort-entry".into())]),
        fields: BTreeMap::new(),
    });
    c
}

fn submission(form: &str, content: SubmissionContent) -> FormSubmission {
    FormSubmission {
        form: form.into(),
        submitted_by: "ann".into(),
        submitted_at: ts(100),
        content,
    }
}

#[test]
fn manual_entry_appends() {
    let c = effort_form_catena();
    let registry = builtin::registry();
    let mut store = MemoryStore::new();
    let values = |hours: f64| SubmissionContent::Values {
        values: BTreeMap::from([
            ("person".to_owned(), json!("ann")),
            ("activity".to_owned(), json!("A1")),
            ("date".to_owned(), json!("2024-01-08")),
            ("hours".to_owned(), json!(hours)),
        ]),
    };
    let changed = submit_form(&submission("log-effort", values(3.5)), &c, &registry, &mut store).unwrap();
    assert_eq!(changed, vec![EntryId::from("effort-entry")]);
    assert_eq!(store.latest_version(&"effort-entry".into()), 1);

    submit_form(&submission("log-effort", values(2.0)), &c, &registry, &mut store).unwrap();
    let body = store.latest(&"effort-entry".into()).unwrap().body;
    assert_eq!(body["records"].as_array().unwrap().len(), 2);

    let err = submit_form(&submission("log-effort", values(-1.0)), &c, &registry, &mut store).unwrap_err();
    let FormError::Rejected(v) = &err else { panic!("{err}") };
    assert_eq!(v[0].path, "hours");
    assert_eq!(store.latest_version(&"effort-entry".into()), 2);
}

#[test]
fn plan_upload_bumps_both_entries() {
    let c = effort_control::catena();
    let registry = builtin::registry();
    let mut store = MemoryStore::new();
    let file = |content: &str| SubmissionContent::File {
        format: builtin::parsers::PLAN_CSV.into(),
        content: content.into(),
    };
    let mut changed = submit_form(
        &submission(effort_control::PLAN_FORM, file(effort_control::PLAN_CSV)),
        &c,
        &registry,
        &mut store,
    )
    .unwrap();
    changed.sort();
    assert_eq!(
        changed,
        vec![
            EntryId::from(effort_control::BASELINE_ENTRY),
            EntryId::from(effort_control::PLAN_ENTRY)
        ]
    );

    let broken = effort_control::PLAN_CSV.replace("A2,A,", "A2,Q,");
    let err = submit_form(
        &submission(effort_control::PLAN_FORM, file(&broken)),
        &c,
        &registry,
        &mut store,
    )
    .unwrap_err();
    assert!(err.is_rejection());
    assert_eq!(store.latest_version(&effort_control::PLAN_ENTRY.into()), 1);
    assert_eq!(store.latest_version(&effort_control::BASELINE_ENTRY.into()), 1);
}

#[test]
fn unknown_form_and_wrong_format() {
    let c = effort_control::catena();
    let registry = builtin::registry();
    let mut store = MemoryStore::new();
    let err = submit_form(
        &submission(
            "nope",
            SubmissionContent::Values {
                values: BTreeMap::new(),
            },
        ),
        &c,
        &registry,
        &mut store,
    )
    .unwrap_err();
    assert!(matches!(err, FormError::UnknownForm(_)));
    let err = submit_form(
        &submission(
            effort_control::PLAN_FORM,
            SubmissionContent::File {
                format: builtin::parsers::EFFORT_CSV.into(),
                content: effort_control::EFFORT_CSV.into(),
            },
        ),
        &c,
        &registry,
        &mut store,
    )
    .unwrap_err();
    assert!(
        err.is_rejection() || matches!(err, FormError::Misconfigured { .. }),
        "{err}"
    );
    assert_eq!(store.entry_ids().count(), 0);
}
