//! Built-in control components seeded into a fresh repository.

use serde_json::json;

use crate::model::spec::{
    AccessMode, ComponentBody, ComponentRegistry, Constraint, DaoPackageSpec, DataTypeDescriptor, FieldKind, FormMode,
    FunctionSpec, OutputPortSpec, ParamKind, ParamSpec, PortSpec, RenderKind, SchemaField, SlotSpec, ViewSpec,
    WebFormSpec,
};

/// Data type ids.
pub mod types {
    pub const ACTIVITY_HIERARCHY: &str = "activity-hierarchy";
    pub const CONTROL_METRIC: &str = "control-metric";
    pub const EFFORT_TABLE: &str = "effort-table";
    pub const INDICATOR_TABLE: &str = "indicator-table";
    pub const TIME_SERIES: &str = "time-series";
    pub const EVA_REPORT: &str = "eva-report";
    pub const MILESTONE_FORECASTS: &str = "milestone-forecasts";
    pub const MILESTONE_TREND: &str = "milestone-trend";
}

/// Technique implementation keys; built-in function specs use the same ids.
pub mod techniques {
    pub const AGGREGATE_EFFORT: &str = "agg.effort";
    pub const TOLERANCE_CHECK: &str = "check.tolerance";
    pub const EARNED_VALUE: &str = "eva.standard";
    pub const MILESTONE_TREND: &str = "mta.standard";
    pub const SCALE_SERIES: &str = "ts.scale";
    pub const EFFORT_TO_SERIES: &str = "conv.effort_ts";

    pub const ALL: [&str; 6] = [
        AGGREGATE_EFFORT,
        TOLERANCE_CHECK,
        EARNED_VALUE,
        MILESTONE_TREND,
        SCALE_SERIES,
        EFFORT_TO_SERIES,
    ];
}

/// DAO package ids.
pub mod daos {
    pub const FILE_PLAN: &str = "dao.file.plan";
    pub const FILE_EFFORT: &str = "dao.file.effort";
    pub const FILE_TIMESERIES: &str = "dao.file.timeseries";
}

/// File parser keys used by file-import forms and file DAO packages.
pub mod parsers {
    pub const PLAN_CSV: &str = "plan.csv";
    pub const EFFORT_CSV: &str = "effort.csv";
    pub const TIMESERIES_CSV: &str = "timeseries.csv";
    pub const MILESTONES_CSV: &str = "milestones.csv";
}

pub mod views {
    pub const EFFORT_BARS: &str = "view.effort-bars";
    pub const INDICATOR_LIGHTS: &str = "view.indicator-lights";
    pub const INDICATOR_TABLE: &str = "view.indicator-table";
    pub const METRIC_TABLE: &str = "view.metric-table";
    pub const EVA_TABLE: &str = "view.eva-table";
    pub const SERIES_LINE: &str = "view.series-line";
    pub const MILESTONE_TREND: &str = "view.milestone-trend";
    pub const PANEL: &str = "view.panel";
}

pub mod forms {
    pub const PLAN_IMPORT: &str = "form.plan-import";
    pub const EFFORT_IMPORT: &str = "form.effort-import";
    pub const EFFORT_ENTRY: &str = "form.effort-entry";
    pub const METRIC_ENTRY: &str = "form.metric-entry";
    pub const TIMESERIES_IMPORT: &str = "form.timeseries-import";
    pub const MILESTONE_IMPORT: &str = "form.milestone-import";
}

fn f(name: &str, kind: FieldKind) -> SchemaField {
    SchemaField::new(name, kind)
}

fn list(name: &str, fields: Vec<SchemaField>) -> SchemaField {
    SchemaField::new(name, FieldKind::RecordList(fields))
}

fn data_type(id: &str, name: &str, description: &str, fields: Vec<SchemaField>) -> ComponentBody {
    ComponentBody::DataType(DataTypeDescriptor {
        id: id.into(),
        name: name.into(),
        description: description.into(),
        fields,
        tags: vec![],
    })
}

fn tags(t: &[&str]) -> Vec<String> {
    t.iter().map(|s| s.to_string()).collect()
}

fn out(name: &str, data_type: &str) -> OutputPortSpec {
    OutputPortSpec {
        name: name.into(),
        data_type: data_type.into(),
    }
}

pub fn data_types() -> Vec<ComponentBody> {
    use FieldKind::*;
    let statuses = Constraint::OneOf(tags(&["green", "yellow", "red", "no-baseline"]));
    let classes = Constraint::OneOf(tags(&["stable", "delayed", "accelerated"]));
    vec![
        data_type(
            types::ACTIVITY_HIERARCHY,
            "Activity hierarchy",
            "Hierarchical project activities with dates and effort baseline.",
            vec![list(
                "activities",
                vec![
                    f("id", Reference),
                    f("name", Text),
                    f("parent", Reference).optional(),
                    f("start", Timestamp),
                    f("end", Timestamp),
                    f("baseline_effort_h", Number).with_constraint(Constraint::AtLeast(0.0)),
                ],
            )],
        ),
        data_type(
            types::CONTROL_METRIC,
            "Control metric",
            "One number per activity.",
            vec![list("entries", vec![f("activity", Reference), f("value", Number)])],
        ),
        data_type(
            types::EFFORT_TABLE,
            "Effort table",
            "Effort per team member, activity, and day.",
            vec![list(
                "records",
                vec![
                    f("person", Reference),
                    f("activity", Reference),
                    f("date", Timestamp),
                    f("hours", Number).with_constraint(Constraint::GreaterThan(0.0)),
                ],
            )],
        ),
        data_type(
            types::INDICATOR_TABLE,
            "Indicator table",
            "Per-activity deviation with traffic-light status.",
            vec![list(
                "rows",
                vec![
                    f("activity", Reference),
                    f("actual", Number).optional(),
                    f("planned", Number).optional(),
                    f("deviation", Number).optional(),
                    f("status", Text).with_constraint(statuses),
                ],
            )],
        ),
        data_type(
            types::TIME_SERIES,
            "Time series",
            "Timestamp and value pairs with strictly increasing timestamps.",
            vec![list("points", vec![f("t", Timestamp), f("value", Number)])],
        ),
        data_type(
            types::EVA_REPORT,
            "Earned value report",
            "Planned value, earned value, actual cost and derived indices at a status date.",
            vec![
                f("status_date", Timestamp),
                f("bac", Number),
                f("pv", Number),
                f("ev", Number),
                f("ac", Number),
                f("sv", Number),
                f("cv", Number),
                f("spi", Number).optional(),
                f("cpi", Number).optional(),
            ],
        ),
        data_type(
            types::MILESTONE_FORECASTS,
            "Milestone forecasts",
            "Forecast completion dates per milestone and reporting date.",
            vec![list(
                "milestones",
                vec![
                    f("milestone", Reference),
                    list("reports", vec![f("reported", Timestamp), f("forecast", Timestamp)]),
                ],
            )],
        ),
        data_type(
            types::MILESTONE_TREND,
            "Milestone trend",
            "Classified milestone forecast trends.",
            vec![list(
                "milestones",
                vec![
                    f("milestone", Reference),
                    f("classification", Text).with_constraint(classes),
                    f("slope", Number),
                    list("reports", vec![f("reported", Timestamp), f("forecast", Timestamp)]),
                ],
            )],
        ),
    ]
}

pub fn functions() -> Vec<ComponentBody> {
    use types::*;
    let spec = |id: &str, name: &str, inputs, outputs, params, t: &[&str]| {
        ComponentBody::Function(FunctionSpec {
            id: id.into(),
            name: name.into(),
            description: String::new(),
            inputs,
            outputs,
            params,
            implementation: id.into(),
            tags: tags(t),
        })
    };
    vec![
        spec(
            techniques::AGGREGATE_EFFORT,
            "Effort aggregation",
            vec![
                PortSpec::one("effort", EFFORT_TABLE),
                PortSpec::one("hierarchy", ACTIVITY_HIERARCHY),
            ],
            vec![out("actual", CONTROL_METRIC)],
            vec![],
            &["effort", "aggregation"],
        ),
        spec(
            techniques::TOLERANCE_CHECK,
            "Tolerance range checking",
            vec![
                PortSpec::one("actual", CONTROL_METRIC),
                PortSpec::one("baseline", CONTROL_METRIC),
            ],
            vec![out("indicators", INDICATOR_TABLE)],
            vec![
                ParamSpec::new("yellow", ParamKind::Number)
                    .with_default(json!(0.1))
                    .with_constraint(Constraint::AtLeast(0.0)),
                ParamSpec::new("red", ParamKind::Number)
                    .with_default(json!(0.2))
                    .with_constraint(Constraint::AtLeast(0.0)),
                ParamSpec::new("mode", ParamKind::Text)
                    .with_default(json!("above-only"))
                    .with_constraint(Constraint::OneOf(tags(&["above-only", "below-only", "two-sided"]))),
            ],
            &["effort", "tolerance", "deviation"],
        ),
        spec(
            techniques::EARNED_VALUE,
            "Earned value analysis",
            vec![
                PortSpec::one("hierarchy", ACTIVITY_HIERARCHY),
                PortSpec::one("progress", CONTROL_METRIC),
                PortSpec::one("cost", CONTROL_METRIC),
            ],
            vec![out("report", EVA_REPORT)],
            vec![ParamSpec::new("status_date", ParamKind::Date)],
            &["earned-value", "cost", "schedule"],
        ),
        spec(
            techniques::MILESTONE_TREND,
            "Milestone trend analysis",
            vec![PortSpec::one("forecasts", MILESTONE_FORECASTS)],
            vec![out("trend", MILESTONE_TREND)],
            vec![ParamSpec::new("dead_band", ParamKind::Number)
                .with_default(json!(0.05))
                .with_constraint(Constraint::AtLeast(0.0))],
            &["schedule", "milestone", "trend"],
        ),
        spec(
            techniques::SCALE_SERIES,
            "Scale time series",
            vec![PortSpec::one("series", TIME_SERIES)],
            vec![out("scaled", TIME_SERIES)],
            vec![ParamSpec::new("factor", ParamKind::Number).with_default(json!(1.0))],
            &["conversion", "time-series", "scaling"],
        ),
        spec(
            techniques::EFFORT_TO_SERIES,
            "Effort table to time series",
            vec![PortSpec::one("effort", EFFORT_TABLE)],
            vec![out("series", TIME_SERIES)],
            vec![ParamSpec::new("bucket_s", ParamKind::Integer)
                .with_default(json!(86_400))
                .with_constraint(Constraint::GreaterThan(0.0))],
            &["conversion", "effort", "time-series"],
        ),
    ]
}

pub fn views() -> Vec<ComponentBody> {
    use types::*;
    let spec = |id: &str, name: &str, render, inputs, t: &[&str]| {
        ComponentBody::View(ViewSpec {
            id: id.into(),
            name: name.into(),
            description: String::new(),
            inputs,
            params: vec![],
            render,
            slots: vec![],
            tags: tags(t),
        })
    };
    let mut v = vec![
        spec(
            views::EFFORT_BARS,
            "Effort deviation bars",
            RenderKind::BarChartDrilldown,
            vec![
                PortSpec::one("indicators", INDICATOR_TABLE),
                PortSpec::one("hierarchy", ACTIVITY_HIERARCHY),
            ],
            &["effort", "deviation", "drilldown"],
        ),
        spec(
            views::INDICATOR_LIGHTS,
            "Indicator traffic lights",
            RenderKind::TrafficLight,
            vec![PortSpec::one("indicators", INDICATOR_TABLE)],
            &["deviation", "status"],
        ),
        spec(
            views::INDICATOR_TABLE,
            "Indicator table",
            RenderKind::Table,
            vec![PortSpec::one("data", INDICATOR_TABLE)],
            &["deviation"],
        ),
        spec(
            views::METRIC_TABLE,
            "Metric table",
            RenderKind::Table,
            vec![PortSpec::one("data", CONTROL_METRIC)],
            &["metric"],
        ),
        spec(
            views::EVA_TABLE,
            "Earned value table",
            RenderKind::Table,
            vec![PortSpec::one("data", EVA_REPORT)],
            &["earned-value"],
        ),
        spec(
            views::SERIES_LINE,
            "Time series line chart",
            RenderKind::LineChart,
            vec![PortSpec::many("series", TIME_SERIES)],
            &["time-series"],
        ),
        spec(
            views::MILESTONE_TREND,
            "Milestone trend chart",
            RenderKind::MilestoneTrendChart,
            vec![PortSpec::one("trend", MILESTONE_TREND)],
            &["milestone", "trend"],
        ),
    ];
    v.push(ComponentBody::View(ViewSpec {
        id: views::PANEL.into(),
        name: "Two-panel overview".into(),
        description: "Indicator traffic light with a detail view beside it.".into(),
        inputs: vec![PortSpec::one("indicators", INDICATOR_TABLE)],
        params: vec![],
        render: RenderKind::TrafficLight,
        slots: vec![
            SlotSpec {
                name: "left".into(),
                accepts: None,
            },
            SlotSpec {
                name: "right".into(),
                accepts: None,
            },
        ],
        tags: tags(&["overview"]),
    }));
    v
}

pub fn web_forms() -> Vec<ComponentBody> {
    use types::*;
    use FieldKind::*;
    let import = |id: &str, name: &str, targets: &[&str], parser: &str, t: &[&str]| {
        ComponentBody::WebForm(WebFormSpec {
            id: id.into(),
            name: name.into(),
            targets: targets.iter().map(|s| (*s).into()).collect(),
            mode: FormMode::FileImport { parser: parser.into() },
            tags: tags(t),
        })
    };
    vec![
        import(
            forms::PLAN_IMPORT,
            "Project plan upload",
            &[ACTIVITY_HIERARCHY, CONTROL_METRIC],
            parsers::PLAN_CSV,
            &["plan", "baseline"],
        ),
        import(
            forms::EFFORT_IMPORT,
            "Effort file upload",
            &[EFFORT_TABLE],
            parsers::EFFORT_CSV,
            &["effort"],
        ),
        import(
            forms::TIMESERIES_IMPORT,
            "Time series upload",
            &[TIME_SERIES],
            parsers::TIMESERIES_CSV,
            &["time-series"],
        ),
        import(
            forms::MILESTONE_IMPORT,
            "Milestone forecast upload",
            &[MILESTONE_FORECASTS],
            parsers::MILESTONES_CSV,
            &["milestone"],
        ),
        ComponentBody::WebForm(WebFormSpec {
            id: forms::EFFORT_ENTRY.into(),
            name: "Effort entry".into(),
            targets: vec![EFFORT_TABLE.into()],
            mode: FormMode::ManualEntry {
                record_field: "records".into(),
                fields: vec![
                    f("person", Reference),
                    f("activity", Reference),
                    f("date", Timestamp),
                    f("hours", Number).with_constraint(Constraint::GreaterThan(0.0)),
                ],
                append: true,
                key: None,
            },
            tags: tags(&["effort"]),
        }),
        ComponentBody::WebForm(WebFormSpec {
            id: forms::METRIC_ENTRY.into(),
            name: "Metric value entry".into(),
            targets: vec![CONTROL_METRIC.into()],
            mode: FormMode::ManualEntry {
                record_field: "entries".into(),
                fields: vec![f("activity", Reference), f("value", Number)],
                append: true,
                key: Some("activity".into()),
            },
            tags: tags(&["metric"]),
        }),
    ]
}

pub fn dao_packages() -> Vec<ComponentBody> {
    use types::*;
    let dao = |id: &str, name: &str, supports: &[&str], t: &[&str]| {
        ComponentBody::DaoPackage(DaoPackageSpec {
            id: id.into(),
            name: name.into(),
            supports: supports.iter().map(|s| (*s).into()).collect(),
            connection: vec![ParamSpec::new("path", ParamKind::Text)],
            access: AccessMode::Pull,
            tags: tags(t),
        })
    };
    vec![
        dao(
            daos::FILE_PLAN,
            "Plan file",
            &[ACTIVITY_HIERARCHY, CONTROL_METRIC],
            &["plan", "file"],
        ),
        dao(daos::FILE_EFFORT, "Effort file", &[EFFORT_TABLE], &["effort", "file"]),
        dao(
            daos::FILE_TIMESERIES,
            "Time series file",
            &[TIME_SERIES],
            &["time-series", "file"],
        ),
    ]
}

/// Every built-in component, data types first.
pub fn all() -> Vec<ComponentBody> {
    let mut v = data_types();
    v.extend(dao_packages());
    v.extend(functions());
    v.extend(views());
    v.extend(web_forms());
    v
}

pub fn registry() -> ComponentRegistry {
    let mut r = ComponentRegistry::new();
    for body in all() {
        r.insert(body);
    }
    r
}
