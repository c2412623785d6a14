//! Parsers for the delimited-text interchange formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde_json::Value;
use thiserror::Error;

use crate::builtin::{parsers, types as dt};
use crate::ids::ComponentId;
use crate::model::parse_timestamp;
use crate::techniques::encode;
use crate::techniques::types::{
    Activity, ActivityHierarchy, ControlMetric, EffortRecord, EffortTable, ForecastReport, MilestoneForecasts,
    MilestoneSeries, Point, TimeSeries,
};

pub const PLAN_HEADER: [&str; 6] = ["activity_id", "parent_id", "name", "start", "end", "baseline_effort_h"];
pub const EFFORT_HEADER: [&str; 4] = ["person_id", "activity_id", "date", "hours"];
pub const TIMESERIES_HEADER: [&str; 2] = ["timestamp", "value"];
pub const MILESTONES_HEADER: [&str; 3] = ["milestone", "reported", "forecast"];

/// A problem with one data row. Rows are numbered from 1, not counting the
/// header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIssue {
    pub row: usize,
    pub message: String,
}

impl fmt::Display for RowIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at row {}", self.message, self.row)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImportError {
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Rows(Vec<RowIssue>),
    #[error("no activities")]
    NoActivities,
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
}

impl ImportError {
    pub fn issues(&self) -> &[RowIssue] {
        match self {
            ImportError::Rows(v) => v,
            _ => &[],
        }
    }
}

struct Rows {
    records: Vec<(usize, csv::StringRecord)>,
}

fn read_rows(text: &str, header: &[&str]) -> Result<Rows, ImportError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| ImportError::Malformed(e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(ImportError::Malformed(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| ImportError::Malformed(format!("row {}: {e}", i + 1)))?;
        records.push((i + 1, rec));
    }
    Ok(Rows { records })
}

fn date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

fn number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn issue(row: usize, message: impl Into<String>) -> RowIssue {
    RowIssue {
        row,
        message: message.into(),
    }
}

/// Parses a project plan into its activity hierarchy and baseline effort.
pub fn import_project_plan(text: &str) -> Result<(ActivityHierarchy, ControlMetric), ImportError> {
    let rows = read_rows(text, &PLAN_HEADER)?;
    if rows.records.is_empty() {
        return Err(ImportError::NoActivities);
    }
    let mut issues = Vec::new();
    let mut activities = Vec::new();
    let mut rows_of: BTreeMap<String, usize> = BTreeMap::new();
    for (row, r) in &rows.records {
        let (id, parent, name, start, end, baseline) = (&r[0], &r[1], &r[2], &r[3], &r[4], &r[5]);
        if id.is_empty() {
            issues.push(issue(*row, "empty activity id"));
            continue;
        }
        if rows_of.insert(id.to_owned(), *row).is_some() {
            issues.push(issue(*row, format!("duplicate activity {id}")));
            continue;
        }
        let (Some(start_d), Some(end_d)) = (date(start), date(end)) else {
            issues.push(issue(*row, format!("unparseable date for activity {id}")));
            continue;
        };
        if start_d > end_d {
            issues.push(issue(*row, format!("start after end for activity {id}")));
        }
        let baseline_h = match number(baseline) {
            Some(b) if b >= 0.0 => b,
            _ => {
                issues.push(issue(
                    *row,
                    format!("invalid baseline effort `{baseline}` for activity {id}"),
                ));
                continue;
            }
        };
        activities.push((
            *row,
            Activity {
                id: id.to_owned(),
                name: name.to_owned(),
                parent: (!parent.is_empty()).then(|| parent.to_owned()),
                start: start_d,
                end: end_d,
                baseline_effort_h: baseline_h,
            },
        ));
    }
    for (row, a) in &activities {
        if let Some(p) = &a.parent {
            if !rows_of.contains_key(p) {
                issues.push(issue(*row, format!("dangling parent {p}")));
            }
        }
    }
    if issues.is_empty() {
        if let Some((row, a)) = activities.iter().find(|(_, a)| on_parent_cycle(a, &activities)) {
            issues.push(issue(*row, format!("parent cycle through activity {}", a.id)));
        }
    }
    if !issues.is_empty() {
        issues.sort_by_key(|i| i.row);
        return Err(ImportError::Rows(issues));
    }
    let activities: Vec<Activity> = activities.into_iter().map(|(_, a)| a).collect();
    let baseline = ControlMetric::from_map(&activities.iter().map(|a| (a.id.clone(), a.baseline_effort_h)).collect());
    Ok((ActivityHierarchy { activities }, baseline))
}

fn on_parent_cycle(start: &Activity, all: &[(usize, Activity)]) -> bool {
    let parent_of: BTreeMap<&str, Option<&str>> =
        all.iter().map(|(_, a)| (a.id.as_str(), a.parent.as_deref())).collect();
    let mut seen = BTreeSet::new();
    let mut cur = Some(start.id.as_str());
    while let Some(id) = cur {
        if !seen.insert(id) {
            return id == start.id;
        }
        cur = parent_of.get(id).copied().flatten();
    }
    false
}

/// Parses an effort file; hours must be positive decimals.
pub fn import_effort_table(text: &str) -> Result<EffortTable, ImportError> {
    let rows = read_rows(text, &EFFORT_HEADER)?;
    let mut issues = Vec::new();
    let mut records = Vec::with_capacity(rows.records.len());
    for (row, r) in &rows.records {
        let d = date(&r[2]);
        let h = number(&r[3]);
        match (d, h) {
            (None, _) => issues.push(issue(*row, format!("unparseable date `{}`", &r[2]))),
            (_, None) => issues.push(issue(*row, format!("unparseable hours `{}`", &r[3]))),
            (_, Some(h)) if h <= 0.0 => issues.push(issue(*row, format!("non-positive hours {h}"))),
            (Some(date), Some(hours)) => records.push(EffortRecord {
                person: r[0].to_owned(),
                activity: r[1].to_owned(),
                date,
                hours,
            }),
        }
    }
    if issues.is_empty() {
        Ok(EffortTable { records })
    } else {
        Err(ImportError::Rows(issues))
    }
}

/// Parses `timestamp,value` rows; timestamps must strictly increase.
pub fn import_time_series(text: &str) -> Result<TimeSeries, ImportError> {
    let rows = read_rows(text, &TIMESERIES_HEADER)?;
    let mut issues = Vec::new();
    let mut points: Vec<Point> = Vec::new();
    for (row, r) in &rows.records {
        match (parse_timestamp(&r[0]), number(&r[1])) {
            (None, _) => issues.push(issue(*row, format!("unparseable timestamp `{}`", &r[0]))),
            (_, None) => issues.push(issue(*row, format!("unparseable value `{}`", &r[1]))),
            (Some(t), Some(value)) => {
                if points.last().is_some_and(|p| p.t >= t) {
                    issues.push(issue(*row, "timestamp not after previous row"));
                } else {
                    points.push(Point { t, value });
                }
            }
        }
    }
    if issues.is_empty() {
        Ok(TimeSeries { points })
    } else {
        Err(ImportError::Rows(issues))
    }
}

/// Parses `milestone,reported,forecast` rows, grouped by milestone id.
pub fn import_milestones(text: &str) -> Result<MilestoneForecasts, ImportError> {
    let rows = read_rows(text, &MILESTONES_HEADER)?;
    let mut issues = Vec::new();
    let mut by_id: BTreeMap<String, Vec<ForecastReport>> = BTreeMap::new();
    for (row, r) in &rows.records {
        match (date(&r[1]), date(&r[2])) {
            (Some(reported), Some(forecast)) => by_id
                .entry(r[0].to_owned())
                .or_default()
                .push(ForecastReport { reported, forecast }),
            _ => issues.push(issue(*row, "unparseable date")),
        }
    }
    if !issues.is_empty() {
        return Err(ImportError::Rows(issues));
    }
    Ok(MilestoneForecasts {
        milestones: by_id
            .into_iter()
            .map(|(milestone, reports)| MilestoneSeries { milestone, reports })
            .collect(),
    })
}

/// Parser keys known to [`parse_document`].
pub const PARSER_KEYS: [&str; 4] = [
    parsers::PLAN_CSV,
    parsers::EFFORT_CSV,
    parsers::TIMESERIES_CSV,
    parsers::MILESTONES_CSV,
];

/// Parses `text` with the parser registered under `key`, returning one body
/// per produced data type.
pub fn parse_document(key: &str, text: &str) -> Result<BTreeMap<ComponentId, Value>, ImportError> {
    let one = |t: &str, v: Value| BTreeMap::from([(ComponentId::new(t), v)]);
    match key {
        parsers::PLAN_CSV => {
            let (h, b) = import_project_plan(text)?;
            Ok(BTreeMap::from([
                (dt::ACTIVITY_HIERARCHY.into(), encode(&h)),
                (dt::CONTROL_METRIC.into(), encode(&b)),
            ]))
        }
        parsers::EFFORT_CSV => Ok(one(dt::EFFORT_TABLE, encode(&import_effort_table(text)?))),
        parsers::TIMESERIES_CSV => Ok(one(dt::TIME_SERIES, encode(&import_time_series(text)?))),
        parsers::MILESTONES_CSV => Ok(one(dt::MILESTONE_FORECASTS, encode(&import_milestones(text)?))),
        other => Err(ImportError::UnknownFormat(other.to_owned())),
    }
}
