//! Typed views of the built-in data types. Bodies travel as JSON values;
//! techniques decode them into these structs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, NaiveDate, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::TechniqueError;
use crate::model::schema::parse_timestamp;

/// Serde adapter for calendar dates that also accepts RFC 3339 timestamps.
pub mod date_flex {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&d.format("%Y-%m-%d"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s)
            .map(|t| t.date_naive())
            .ok_or_else(|| serde::de::Error::custom(format!("invalid date `{s}`")))
    }
}

/// Serde adapter for UTC timestamps that also accepts calendar dates.
pub mod timestamp_flex {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(with = "date_flex")]
    pub start: NaiveDate,
    #[serde(with = "date_flex")]
    pub end: NaiveDate,
    pub baseline_effort_h: f64,
}

/// Hierarchical project activities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityHierarchy {
    pub activities: Vec<Activity>,
}

impl ActivityHierarchy {
    /// Checks id uniqueness, parent resolution, acyclicity, date order, and
    /// non-negative baselines.
    pub fn check(&self) -> Result<(), TechniqueError> {
        let mut ids = BTreeSet::new();
        for a in &self.activities {
            if !ids.insert(a.id.as_str()) {
                return Err(TechniqueError::invalid(format!("duplicate activity `{}`", a.id)));
            }
            if a.start > a.end {
                return Err(TechniqueError::invalid(format!(
                    "activity `{}` starts after it ends",
                    a.id
                )));
            }
            if !(0.0..).contains(&a.baseline_effort_h) {
                return Err(TechniqueError::invalid(format!(
                    "activity `{}` has a negative baseline",
                    a.id
                )));
            }
        }
        for a in &self.activities {
            if let Some(p) = &a.parent {
                if !ids.contains(p.as_str()) {
                    return Err(TechniqueError::invalid(format!(
                        "activity `{}` has unknown parent `{p}`",
                        a.id
                    )));
                }
            }
        }
        if self.top_down_order().len() != self.activities.len() {
            return Err(TechniqueError::invalid("parent references form a cycle"));
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Activity> {
        self.activities.iter().find(|a| a.id == id)
    }

    /// Child ids per activity id, sorted.
    pub fn children(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> = self.activities.iter().map(|a| (a.id.as_str(), Vec::new())).collect();
        for a in &self.activities {
            if let Some(p) = &a.parent {
                if let Some(v) = map.get_mut(p.as_str()) {
                    v.push(a.id.as_str());
                }
            }
        }
        for v in map.values_mut() {
            v.sort_unstable();
        }
        map
    }

    pub fn roots(&self) -> Vec<&str> {
        let mut r: Vec<&str> = self
            .activities
            .iter()
            .filter(|a| a.parent.is_none())
            .map(|a| a.id.as_str())
            .collect();
        r.sort_unstable();
        r
    }

    pub fn leaves(&self) -> Vec<&Activity> {
        let children = self.children();
        let mut v: Vec<&Activity> = self
            .activities
            .iter()
            .filter(|a| children[a.id.as_str()].is_empty())
            .collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// Breadth-first order from the roots; parents precede children.
    /// Activities on parent cycles are omitted.
    pub fn top_down_order(&self) -> Vec<&str> {
        let children = self.children();
        let mut order = Vec::with_capacity(self.activities.len());
        let mut queue: VecDeque<&str> = self.roots().into();
        while let Some(a) = queue.pop_front() {
            order.push(a);
            queue.extend(children.get(a).into_iter().flatten().copied());
        }
        order
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub activity: String,
    pub value: f64,
}

/// One number per activity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlMetric {
    pub entries: Vec<MetricEntry>,
}

impl ControlMetric {
    pub fn from_map(map: &BTreeMap<String, f64>) -> Self {
        Self {
            entries: map
                .iter()
                .map(|(k, v)| MetricEntry {
                    activity: k.clone(),
                    value: *v,
                })
                .collect(),
        }
    }

    /// Values keyed by activity; duplicate keys are rejected.
    pub fn to_map(&self) -> Result<BTreeMap<String, f64>, TechniqueError> {
        let mut map = BTreeMap::new();
        for e in &self.entries {
            if map.insert(e.activity.clone(), e.value).is_some() {
                return Err(TechniqueError::invalid(format!(
                    "duplicate metric key `{}`",
                    e.activity
                )));
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortRecord {
    pub person: String,
    pub activity: String,
    #[serde(with = "date_flex")]
    pub date: NaiveDate,
    pub hours: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EffortTable {
    pub records: Vec<EffortRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Green,
    Yellow,
    Red,
    NoBaseline,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Green => "green",
            Status::Yellow => "yellow",
            Status::Red => "red",
            Status::NoBaseline => "no-baseline",
        }
    }

    /// Severity rank for ordered comparison; `None` for no-baseline.
    pub fn severity(self) -> Option<u8> {
        match self {
            Status::Green => Some(0),
            Status::Yellow => Some(1),
            Status::Red => Some(2),
            Status::NoBaseline => None,
        }
    }

    /// True for yellow and red.
    pub fn is_alert(self) -> bool {
        matches!(self, Status::Yellow | Status::Red)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub activity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planned: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<f64>,
    pub status: Status,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTable {
    pub rows: Vec<IndicatorRow>,
}

impl IndicatorTable {
    /// Worst alert status over all rows, if any row is yellow or red.
    pub fn worst_alert(&self) -> Option<Status> {
        self.rows
            .iter()
            .map(|r| r.status)
            .filter(|s| s.is_alert())
            .max_by_key(|s| s.severity())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    #[serde(with = "timestamp_flex")]
    pub t: DateTime<Utc>,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub points: Vec<Point>,
}

impl TimeSeries {
    pub fn check(&self) -> Result<(), TechniqueError> {
        if self.points.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(TechniqueError::invalid(
                "time series timestamps must be strictly increasing",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaReport {
    #[serde(with = "date_flex")]
    pub status_date: NaiveDate,
    pub bac: f64,
    pub pv: f64,
    pub ev: f64,
    pub ac: f64,
    pub sv: f64,
    pub cv: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    #[serde(with = "date_flex")]
    pub reported: NaiveDate,
    #[serde(with = "date_flex")]
    pub forecast: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneSeries {
    pub milestone: String,
    pub reports: Vec<ForecastReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilestoneForecasts {
    pub milestones: Vec<MilestoneSeries>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendClass {
    Stable,
    Delayed,
    Accelerated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneClassified {
    pub milestone: String,
    pub classification: TrendClass,
    /// Least-squares slope of forecast date over reporting date, in days per day.
    pub slope: f64,
    pub reports: Vec<ForecastReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilestoneTrend {
    pub milestones: Vec<MilestoneClassified>,
}
