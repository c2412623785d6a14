//! Effort aggregation and effort-to-series conversion.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveTime};

use super::types::{ActivityHierarchy, ControlMetric, EffortTable, Point, TimeSeries};
use super::TechniqueError;

/// Sums effort over each activity's subtree (inclusive). Every activity of the
/// hierarchy appears in the result, with 0 when nothing was booked on its
/// subtree.
pub fn aggregate_effort(effort: &EffortTable, hierarchy: &ActivityHierarchy) -> Result<ControlMetric, TechniqueError> {
    hierarchy.check()?;
    let mut own: BTreeMap<&str, f64> = hierarchy.activities.iter().map(|a| (a.id.as_str(), 0.0)).collect();
    for r in &effort.records {
        match own.get_mut(r.activity.as_str()) {
            Some(h) => *h += r.hours,
            None => return Err(TechniqueError::UnknownActivity(r.activity.clone())),
        }
    }
    let children = hierarchy.children();
    let mut total: BTreeMap<String, f64> = BTreeMap::new();
    for a in hierarchy.top_down_order().into_iter().rev() {
        let sum = children[a].iter().fold(own[a], |acc, c| acc + total[*c]);
        total.insert(a.to_owned(), sum);
    }
    Ok(ControlMetric::from_map(&total))
}

/// Buckets hours into fixed-width intervals aligned to midnight of the
/// earliest record's date. Empty buckets between the first and last are
/// emitted with value 0.
pub fn effort_to_time_series(effort: &EffortTable, bucket: Duration) -> Result<TimeSeries, TechniqueError> {
    if bucket <= Duration::zero() {
        return Err(TechniqueError::Param("bucket must be positive".into()));
    }
    let Some(first) = effort.records.iter().map(|r| r.date).min() else {
        return Ok(TimeSeries::default());
    };
    let origin = first.and_time(NaiveTime::MIN).and_utc();
    let width = bucket.num_seconds().max(1);
    let mut sums: BTreeMap<i64, f64> = BTreeMap::new();
    for r in &effort.records {
        let at = r.date.and_time(NaiveTime::MIN).and_utc();
        let idx = (at - origin).num_seconds().div_euclid(width);
        *sums.entry(idx).or_insert(0.0) += r.hours;
    }
    let last = *sums.keys().next_back().expect("non-empty");
    let points = (0..=last)
        .map(|i| Point {
            t: origin + Duration::seconds(i * width),
            value: sums.get(&i).copied().unwrap_or(0.0),
        })
        .collect();
    Ok(TimeSeries { points })
}
