//! Earned value analysis with linear time-phasing of planned value.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use super::types::{Activity, ActivityHierarchy, ControlMetric, EvaReport};
use super::TechniqueError;

/// Share of an activity's calendar duration elapsed at `status`, clamped to
/// [0, 1]. A zero-length activity counts as fully planned from its end date.
pub fn planned_fraction(activity: &Activity, status: NaiveDate) -> f64 {
    let span = (activity.end - activity.start).num_days();
    if span <= 0 {
        return if status >= activity.end { 1.0 } else { 0.0 };
    }
    let elapsed = (status - activity.start).num_days();
    (elapsed as f64 / span as f64).clamp(0.0, 1.0)
}

pub fn parse_status_date(s: &str) -> Result<NaiveDate, TechniqueError> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| TechniqueError::Param(format!("status date `{s}` is not a valid date")))
}

/// Computes PV, EV, AC and derived variances and indices at `status_date`.
///
/// Budget at completion per leaf is its baseline effort. Progress is read per
/// leaf (missing leaves count as 0). Actual cost is taken from the topmost
/// activity on each root path that carries a cost value, so both leaf-level
/// and already-aggregated cost metrics are counted once.
pub fn earned_value_analysis(
    hierarchy: &ActivityHierarchy,
    progress: &ControlMetric,
    cost: &ControlMetric,
    status_date: NaiveDate,
) -> Result<EvaReport, TechniqueError> {
    hierarchy.check()?;
    let progress = progress.to_map()?;
    let cost = cost.to_map()?;
    let leaves = hierarchy.leaves();

    let (mut bac, mut pv, mut ev) = (0.0, 0.0, 0.0);
    for leaf in &leaves {
        let p = progress.get(&leaf.id).copied().unwrap_or(0.0);
        if !(0.0..=1.0).contains(&p) {
            return Err(TechniqueError::invalid(format!(
                "progress {p} of `{}` is outside [0, 1]",
                leaf.id
            )));
        }
        bac += leaf.baseline_effort_h;
        pv += leaf.baseline_effort_h * planned_fraction(leaf, status_date);
        ev += leaf.baseline_effort_h * p;
    }

    let children = hierarchy.children();
    let ac = hierarchy
        .roots()
        .into_iter()
        .map(|r| covered_cost(r, &children, &cost))
        .sum::<f64>();

    Ok(EvaReport {
        status_date,
        bac,
        pv,
        ev,
        ac,
        sv: ev - pv,
        cv: ev - ac,
        spi: (pv > 0.0).then(|| ev / pv),
        cpi: (ac > 0.0).then(|| ev / ac),
    })
}

fn covered_cost(activity: &str, children: &BTreeMap<&str, Vec<&str>>, cost: &BTreeMap<String, f64>) -> f64 {
    match cost.get(activity) {
        Some(c) => *c,
        None => children[activity].iter().map(|c| covered_cost(c, children, cost)).sum(),
    }
}
