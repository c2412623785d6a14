//! Tolerance range checking of an actual metric against a baseline.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::types::{ControlMetric, IndicatorRow, IndicatorTable, Status};
use super::TechniqueError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceMode {
    AboveOnly,
    BelowOnly,
    TwoSided,
}

impl ToleranceMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "above-only" => Some(Self::AboveOnly),
            "below-only" => Some(Self::BelowOnly),
            "two-sided" => Some(Self::TwoSided),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceParams {
    pub yellow: f64,
    pub red: f64,
    pub mode: ToleranceMode,
}

impl ToleranceParams {
    pub fn validate(&self) -> Result<(), TechniqueError> {
        if !(0.0..).contains(&self.yellow) || !(0.0..).contains(&self.red) {
            return Err(TechniqueError::Param("limits must be non-negative".into()));
        }
        if self.yellow > self.red {
            return Err(TechniqueError::Param(format!(
                "yellow limit {} exceeds red limit {}",
                self.yellow, self.red
            )));
        }
        Ok(())
    }
}

/// Classifies a relative deviation. Band boundaries are inclusive.
pub fn classify(deviation: f64, params: &ToleranceParams) -> Status {
    let severity = match params.mode {
        ToleranceMode::AboveOnly => deviation.max(0.0),
        ToleranceMode::BelowOnly => (-deviation).max(0.0),
        ToleranceMode::TwoSided => deviation.abs(),
    };
    if severity <= params.yellow {
        Status::Green
    } else if severity <= params.red {
        Status::Yellow
    } else {
        Status::Red
    }
}

/// Compares `actual` against `baseline` for every activity present in either.
/// A missing actual counts as 0; a missing or non-positive baseline yields
/// `no-baseline`.
pub fn tolerance_range_check(
    actual: &ControlMetric,
    baseline: &ControlMetric,
    params: &ToleranceParams,
) -> Result<IndicatorTable, TechniqueError> {
    params.validate()?;
    let actual = actual.to_map()?;
    let baseline = baseline.to_map()?;
    let keys: BTreeSet<&String> = actual.keys().chain(baseline.keys()).collect();
    let rows = keys
        .into_iter()
        .map(|k| {
            let a = actual.get(k).copied();
            let b = baseline.get(k).copied();
            match b {
                Some(b) if b > 0.0 => {
                    let d = (a.unwrap_or(0.0) - b) / b;
                    IndicatorRow {
                        activity: k.clone(),
                        actual: Some(a.unwrap_or(0.0)),
                        planned: Some(b),
                        deviation: Some(d),
                        status: classify(d, params),
                    }
                }
                _ => IndicatorRow {
                    activity: k.clone(),
                    actual: a,
                    planned: b,
                    deviation: None,
                    status: Status::NoBaseline,
                },
            }
        })
        .collect();
    Ok(IndicatorTable { rows })
}
