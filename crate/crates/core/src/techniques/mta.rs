//! Milestone trend analysis: classifies how forecast completion dates move
//! across successive reports.

use chrono::NaiveDate;

use super::types::{MilestoneClassified, MilestoneForecasts, MilestoneTrend, TrendClass};
use super::TechniqueError;

/// Default dead band around a zero slope, in days per day.
pub const DEFAULT_DEAD_BAND: f64 = 0.05;

fn day_number(d: NaiveDate) -> f64 {
    d.signed_duration_since(NaiveDate::default()).num_days() as f64
}

/// Ordinary least-squares slope of `ys` over `xs`. Inputs are centered first.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

pub fn classify_slope(slope: f64, dead_band: f64) -> TrendClass {
    if slope > dead_band {
        TrendClass::Delayed
    } else if slope < -dead_band {
        TrendClass::Accelerated
    } else {
        TrendClass::Stable
    }
}

pub fn milestone_trend_analysis(
    forecasts: &MilestoneForecasts,
    dead_band: f64,
) -> Result<MilestoneTrend, TechniqueError> {
    let mut milestones = Vec::with_capacity(forecasts.milestones.len());
    for m in &forecasts.milestones {
        if m.reports.windows(2).any(|w| w[0].reported >= w[1].reported) {
            return Err(TechniqueError::invalid(format!(
                "reporting dates of milestone `{}` must be strictly increasing",
                m.milestone
            )));
        }
        let xs: Vec<f64> = m.reports.iter().map(|r| day_number(r.reported)).collect();
        let ys: Vec<f64> = m.reports.iter().map(|r| day_number(r.forecast)).collect();
        let slope = least_squares_slope(&xs, &ys);
        milestones.push(MilestoneClassified {
            milestone: m.milestone.clone(),
            classification: classify_slope(slope, dead_band),
            slope,
            reports: m.reports.clone(),
        });
    }
    Ok(MilestoneTrend { milestones })
}
