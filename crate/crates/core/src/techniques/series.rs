use super::types::{Point, TimeSeries};

/// Multiplies every value by `factor`; timestamps are unchanged.
pub fn scale_time_series(ts: &TimeSeries, factor: f64) -> TimeSeries {
    TimeSeries {
        points: ts
            .points
            .iter()
            .map(|p| Point {
                t: p.t,
                value: p.value * factor,
            })
            .collect(),
    }
}
