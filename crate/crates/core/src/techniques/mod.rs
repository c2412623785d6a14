//! Packaged control techniques and the registry resolving implementation
//! keys to them.

pub mod effort;
pub mod eva;
pub mod mta;
pub mod series;
pub mod tolerance;
pub mod types;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::Duration;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::builtin::techniques as keys;
use crate::model::Params;

pub use effort::{aggregate_effort, effort_to_time_series};
pub use eva::earned_value_analysis;
pub use mta::milestone_trend_analysis;
pub use series::scale_time_series;
pub use tolerance::{tolerance_range_check, ToleranceMode, ToleranceParams};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TechniqueError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("unknown activity `{0}`")]
    UnknownActivity(String),
    #[error("parameter error: {0}")]
    Param(String),
    #[error("missing input on port `{0}`")]
    MissingPort(String),
    #[error("no technique registered under `{0}`")]
    UnknownImplementation(String),
}

impl TechniqueError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        TechniqueError::InvalidInput(msg.into())
    }
}

/// Input payload bodies per port, in entry-id order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TechniqueInputs {
    pub ports: BTreeMap<String, Vec<Value>>,
}

impl TechniqueInputs {
    pub fn bodies(&self, port: &str) -> Result<&[Value], TechniqueError> {
        self.ports
            .get(port)
            .map(Vec::as_slice)
            .ok_or_else(|| TechniqueError::MissingPort(port.to_owned()))
    }

    /// Decodes the single body bound to `port`.
    pub fn one<T: DeserializeOwned>(&self, port: &str) -> Result<T, TechniqueError> {
        let body = self
            .bodies(port)?
            .first()
            .ok_or_else(|| TechniqueError::MissingPort(port.to_owned()))?;
        decode(body, port)
    }

    pub fn many<T: DeserializeOwned>(&self, port: &str) -> Result<Vec<T>, TechniqueError> {
        self.bodies(port)?.iter().map(|b| decode(b, port)).collect()
    }
}

fn decode<T: DeserializeOwned>(body: &Value, port: &str) -> Result<T, TechniqueError> {
    T::deserialize(body).map_err(|e| TechniqueError::invalid(format!("malformed payload on port `{port}`: {e}")))
}

pub fn encode<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("technique outputs serialize")
}

/// Output bodies per port.
pub type TechniqueOutputs = BTreeMap<String, Value>;

/// A control technique: a pure function from input bodies and resolved
/// parameters to output bodies.
pub trait Technique: Send + Sync {
    fn run(&self, inputs: &TechniqueInputs, params: &Params) -> Result<TechniqueOutputs, TechniqueError>;
}

impl<F> Technique for F
where
    F: Fn(&TechniqueInputs, &Params) -> Result<TechniqueOutputs, TechniqueError> + Send + Sync,
{
    fn run(&self, inputs: &TechniqueInputs, params: &Params) -> Result<TechniqueOutputs, TechniqueError> {
        self(inputs, params)
    }
}

fn num(params: &Params, name: &str) -> Result<f64, TechniqueError> {
    params
        .get(name)
        .and_then(Value::as_f64)
        .ok_or_else(|| TechniqueError::Param(format!("`{name}` must be a number")))
}

fn text<'a>(params: &'a Params, name: &str) -> Result<&'a str, TechniqueError> {
    params
        .get(name)
        .and_then(Value::as_str)
        .ok_or_else(|| TechniqueError::Param(format!("`{name}` must be text")))
}

fn single(port: &str, value: Value) -> TechniqueOutputs {
    BTreeMap::from([(port.to_owned(), value)])
}

/// Maps implementation keys to techniques.
#[derive(Clone, Default)]
pub struct TechniqueRegistry {
    techniques: BTreeMap<String, Arc<dyn Technique>>,
}

impl std::fmt::Debug for TechniqueRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.techniques.keys()).finish()
    }
}

impl TechniqueRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Registry holding every built-in technique.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(keys::AGGREGATE_EFFORT, |i: &TechniqueInputs, _: &Params| {
            let m = aggregate_effort(&i.one("effort")?, &i.one("hierarchy")?)?;
            Ok(single("actual", encode(&m)))
        });
        r.register(keys::TOLERANCE_CHECK, |i: &TechniqueInputs, p: &Params| {
            let mode = text(p, "mode")?;
            let params = ToleranceParams {
                yellow: num(p, "yellow")?,
                red: num(p, "red")?,
                mode: ToleranceMode::parse(mode)
                    .ok_or_else(|| TechniqueError::Param(format!("unknown mode `{mode}`")))?,
            };
            let t = tolerance_range_check(&i.one("actual")?, &i.one("baseline")?, &params)?;
            Ok(single("indicators", encode(&t)))
        });
        r.register(keys::EARNED_VALUE, |i: &TechniqueInputs, p: &Params| {
            let date = eva::parse_status_date(text(p, "status_date")?)?;
            let rep = earned_value_analysis(&i.one("hierarchy")?, &i.one("progress")?, &i.one("cost")?, date)?;
            Ok(single("report", encode(&rep)))
        });
        r.register(keys::MILESTONE_TREND, |i: &TechniqueInputs, p: &Params| {
            let t = milestone_trend_analysis(&i.one("forecasts")?, num(p, "dead_band")?)?;
            Ok(single("trend", encode(&t)))
        });
        r.register(keys::SCALE_SERIES, |i: &TechniqueInputs, p: &Params| {
            let ts: types::TimeSeries = i.one("series")?;
            ts.check()?;
            Ok(single("scaled", encode(&scale_time_series(&ts, num(p, "factor")?))))
        });
        r.register(keys::EFFORT_TO_SERIES, |i: &TechniqueInputs, p: &Params| {
            let bucket = p
                .get("bucket_s")
                .and_then(Value::as_i64)
                .ok_or_else(|| TechniqueError::Param("`bucket_s` must be an integer".into()))?;
            let ts = effort_to_time_series(&i.one("effort")?, Duration::seconds(bucket))?;
            Ok(single("series", encode(&ts)))
        });
        r
    }

    pub fn register(&mut self, key: &str, technique: impl Technique + 'static) {
        self.techniques.insert(key.to_owned(), Arc::new(technique));
    }

    pub fn get(&self, key: &str) -> Option<&Arc<dyn Technique>> {
        self.techniques.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.techniques.keys().map(String::as_str)
    }

    /// Runs the technique registered under `key`.
    pub fn run(
        &self,
        key: &str,
        inputs: &TechniqueInputs,
        params: &Params,
    ) -> Result<TechniqueOutputs, TechniqueError> {
        self.get(key)
            .ok_or_else(|| TechniqueError::UnknownImplementation(key.to_owned()))?
            .run(inputs, params)
    }
}
