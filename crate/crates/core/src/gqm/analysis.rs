use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{CatenaId, ComponentId, EntryId, ProjectId};
use crate::model::Catena;
use crate::store::{DeviationReport, ExperiencePackage, FileRepository, Payload, PayloadStore, StoreError};
use crate::techniques::types::{IndicatorTable, Status};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEvent {
    pub description: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detection {
    Detected,
    DetectedLate,
    NotDetected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDetection {
    pub description: String,
    pub at: DateTime<Utc>,
    pub detection: Detection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorAnalysis {
    pub indicator: EntryId,
    pub first_non_green: Option<DateTime<Utc>>,
    /// Payload version at which the first yellow or red row appeared.
    pub first_non_green_version: Option<u64>,
    /// Worst status in the latest payload.
    pub final_status: Option<Status>,
    pub events: Vec<EventDetection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviationAnalysis {
    pub indicators: Vec<IndicatorAnalysis>,
}

fn worst(table: &IndicatorTable) -> Status {
    table
        .rows
        .iter()
        .map(|r| r.status)
        .max_by_key(|s| s.severity().map_or(0, |r| r + 1))
        .unwrap_or(Status::Green)
}

/// Classifies each reference event against the first payload, by version,
/// holding a yellow or red row. Payloads that are not indicator tables are
/// ignored.
pub fn analyze_indicator(indicator: &EntryId, history: &[Payload], events: &[ReferenceEvent]) -> IndicatorAnalysis {
    let mut ordered: Vec<&Payload> = history.iter().collect();
    ordered.sort_by_key(|p| p.version);
    let tables: Vec<(&Payload, IndicatorTable)> = ordered
        .into_iter()
        .filter_map(|p| serde_json::from_value(p.body.clone()).ok().map(|t| (p, t)))
        .collect();
    let first = tables
        .iter()
        .find(|(_, t)| t.rows.iter().any(|r| r.status.is_alert()))
        .map(|(p, _)| *p);
    let events = events
        .iter()
        .map(|e| EventDetection {
            description: e.description.clone(),
            at: e.at,
            detection: match first {
                None => Detection::NotDetected,
                Some(p) if p.produced_at <= e.at => Detection::Detected,
                Some(_) => Detection::DetectedLate,
            },
        })
        .collect();
    IndicatorAnalysis {
        indicator: indicator.clone(),
        first_non_green: first.map(|p| p.produced_at),
        first_non_green_version: first.map(|p| p.version),
        final_status: tables.last().map(|(_, t)| worst(t)),
        events,
    }
}

/// Analyzes the payload history of each indicator entry.
pub fn analyze_deviations<S: PayloadStore + ?Sized>(
    store: &S,
    indicators: &[EntryId],
    events: &[ReferenceEvent],
) -> DeviationAnalysis {
    DeviationAnalysis {
        indicators: indicators
            .iter()
            .map(|e| analyze_indicator(e, &store.history(e), events))
            .collect(),
    }
}

/// Function, view, and web form specs instantiated in `catena`, with the
/// number of instances of each.
pub fn instantiated_components(catena: &Catena) -> std::collections::BTreeMap<ComponentId, u64> {
    let mut out = std::collections::BTreeMap::new();
    let ids = catena
        .functions
        .iter()
        .map(|f| &f.spec)
        .chain(catena.views.iter().map(|v| &v.spec))
        .chain(catena.web_forms.iter().map(|w| &w.spec));
    for id in ids {
        *out.entry(id.clone()).or_insert(0) += 1;
    }
    out
}

/// Builds the experience package for a project's catena. Every indicator
/// that turned yellow or red yields one deviation report.
pub fn build_package(
    analysis: &DeviationAnalysis,
    catena: &Catena,
    project: &ProjectId,
    lessons: &str,
) -> ExperiencePackage {
    let deviations = analysis
        .indicators
        .iter()
        .filter_map(|a| {
            let first = a.first_non_green?;
            let late = a
                .events
                .iter()
                .filter(|e| e.detection == Detection::DetectedLate)
                .count();
            let missed = a
                .events
                .iter()
                .filter(|e| e.detection == Detection::NotDetected)
                .count();
            let detected = a.events.len() - late - missed;
            Some(DeviationReport {
                indicator: a.indicator.clone(),
                first_non_green: first,
                final_status: a.final_status.unwrap_or(Status::Green),
                note: format!("{detected} detected, {late} detected late, {missed} not detected"),
            })
        })
        .collect();
    ExperiencePackage {
        project: project.clone(),
        catena: catena.meta.id.clone(),
        reused: instantiated_components(catena),
        deviations,
        lessons: lessons.to_owned(),
    }
}

/// Builds and records the package for the stored catena `catena`.
pub fn package_results(
    repo: &mut FileRepository,
    analysis: &DeviationAnalysis,
    catena: &CatenaId,
    project: &ProjectId,
    lessons: &str,
) -> Result<(String, ExperiencePackage), StoreError> {
    let stored = repo
        .catena(catena.as_str())
        .ok_or_else(|| StoreError::Dangling(vec![format!("catena `{catena}`")]))?;
    let package = build_package(analysis, stored, project, lessons);
    let id = repo.record_experience(package.clone())?;
    Ok((id, package))
}
