//! GQM plans, goal-oriented catena composition, deviation analysis, and
//! experience packaging.

mod analysis;
mod compose;
mod plan;

pub use analysis::{
    analyze_deviations, analyze_indicator, build_package, instantiated_components, package_results, Detection,
    DeviationAnalysis, EventDetection, IndicatorAnalysis, ReferenceEvent,
};
pub use compose::{compose_catena, CompositionResult, MetricCoverage, ProjectContext};
pub use plan::{parse_gqm_plan, Goal, GqmPlan, Metric, PlanError, PlanIssue, Question};
