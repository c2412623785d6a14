use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::ComponentId;
use crate::model::{from_document, DocumentError, RenderKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub object: String,
    pub purpose: String,
    pub quality_focus: String,
    /// Role whose viewpoint the goal takes; composed views are visible to it.
    pub viewpoint: String,
    #[serde(default)]
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub goal: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metric {
    pub id: String,
    pub question: String,
    pub name: String,
    pub data_type: ComponentId,
    #[serde(default)]
    pub technique_tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view_kind: Option<RenderKind>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GqmPlan {
    #[serde(default)]
    pub goals: Vec<Goal>,
    #[serde(default)]
    pub questions: Vec<Question>,
    #[serde(default)]
    pub metrics: Vec<Metric>,
}

/// A reference problem at a document path such as `metrics[0].question`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanIssue {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for PlanIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    References(Vec<PlanIssue>),
}

impl GqmPlan {
    /// Checks id uniqueness and goal/question references.
    pub fn check(&self) -> Result<(), PlanError> {
        let mut issues = Vec::new();
        let mut unique = |section: &str, ids: Vec<&str>| -> BTreeSet<String> {
            let mut seen = BTreeSet::new();
            for (i, id) in ids.into_iter().enumerate() {
                if !seen.insert(id.to_owned()) {
                    issues.push(PlanIssue {
                        path: format!("{section}[{i}].id"),
                        message: format!("duplicate id `{id}`"),
                    });
                }
            }
            seen
        };
        let goals = unique("goals", self.goals.iter().map(|g| g.id.as_str()).collect());
        let questions = unique("questions", self.questions.iter().map(|q| q.id.as_str()).collect());
        unique("metrics", self.metrics.iter().map(|m| m.id.as_str()).collect());
        for (i, q) in self.questions.iter().enumerate() {
            if !goals.contains(&q.goal) {
                issues.push(PlanIssue {
                    path: format!("questions[{i}].goal"),
                    message: format!("unknown goal `{}`", q.goal),
                });
            }
        }
        for (i, m) in self.metrics.iter().enumerate() {
            if !questions.contains(&m.question) {
                issues.push(PlanIssue {
                    path: format!("metrics[{i}].question"),
                    message: format!("unknown question `{}`", m.question),
                });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(PlanError::References(issues))
        }
    }

    pub fn goal_of_metric(&self, metric: &Metric) -> Option<&Goal> {
        let q = self.questions.iter().find(|q| q.id == metric.question)?;
        self.goals.iter().find(|g| g.id == q.goal)
    }

    /// Metrics serving `goal`, in document order.
    pub fn metrics_of_goal<'a>(&'a self, goal: &'a str) -> impl Iterator<Item = &'a Metric> + 'a {
        self.metrics
            .iter()
            .filter(move |m| self.goal_of_metric(m).is_some_and(|g| g.id == goal))
    }
}

pub fn parse_gqm_plan(text: &str) -> Result<GqmPlan, PlanError> {
    let plan: GqmPlan = from_document(text)?;
    plan.check()?;
    Ok(plan)
}
