//! Shared service state and the operations behind each endpoint.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;
use watchtower_core::collection::{
    poll_due, pull_entry, submit_form, DaoRegistry, FormError, FormSubmission, PullState, SubmissionContent,
};
use watchtower_core::engine::{ExecutionResult, InstanceStatus, Runtime, ViewModel};
use watchtower_core::gqm::{
    analyze_deviations, compose_catena, package_results, CompositionResult, GqmPlan, ProjectContext, ReferenceEvent,
};
use watchtower_core::ids::{CatenaId, EntryId, InstanceId};
use watchtower_core::model::{
    parse_catena, validate_catena, Catena, ComponentKind, DocumentError, EntrySource, ValidationReport,
};
use watchtower_core::store::{ComponentRecord, ExperiencePackage, FileRepository, StoreError};
use watchtower_core::techniques::TechniqueRegistry;

use crate::auth::{authorize, Action, Decision, Principal, Principals};
use crate::error::ApiError;

/// Work owed to a catena before its views may be rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Pending {
    Full,
    Entries(BTreeSet<EntryId>),
}

/// Mutable service state. All writes go through one lock.
#[derive(Debug)]
pub struct Shared {
    repo: FileRepository,
    runtime: Runtime,
    daos: DaoRegistry,
    pull: PullState,
    pending: BTreeMap<CatenaId, Pending>,
}

#[derive(Clone)]
pub struct AppState {
    pub shared: Arc<RwLock<Shared>>,
    pub principals: Arc<Principals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormAccepted {
    pub changed: Vec<EntryId>,
    pub recomputed: Vec<InstanceId>,
    pub statuses: BTreeMap<InstanceId, InstanceStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatenaSaved {
    pub created: bool,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeRequest {
    pub plan: GqmPlan,
    pub project: String,
    pub catena: String,
    #[serde(default)]
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperienceRequest {
    pub catena: String,
    #[serde(default)]
    pub events: Vec<ReferenceEvent>,
    #[serde(default)]
    pub lessons: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceRecorded {
    pub id: String,
    pub package: ExperiencePackage,
}

fn document_rejection(e: DocumentError) -> ApiError {
    let details = match &e {
        DocumentError::Malformed { path, line, column, .. } => json!({ "path": path, "line": line, "column": column }),
        DocumentError::UnknownSpecs(ids) => json!({ "unknown_specs": ids }),
    };
    ApiError::Rejected {
        message: e.to_string(),
        details,
    }
}

/// Parses a JSON request body, reporting the failing path.
pub fn parse_body<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ApiError> {
    watchtower_core::model::from_document(text).map_err(document_rejection)
}

fn form_rejection(e: FormError) -> ApiError {
    match e {
        FormError::UnknownForm(id) => ApiError::NotFound(format!("form `{id}`")),
        FormError::Rejected(violations) => ApiError::Rejected {
            message: format!(
                "submission rejected: {}",
                violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
            ),
            details: json!(violations
                .iter()
                .map(|v| json!({ "field": v.path, "message": v.message }))
                .collect::<Vec<_>>()),
        },
        FormError::Import(i) => ApiError::Rejected {
            message: i.to_string(),
            details: json!(i
                .issues()
                .iter()
                .map(|r| json!({ "row": r.row, "message": r.message }))
                .collect::<Vec<_>>()),
        },
        FormError::Misconfigured { .. } => ApiError::rejected(e.to_string()),
        FormError::Store(s) => s.into(),
    }
}

impl Shared {
    /// Opens the repository at `store`, seeding the built-in components.
    pub fn open(store: impl Into<PathBuf>, data: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let mut repo = FileRepository::open(store)?;
        repo.seed_builtin()?;
        let runtime = Runtime::new(repo.registry(), TechniqueRegistry::builtin());
        Ok(Self {
            repo,
            runtime,
            daos: DaoRegistry::builtin(data.into()),
            pull: PullState::default(),
            pending: BTreeMap::new(),
        })
    }

    pub fn repo(&self) -> &FileRepository {
        &self.repo
    }

    /// Every persisted record; used to check that failed requests leave no trace.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.repo.snapshot()
    }

    fn catena(&self, id: &str) -> Result<&Catena, ApiError> {
        self.repo
            .catena(id)
            .ok_or_else(|| ApiError::NotFound(format!("catena `{id}`")))
    }

    pub fn needs_refresh(&self, catena: &str) -> bool {
        self.pending.contains_key(catena)
    }

    /// Runs owed executions for `catena`.
    pub fn refresh(&mut self, catena: &str, now: DateTime<Utc>) -> Result<(), ApiError> {
        let Some(pending) = self.pending.remove(catena) else {
            return Ok(());
        };
        let c = self.catena(catena)?.clone();
        match pending {
            Pending::Full => self.runtime.execute_catena(&c, &mut self.repo, now)?,
            Pending::Entries(e) => {
                let changed: Vec<EntryId> = e.into_iter().collect();
                self.runtime.propagate_update(&c, &mut self.repo, &changed, now)?
            }
        };
        Ok(())
    }

    /// View models of `catena` for the principal's roles. Requires that no
    /// execution is owed; see [`Shared::refresh`].
    pub fn views(&self, principal: &Principal, catena: &str) -> Result<Vec<ViewModel>, ApiError> {
        let c = self.catena(catena)?;
        let models = self.runtime.refresh_views(c, &self.repo, principal.role_names());
        debug_assert!(models.iter().flat_map(ViewModel::flatten).all(|m| authorize(
            principal,
            c,
            Action::ReadView,
            Some(m.view.as_str())
        ) == Decision::Allow));
        Ok(models)
    }

    fn catena_of_form(&self, form: &str) -> Result<Catena, ApiError> {
        self.repo
            .catenas()
            .find(|c| c.web_form(form).is_some())
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("form `{form}`")))
    }

    /// Submits form content and recomputes everything downstream before returning.
    pub fn submit(
        &mut self,
        principal: &Principal,
        form: &str,
        content: SubmissionContent,
        now: DateTime<Utc>,
    ) -> Result<FormAccepted, ApiError> {
        let catena = self.catena_of_form(form)?;
        if authorize(principal, &catena, Action::SubmitForm, None) == Decision::Deny {
            return Err(ApiError::Forbidden);
        }
        let submission = FormSubmission {
            form: form.into(),
            submitted_by: principal.id.clone(),
            submitted_at: now,
            content,
        };
        let changed =
            submit_form(&submission, &catena, &self.runtime.registry, &mut self.repo).map_err(form_rejection)?;
        self.refresh(catena.meta.id.as_str(), now)?;
        let result: ExecutionResult = self.runtime.propagate_update(&catena, &mut self.repo, &changed, now)?;
        Ok(FormAccepted {
            changed,
            recomputed: result.executed,
            statuses: result.statuses,
        })
    }

    pub fn get_catena(&self, principal: &Principal, id: &str) -> Result<Catena, ApiError> {
        if !principal.is_admin() {
            return Err(ApiError::Forbidden);
        }
        self.catena(id).cloned()
    }

    /// Validates and stores a catena document under `id`.
    pub fn put_catena(&mut self, principal: &Principal, id: &str, text: &str) -> Result<CatenaSaved, ApiError> {
        if !principal.is_admin() {
            return Err(ApiError::Forbidden);
        }
        let catena = parse_catena(text, &self.runtime.registry).map_err(document_rejection)?;
        if catena.meta.id.as_str() != id {
            return Err(ApiError::rejected(format!(
                "document id `{}` does not match the path id `{id}`",
                catena.meta.id
            )));
        }
        let report = validate_catena(&catena, &self.runtime.registry);
        if !report.is_ok() {
            return Err(ApiError::Rejected {
                message: "catena is invalid".into(),
                details: serde_json::to_value(&report).expect("report serializes"),
            });
        }
        self.check_ids_free(&catena)?;
        let created = self.repo.catena(id).is_none();
        self.repo.put_catena(&catena)?;
        self.pending.insert(catena.meta.id.clone(), Pending::Full);
        Ok(CatenaSaved { created, report })
    }

    /// Entry and form ids are global across catenas.
    fn check_ids_free(&self, catena: &Catena) -> Result<(), ApiError> {
        let mut clashes = Vec::new();
        for other in self.repo.catenas().filter(|c| c.meta.id != catena.meta.id) {
            for e in &catena.data_entries {
                if other.entry(e.id.as_str()).is_some() {
                    clashes.push(json!({ "subject": e.id, "code": "id-in-use", "catena": other.meta.id }));
                }
            }
            for f in &catena.web_forms {
                if other.web_form(f.id.as_str()).is_some() {
                    clashes.push(json!({ "subject": f.id, "code": "id-in-use", "catena": other.meta.id }));
                }
            }
        }
        if clashes.is_empty() {
            Ok(())
        } else {
            Err(ApiError::Rejected {
                message: "ids already used by another catena".into(),
                details: Value::Array(clashes),
            })
        }
    }

    pub fn delete_catena(&mut self, principal: &Principal, id: &str) -> Result<(), ApiError> {
        if !principal.is_admin() {
            return Err(ApiError::Forbidden);
        }
        if !self.repo.delete_catena(id)? {
            return Err(ApiError::NotFound(format!("catena `{id}`")));
        }
        self.pending.remove(id);
        Ok(())
    }

    pub fn browse(&self, kind: &str, tags: &[String]) -> Result<Vec<ComponentRecord>, ApiError> {
        let kind = ComponentKind::parse(kind).ok_or_else(|| ApiError::NotFound(format!("component kind `{kind}`")))?;
        Ok(self.repo.lookup_components(kind, tags).into_iter().cloned().collect())
    }

    /// Composes a candidate catena without storing it.
    pub fn compose(&self, principal: &Principal, req: &ComposeRequest) -> Result<CompositionResult, ApiError> {
        if !principal.is_admin() {
            return Err(ApiError::Forbidden);
        }
        req.plan.check().map_err(|e| ApiError::rejected(e.to_string()))?;
        let ctx = ProjectContext {
            project: req.project.as_str().into(),
            catena: req.catena.as_str().into(),
            roles: req.roles.clone(),
        };
        Ok(compose_catena(&req.plan, &self.repo.registry(), &ctx))
    }

    /// Analyzes every indicator table of the catena and stores the package.
    pub fn record_experience(
        &mut self,
        principal: &Principal,
        req: &ExperienceRequest,
    ) -> Result<ExperienceRecorded, ApiError> {
        if !principal.is_admin() {
            return Err(ApiError::Forbidden);
        }
        let catena = self.catena(&req.catena)?.clone();
        let indicators: Vec<EntryId> = catena
            .data_entries
            .iter()
            .filter(|e| e.spec.as_str() == watchtower_core::builtin::types::INDICATOR_TABLE)
            .map(|e| e.id.clone())
            .collect();
        let analysis = analyze_deviations(&self.repo, &indicators, &req.events);
        let (id, package) = package_results(
            &mut self.repo,
            &analysis,
            &catena.meta.id,
            &catena.meta.project,
            &req.lessons,
        )?;
        self.runtime.registry.reuse = self.repo.reuse_counts();
        Ok(ExperienceRecorded { id, package })
    }

    /// Pulls every due connector-bound entry and marks its catena for
    /// recomputation. Failures leave the entry due for the next poll.
    pub fn poll(&mut self, now: DateTime<Utc>) -> Vec<(EntryId, Result<u64, String>)> {
        let catenas: Vec<Catena> = self.repo.catenas().cloned().collect();
        let mut report = Vec::new();
        for c in &catenas {
            for id in poll_due(c, &self.pull, now) {
                let entry = c.entry(id.as_str()).expect("due entries exist");
                debug_assert!(matches!(entry.source, EntrySource::Dao { .. }));
                let outcome = pull_entry(
                    entry,
                    &self.runtime.registry,
                    &self.daos,
                    &mut self.repo,
                    &mut self.pull,
                    now,
                );
                match outcome {
                    Ok(p) => {
                        self.mark_changed(&c.meta.id, id.clone());
                        report.push((id, Ok(p.version)));
                    }
                    Err(e) => {
                        tracing::warn!(entry = %id, error = %e, "pull failed");
                        report.push((id, Err(e.to_string())));
                    }
                }
            }
        }
        report
    }

    fn mark_changed(&mut self, catena: &CatenaId, entry: EntryId) {
        match self
            .pending
            .entry(catena.clone())
            .or_insert_with(|| Pending::Entries(BTreeSet::new()))
        {
            Pending::Full => {}
            Pending::Entries(set) => {
                set.insert(entry);
            }
        }
    }
}

impl AppState {
    pub fn new(shared: Shared, principals: Principals) -> Self {
        Self {
            shared: Arc::new(RwLock::new(shared)),
            principals: Arc::new(principals),
        }
    }

    pub fn authenticate(&self, token: Option<&str>) -> Result<Principal, ApiError> {
        token
            .and_then(|t| self.principals.authenticate(t))
            .cloned()
            .ok_or(ApiError::Unauthenticated)
    }
}
