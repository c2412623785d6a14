//! Commands behind the `watchtower` binary.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::Utc;
use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;
use watchtower_core::collection::{pull_entry, submit_form, DaoRegistry, FormSubmission, PullState, SubmissionContent};
use watchtower_core::engine::{Runtime, ViewModel};
use watchtower_core::gqm::{compose_catena, parse_gqm_plan, MetricCoverage, ProjectContext};
use watchtower_core::ids::EntryId;
use watchtower_core::model::{
    from_document, parse_catena, serialize_catena, to_document, validate_catena, Catena, ComponentRegistry,
    DocumentError, EntrySource, FormMode,
};
use watchtower_core::store::{FileRepository, MemoryStore, PayloadStore};
use watchtower_core::techniques::types::{IndicatorTable, Status};
use watchtower_core::techniques::TechniqueRegistry;

#[derive(Debug, Parser)]
#[command(name = "watchtower", version, about = "Project control center administration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a catena document against the component repository.
    Validate {
        catena: PathBuf,
        #[arg(long)]
        repo: Option<PathBuf>,
    },
    /// Import data files, execute a catena, and write view models and an
    /// indicator summary.
    Run {
        catena: PathBuf,
        #[arg(long)]
        repo: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Register the built-in components in a repository.
    Seed {
        #[arg(long)]
        repo: PathBuf,
    },
    /// Compose a candidate catena from a GQM plan.
    Compose {
        plan: PathBuf,
        #[arg(long)]
        repo: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "project")]
        project: String,
        #[arg(long = "catena-id", default_value = "candidate")]
        catena_id: String,
        /// Roles for views whose goal names no viewpoint.
        #[arg(long = "role")]
        roles: Vec<String>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Validation, import, or execution failure.
    #[error("{0}")]
    Domain(String),
    /// Unreadable input, unwritable output, bad configuration.
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Environment(_) => 2,
        }
    }
}

fn env_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Environment(format!("{context}: {e}"))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| env_err(&format!("cannot read `{}`", path.display()), e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| env_err(&format!("cannot create `{}`", dir.display()), e))?;
    }
    std::fs::write(path, contents).map_err(|e| env_err(&format!("cannot write `{}`", path.display()), e))
}

fn out_err(e: std::io::Error) -> CliError {
    env_err("cannot write output", e)
}

/// Built-in components overlaid with the latest versions in `repo`.
pub fn load_registry(repo: Option<&Path>) -> Result<ComponentRegistry, CliError> {
    let mut registry = watchtower_core::builtin::registry();
    if let Some(root) = repo {
        if !root.is_dir() {
            return Err(CliError::Environment(format!(
                "repository `{}` does not exist",
                root.display()
            )));
        }
        let stored = FileRepository::open(root).map_err(|e| env_err("cannot open repository", e))?;
        let r = stored.registry();
        registry.data_types.extend(r.data_types);
        registry.functions.extend(r.functions);
        registry.views.extend(r.views);
        registry.web_forms.extend(r.web_forms);
        registry.dao_packages.extend(r.dao_packages);
        registry.reuse = r.reuse;
    }
    Ok(registry)
}

fn load_catena(path: &Path, registry: &ComponentRegistry) -> Result<Catena, CliError> {
    let text = read(path)?;
    parse_catena(&text, registry).map_err(|e| match e {
        DocumentError::UnknownSpecs(ids) => CliError::Domain(format!("unknown component specs: {}", ids.join(", "))),
        other => CliError::Domain(other.to_string()),
    })
}

pub fn execute(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { catena, repo } => cmd_validate(&catena, repo.as_deref(), out),
        Command::Run {
            catena,
            repo,
            data,
            out: dir,
        } => cmd_run(&catena, repo.as_deref(), &data, &dir, out),
        Command::Serve { config } => cmd_serve(&config),
        Command::Seed { repo } => cmd_seed(&repo, out),
        Command::Compose {
            plan,
            repo,
            out: file,
            project,
            catena_id,
            roles,
        } => cmd_compose(&plan, repo.as_deref(), &file, &project, &catena_id, roles, out),
    }
}

pub fn cmd_validate(catena: &Path, repo: Option<&Path>, out: &mut impl Write) -> Result<(), CliError> {
    let registry = load_registry(repo)?;
    let c = load_catena(catena, &registry)?;
    let report = validate_catena(&c, &registry);
    for d in &report.diagnostics {
        writeln!(out, "{d}").map_err(out_err)?;
    }
    if report.is_ok() {
        writeln!(out, "ok").map_err(out_err)?;
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "catena `{}` is invalid ({} errors)",
            c.meta.id,
            report.errors().count()
        )))
    }
}

/// Status counts of one indicator table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorSummary {
    pub entry: EntryId,
    pub counts: BTreeMap<Status, usize>,
    pub worst: Option<Status>,
    pub activities: BTreeMap<String, Status>,
}

fn summarize(entry: &EntryId, table: &IndicatorTable) -> IndicatorSummary {
    let mut counts: BTreeMap<Status, usize> = [Status::Green, Status::Yellow, Status::Red, Status::NoBaseline]
        .into_iter()
        .map(|s| (s, 0))
        .collect();
    for r in &table.rows {
        *counts.entry(r.status).or_default() += 1;
    }
    IndicatorSummary {
        entry: entry.clone(),
        counts,
        worst: table
            .worst_alert()
            .or_else(|| (!table.rows.is_empty()).then_some(Status::Green)),
        activities: table.rows.iter().map(|r| (r.activity.clone(), r.status)).collect(),
    }
}

/// Data file read for a form: `<form-id>.<ext>` with the parser's
/// extension for file imports, `<form-id>.json` for manual entry.
pub fn form_data_file(data: &Path, form: &str, mode: &FormMode) -> PathBuf {
    let ext = match mode {
        FormMode::FileImport { parser } => parser.rsplit('.').next().unwrap_or("csv"),
        FormMode::ManualEntry { .. } => "json",
    };
    data.join(format!("{form}.{ext}"))
}

fn import_inputs(
    c: &Catena,
    registry: &ComponentRegistry,
    data: &Path,
    store: &mut MemoryStore,
) -> Result<Vec<String>, CliError> {
    let now = Utc::now();
    let mut problems = Vec::new();
    for form in &c.web_forms {
        let spec = &registry.web_forms[&form.spec];
        let path = form_data_file(data, form.id.as_str(), &spec.mode);
        if !path.exists() {
            continue;
        }
        let text = read(&path)?;
        let content = match &spec.mode {
            FormMode::FileImport { parser } => SubmissionContent::File {
                format: parser.clone(),
                content: text,
            },
            FormMode::ManualEntry { .. } => match from_document::<SubmissionContent>(&text) {
                Ok(c) => c,
                Err(e) => {
                    problems.push(format!("{}: {e}", path.display()));
                    continue;
                }
            },
        };
        let submission = FormSubmission {
            form: form.id.clone(),
            submitted_by: "cli".into(),
            submitted_at: now,
            content,
        };
        if let Err(e) = submit_form(&submission, c, registry, store) {
            problems.push(format!("{}: {e}", path.display()));
        }
    }
    let daos = DaoRegistry::builtin(data);
    let mut state = PullState::default();
    for entry in &c.data_entries {
        if matches!(entry.source, EntrySource::Dao { .. }) {
            if let Err(e) = pull_entry(entry, registry, &daos, store, &mut state, now) {
                problems.push(format!("{}: {e}", entry.id));
            }
        }
    }
    for entry in c
        .data_entries
        .iter()
        .filter(|e| !matches!(e.source, EntrySource::Derived { .. }))
    {
        if store.latest_version(&entry.id) == 0 && !problems.iter().any(|p| p.starts_with(entry.id.as_str())) {
            problems.push(format!("{}: missing input", entry.id));
        }
    }
    Ok(problems)
}

pub fn cmd_run(
    catena: &Path,
    repo: Option<&Path>,
    data: &Path,
    dir: &Path,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let registry = load_registry(repo)?;
    let c = load_catena(catena, &registry)?;
    let report = validate_catena(&c, &registry);
    if !report.is_ok() {
        for d in &report.diagnostics {
            writeln!(out, "{d}").map_err(out_err)?;
        }
        return Err(CliError::Domain(format!("catena `{}` is invalid", c.meta.id)));
    }
    if !data.is_dir() {
        return Err(CliError::Environment(format!(
            "data directory `{}` does not exist",
            data.display()
        )));
    }
    let mut store = MemoryStore::new();
    let problems = import_inputs(&c, &registry, data, &mut store)?;
    if !problems.is_empty() {
        for p in &problems {
            writeln!(out, "{p}").map_err(out_err)?;
        }
        return Err(CliError::Domain(format!("{} input problems", problems.len())));
    }

    let runtime = Runtime::new(registry, TechniqueRegistry::builtin());
    let result = runtime
        .execute_catena(&c, &mut store, Utc::now())
        .map_err(|e| CliError::Domain(e.to_string()))?;
    for id in &result.executed {
        writeln!(out, "{id}: {}", result.statuses[id]).map_err(out_err)?;
    }

    let roles: BTreeSet<&str> = c
        .views
        .iter()
        .flat_map(|v| v.visible_to.iter().map(String::as_str))
        .collect();
    let models: Vec<ViewModel> = c
        .views
        .iter()
        .filter_map(|v| runtime.render_view(&c, &store, v.id.as_str(), roles.iter().copied()))
        .collect();
    for m in &models {
        write_file(&dir.join("views").join(format!("{}.json", m.view)), &to_document(m))?;
    }
    let summaries: Vec<IndicatorSummary> = c
        .data_entries
        .iter()
        .filter(|e| e.spec.as_str() == watchtower_core::builtin::types::INDICATOR_TABLE)
        .filter_map(|e| {
            let p = store.latest(&e.id)?;
            let table: IndicatorTable = serde_json::from_value(p.body).ok()?;
            Some(summarize(&e.id, &table))
        })
        .collect();
    write_file(&dir.join("indicators.json"), &to_document(&summaries))?;
    writeln!(out, "wrote {} view models to {}", models.len(), dir.display()).map_err(out_err)?;

    if result.all_ok() {
        Ok(())
    } else {
        Err(CliError::Domain("some function instances did not complete".into()))
    }
}

pub fn cmd_serve(config: &Path) -> Result<(), CliError> {
    let cfg = watchtower_service::ServiceConfig::load(config).map_err(|e| CliError::Environment(e.to_string()))?;
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .try_init();
    let rt = tokio::runtime::Runtime::new().map_err(|e| env_err("cannot start runtime", e))?;
    rt.block_on(watchtower_service::serve(cfg))
        .map_err(|e| CliError::Environment(e.to_string()))
}

pub fn cmd_seed(repo: &Path, out: &mut impl Write) -> Result<(), CliError> {
    let mut r = FileRepository::open(repo).map_err(|e| env_err("cannot open repository", e))?;
    let before = r.snapshot().len();
    let records = r.seed_builtin().map_err(|e| env_err("cannot seed repository", e))?;
    let added = r.snapshot().len() - before;
    writeln!(out, "{} components, {added} new versions", records.len()).map_err(out_err)?;
    Ok(())
}

pub fn cmd_compose(
    plan: &Path,
    repo: Option<&Path>,
    file: &Path,
    project: &str,
    catena_id: &str,
    roles: Vec<String>,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let registry = load_registry(repo)?;
    let plan = parse_gqm_plan(&read(plan)?).map_err(|e| CliError::Domain(e.to_string()))?;
    let ctx = ProjectContext {
        project: project.into(),
        catena: catena_id.into(),
        roles,
    };
    let result = compose_catena(&plan, &registry, &ctx);
    write_file(file, &serialize_catena(&result.catena))?;
    let mut unmatched = 0;
    for (metric, cov) in &result.coverage {
        match cov {
            MetricCoverage::Matched { components } => {
                writeln!(
                    out,
                    "{metric}: matched {}",
                    components.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" -> ")
                )
            }
            MetricCoverage::Unmatched { missing } => {
                unmatched += 1;
                writeln!(
                    out,
                    "{metric}: unmatched, missing {}",
                    missing.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
                )
            }
        }
        .map_err(out_err)?;
    }
    if unmatched == 0 {
        Ok(())
    } else {
        Err(CliError::Domain(format!("{unmatched} metrics unmatched")))
    }
}
