//! File-backed repository.
//!
//! Layout under the root directory:
//!
//! ```text
//! components/<kind>/<id>/<version>
//! catenas/<id>
//! payloads/<entry-id>/<version>
//! experience/<project-id>/<n>
//! ```
//!
//! Every record is a pretty-printed JSON document. Writes go to a temporary
//! sibling first and are renamed into place. The whole store is loaded into
//! memory on open; reads never touch the disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{ComponentRecord, ExperiencePackage, MemoryStore, Payload, PayloadStore, StoreError, VersionSel};
use crate::ids::{is_valid_id, CatenaId, ComponentId, EntryId, ProjectId};
use crate::model::{
    check_component, from_document, to_document, Catena, ComponentBody, ComponentKind, ComponentRegistry, Diagnostic,
};

#[derive(Debug)]
pub struct FileRepository {
    root: PathBuf,
    components: BTreeMap<(ComponentKind, ComponentId), Vec<ComponentRecord>>,
    catenas: BTreeMap<CatenaId, Catena>,
    payloads: MemoryStore,
    experience: BTreeMap<ProjectId, Vec<ExperiencePackage>>,
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have parents");
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

fn read_doc<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    from_document(&text).map_err(|e| StoreError::Corrupt {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

/// Sorted subdirectory or file names of `dir`; empty when `dir` is absent.
fn list(dir: &Path) -> Result<Vec<(String, PathBuf)>, StoreError> {
    let rd = match fs::read_dir(dir) {
        Ok(rd) => rd,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StoreError::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| StoreError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".tmp") {
            continue;
        }
        out.push((name, entry.path()));
    }
    out.sort();
    Ok(out)
}

/// Reads `<dir>/1`, `<dir>/2`, ... and checks the numbering is contiguous.
fn read_versions<T: DeserializeOwned>(dir: &Path) -> Result<Vec<T>, StoreError> {
    let mut numbered = Vec::new();
    for (name, path) in list(dir)? {
        let n: u64 = name.parse().map_err(|_| StoreError::Corrupt {
            path: path.clone(),
            message: "version file names must be integers".into(),
        })?;
        numbered.push((n, path));
    }
    numbered.sort();
    let mut out = Vec::with_capacity(numbered.len());
    for (i, (n, path)) in numbered.into_iter().enumerate() {
        if n != i as u64 + 1 {
            return Err(StoreError::Corrupt {
                path,
                message: format!("expected version {}, found {n}", i + 1),
            });
        }
        out.push(read_doc(&path)?);
    }
    Ok(out)
}

fn checked_id(id: &str) -> Result<&str, StoreError> {
    if is_valid_id(id) {
        Ok(id)
    } else {
        Err(StoreError::InvalidComponent(vec![Diagnostic::error(
            id,
            crate::model::codes::INVALID_ID,
            format!("`{id}` is not a valid identifier"),
        )]))
    }
}

impl FileRepository {
    /// Opens (creating if needed) the store at `root` and loads it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| StoreError::io(&root, e))?;
        let mut repo = Self {
            root,
            components: BTreeMap::new(),
            catenas: BTreeMap::new(),
            payloads: MemoryStore::new(),
            experience: BTreeMap::new(),
        };
        repo.load()?;
        Ok(repo)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn load(&mut self) -> Result<(), StoreError> {
        for (kind_name, kind_dir) in list(&self.root.join("components"))? {
            let kind = ComponentKind::parse(&kind_name).ok_or_else(|| StoreError::Corrupt {
                path: kind_dir.clone(),
                message: format!("unknown component kind `{kind_name}`"),
            })?;
            for (id, dir) in list(&kind_dir)? {
                let records: Vec<ComponentRecord> = read_versions(&dir)?;
                self.components.insert((kind, id.into()), records);
            }
        }
        for (id, path) in list(&self.root.join("catenas"))? {
            self.catenas.insert(id.into(), read_doc(&path)?);
        }
        for (entry, dir) in list(&self.root.join("payloads"))? {
            let versions: Vec<Payload> = read_versions(&dir)?;
            for p in versions {
                self.payloads.restore(entry.as_str().into(), p);
            }
        }
        for (project, dir) in list(&self.root.join("experience"))? {
            self.experience.insert(project.into(), read_versions(&dir)?);
        }
        Ok(())
    }

    fn write<T: Serialize>(&self, rel: &[&str], value: &T) -> Result<(), StoreError> {
        let path = rel.iter().fold(self.root.clone(), |p, seg| p.join(seg));
        write_atomic(&path, &to_document(value))
    }

    // Components

    /// Registers a component body under `kind` and `id`. An identical body
    /// returns the current record; a different body creates the next version.
    pub fn register_component(
        &mut self,
        body: ComponentBody,
        kind: ComponentKind,
        id: &ComponentId,
    ) -> Result<ComponentRecord, StoreError> {
        if body.kind() != kind || body.id() != id {
            return Err(StoreError::InvalidComponent(vec![Diagnostic::error(
                id.as_str(),
                crate::model::codes::SPEC_INVALID,
                format!("body is a {} `{}`, expected {kind} `{id}`", body.kind(), body.id()),
            )]));
        }
        let diags = check_component(&body);
        if !diags.is_empty() {
            return Err(StoreError::InvalidComponent(diags));
        }
        let key = (kind, id.clone());
        if let Some(latest) = self.components.get(&key).and_then(|v| v.last()) {
            if to_document(&latest.body) == to_document(&body) {
                return Ok(latest.clone());
            }
        }
        let version = self.components.get(&key).map_or(0, Vec::len) as u64 + 1;
        let record = ComponentRecord {
            kind,
            id: id.clone(),
            version,
            registered_at: Utc::now(),
            tags: body.tags().to_vec(),
            body,
        };
        self.write(
            &["components", kind.as_str(), id.as_str(), &version.to_string()],
            &record,
        )?;
        self.components.entry(key).or_default().push(record.clone());
        Ok(record)
    }

    pub fn register(&mut self, body: ComponentBody) -> Result<ComponentRecord, StoreError> {
        let (kind, id) = (body.kind(), body.id().clone());
        self.register_component(body, kind, &id)
    }

    /// Registers every built-in component. Already registered bodies are
    /// left untouched.
    pub fn seed_builtin(&mut self) -> Result<Vec<ComponentRecord>, StoreError> {
        crate::builtin::all().into_iter().map(|b| self.register(b)).collect()
    }

    /// Latest versions of `kind` whose tags include every tag in `tags`,
    /// ordered by id.
    pub fn lookup_components(&self, kind: ComponentKind, tags: &[String]) -> Vec<&ComponentRecord> {
        self.components
            .iter()
            .filter(|((k, _), _)| *k == kind)
            .filter_map(|(_, versions)| versions.last())
            .filter(|r| tags.iter().all(|t| r.tags.contains(t)))
            .collect()
    }

    pub fn component(&self, kind: ComponentKind, id: &str, version: VersionSel) -> Option<&ComponentRecord> {
        let versions = self.components.get(&(kind, id.into()))?;
        match version {
            VersionSel::Latest => versions.last(),
            VersionSel::Exact(v) => versions.get(v.checked_sub(1)? as usize),
        }
    }

    /// Latest-version registry including reuse counts from the experience base.
    pub fn registry(&self) -> ComponentRegistry {
        let mut r = ComponentRegistry::new();
        for versions in self.components.values() {
            if let Some(latest) = versions.last() {
                r.insert(latest.body.clone());
            }
        }
        r.reuse = self.reuse_counts();
        r
    }

    // Catenas

    pub fn put_catena(&mut self, catena: &Catena) -> Result<(), StoreError> {
        let id = checked_id(catena.meta.id.as_str())?;
        self.write(&["catenas", id], catena)?;
        self.catenas.insert(catena.meta.id.clone(), catena.clone());
        Ok(())
    }

    pub fn catena(&self, id: &str) -> Option<&Catena> {
        self.catenas.get(id)
    }

    pub fn catenas(&self) -> impl Iterator<Item = &Catena> {
        self.catenas.values()
    }

    /// Removes the catena document; payload history is kept.
    pub fn delete_catena(&mut self, id: &str) -> Result<bool, StoreError> {
        if self.catenas.remove(id).is_none() {
            return Ok(false);
        }
        let path = self.root.join("catenas").join(id);
        fs::remove_file(&path).map_err(|e| StoreError::io(&path, e))?;
        Ok(true)
    }

    // Experience base

    /// Persists a package and returns its id `<project>/<n>`.
    pub fn record_experience(&mut self, package: ExperiencePackage) -> Result<String, StoreError> {
        let mut dangling = Vec::new();
        match self.catenas.get(&package.catena) {
            None => dangling.push(format!("catena `{}`", package.catena)),
            Some(c) if c.meta.project != package.project => dangling.push(format!(
                "catena `{}` does not belong to project `{}`",
                package.catena, package.project
            )),
            Some(_) => {}
        }
        for id in package.reused.keys() {
            let known = ComponentKind::ALL
                .into_iter()
                .any(|k| self.components.contains_key(&(k, id.clone())));
            if !known {
                dangling.push(format!("component `{id}`"));
            }
        }
        if !dangling.is_empty() {
            return Err(StoreError::Dangling(dangling));
        }
        let project = checked_id(package.project.as_str())?.to_owned();
        let n = self.experience.get(&package.project).map_or(0, Vec::len) + 1;
        self.write(&["experience", &project, &n.to_string()], &package)?;
        self.experience
            .entry(package.project.clone())
            .or_default()
            .push(package);
        Ok(format!("{project}/{n}"))
    }

    pub fn experience(&self, project: &str) -> &[ExperiencePackage] {
        self.experience.get(project).map_or(&[], Vec::as_slice)
    }

    /// Number of packages referencing each component.
    pub fn reuse_counts(&self) -> BTreeMap<ComponentId, u64> {
        let mut counts = BTreeMap::new();
        for pkg in self.experience.values().flatten() {
            for id in pkg.reused.keys().collect::<BTreeSet<_>>() {
                *counts.entry(id.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every record as it is serialized on disk, keyed by its path relative
    /// to the root with `/` separators.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for ((kind, id), versions) in &self.components {
            for r in versions {
                out.insert(format!("components/{kind}/{id}/{}", r.version), to_document(r));
            }
        }
        for (id, c) in &self.catenas {
            out.insert(format!("catenas/{id}"), to_document(c));
        }
        for entry in self.payloads.entry_ids() {
            for p in self.payloads.history(entry) {
                out.insert(format!("payloads/{entry}/{}", p.version), to_document(&p));
            }
        }
        for (project, pkgs) in &self.experience {
            for (i, pkg) in pkgs.iter().enumerate() {
                out.insert(format!("experience/{project}/{}", i + 1), to_document(pkg));
            }
        }
        out
    }

    pub fn payloads(&self) -> &MemoryStore {
        &self.payloads
    }
}

impl PayloadStore for FileRepository {
    fn put_payload(
        &mut self,
        entry: &EntryId,
        data_type: &ComponentId,
        produced_at: DateTime<Utc>,
        body: Value,
    ) -> Result<Payload, StoreError> {
        let id = checked_id(entry.as_str())?;
        let payload = Payload {
            data_type: data_type.clone(),
            version: self.payloads.latest_version(entry) + 1,
            produced_at,
            body,
        };
        self.write(&["payloads", id, &payload.version.to_string()], &payload)?;
        self.payloads.restore(entry.clone(), payload.clone());
        Ok(payload)
    }

    fn get_payload(&self, entry: &EntryId, version: VersionSel) -> Result<Payload, StoreError> {
        self.payloads.get_payload(entry, version)
    }

    fn latest_version(&self, entry: &EntryId) -> u64 {
        self.payloads.latest_version(entry)
    }

    fn history(&self, entry: &EntryId) -> Vec<Payload> {
        self.payloads.history(entry)
    }
}
