//! File-backed workspace: the store, specifications, runs and the snapshots
//! runs are bound to, kept as JSON documents in one data directory.
//!
//! Layout: `store.json`, `specs/<digest>.json`, `runs/<run_id>.json`,
//! `snapshots/<snapshot_id>.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{FeedPage, Indicator, IndicatorError, IndicatorValue, Notification};
use crate::pipeline::{Amendment, PipelineError, Run, RunConfig, RunState};
use crate::registry::{Description, Element, ElementKind, Predicate, RegistryDocument, RegistryError};
use crate::selection::VOVariant;
use crate::social::{GraphDocument, Relation};
use crate::spec::{validate_spec, VOSpecification, Violation};
use crate::store::{Mutation, Snapshot, StoreDocument, StoreError, StoreState};
use crate::Store;

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("unknown specification `{0}`")]
    UnknownSpec(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("snapshot `{0}` is missing from the data directory")]
    MissingSnapshot(String),
    #[error("specification is invalid ({} violation(s))", .0.len())]
    InvalidSpec(Vec<Violation>),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl WorkspaceError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            WorkspaceError::InvalidSpec(v) => v,
            WorkspaceError::Pipeline(p) => p.violations(),
            _ => &[],
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, WorkspaceError> {
    let text = fs::read_to_string(path).map_err(|source| WorkspaceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| WorkspaceError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WorkspaceError> {
    let io_err = |source| WorkspaceError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("workspace types serialize");
    text.push('\n');
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

fn list_json(dir: &Path) -> Result<Vec<PathBuf>, WorkspaceError> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(source) => {
            return Err(WorkspaceError::Io {
                path: dir.to_path_buf(),
                source,
            })
        }
    };
    for entry in entries {
        let path = entry
            .map_err(|source| WorkspaceError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|x| x == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSpec {
    pub id: String,
    pub spec: VOSpecification,
}

/// Outcome of a mutation: the event plus runs whose variants went stale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationReport {
    #[serde(flatten)]
    pub mutation: Mutation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stale_runs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported: usize,
    pub events: usize,
    pub notifications: usize,
}

/// In-memory state of a data directory. Without a directory nothing is
/// persisted, which is what tests and embedded use want.
#[derive(Debug, Default)]
pub struct Workspace {
    dir: Option<PathBuf>,
    store: Store,
    specs: BTreeMap<String, VOSpecification>,
    runs: BTreeMap<String, Run>,
    snapshots: BTreeMap<String, Snapshot>,
}

impl Workspace {
    pub fn in_memory() -> Self {
        Workspace::default()
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, WorkspaceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| WorkspaceError::Io {
            path: dir.clone(),
            source,
        })?;
        let store_path = dir.join("store.json");
        let store = if store_path.exists() {
            Store::from_state(read_json::<StoreState>(&store_path)?)?
        } else {
            Store::new()
        };
        let mut specs = BTreeMap::new();
        for p in list_json(&dir.join("specs"))? {
            let s: StoredSpec = read_json(&p)?;
            specs.insert(s.id, s.spec);
        }
        let mut runs = BTreeMap::new();
        for p in list_json(&dir.join("runs"))? {
            let r: Run = read_json(&p)?;
            runs.insert(r.run_id.clone(), r);
        }
        Ok(Workspace {
            dir: Some(dir),
            store,
            specs,
            runs,
            snapshots: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn save_store(&self) -> Result<(), WorkspaceError> {
        match &self.dir {
            Some(d) => write_json(&d.join("store.json"), &self.store.to_state()),
            None => Ok(()),
        }
    }

    fn save_run(&self, id: &str) -> Result<(), WorkspaceError> {
        match (&self.dir, self.runs.get(id)) {
            (Some(d), Some(run)) => write_json(&d.join("runs").join(format!("{id}.json")), run),
            _ => Ok(()),
        }
    }

    /// Hands notifications to every run and persists the store and the runs
    /// that changed.
    fn after_mutation(&mut self, mutation: Mutation) -> Result<MutationReport, WorkspaceError> {
        let mut stale_runs = Vec::new();
        for (id, run) in self.runs.iter_mut() {
            let marked: usize = mutation.notifications.iter().map(|n| run.on_notification(n)).sum();
            if marked > 0 {
                stale_runs.push(id.clone());
            }
        }
        for id in &stale_runs {
            self.save_run(id)?;
        }
        self.save_store()?;
        Ok(MutationReport { mutation, stale_runs })
    }

    pub fn register_element(
        &mut self,
        element: Element,
        descriptions: Vec<Description>,
    ) -> Result<MutationReport, WorkspaceError> {
        let m = self.store.register_element(element, descriptions)?;
        self.after_mutation(m)
    }

    pub fn update_element(
        &mut self,
        element: Element,
        descriptions: Vec<Description>,
    ) -> Result<MutationReport, WorkspaceError> {
        let m = self.store.update_element(element, descriptions)?;
        self.after_mutation(m)
    }

    pub fn add_relation(&mut self, relation: Relation) -> Result<MutationReport, WorkspaceError> {
        let m = self.store.add_relation(relation)?;
        self.after_mutation(m)
    }

    pub fn define_indicator(&mut self, indicator: Indicator) -> Result<(IndicatorValue, MutationReport), WorkspaceError> {
        let (value, m) = self.store.define_indicator(indicator)?;
        Ok((value, self.after_mutation(m)?))
    }

    pub fn evaluate_indicator(&self, id: &str) -> Result<IndicatorValue, WorkspaceError> {
        Ok(self.store.evaluate_indicator(id)?)
    }

    pub fn poll(&self, cursor: u64, limit: usize) -> FeedPage {
        self.store.poll(cursor, limit)
    }

    pub fn search(&self, query: &[Predicate]) -> Result<Vec<Element>, WorkspaceError> {
        Ok(self.store.registry().search(query)?.into_iter().cloned().collect())
    }

    /// Registers every element of the document, one event each; partners
    /// first so that services can name their providers.
    pub fn import_registry(&mut self, doc: RegistryDocument) -> Result<ImportReport, WorkspaceError> {
        let mut descriptions: BTreeMap<String, Vec<Description>> = BTreeMap::new();
        for c in doc.competences {
            descriptions.entry(c.owner_id.clone()).or_default().push(Description::Competence(c));
        }
        for s in doc.services {
            descriptions.entry(s.service_id.clone()).or_default().push(Description::Service(s));
        }
        let mut elements = doc.elements;
        elements.sort_by_key(|e| e.kind != ElementKind::Partner);
        let mut report = ImportReport::default();
        for e in elements {
            let d = descriptions.remove(&e.id).unwrap_or_default();
            let m = self.register_element(e, d)?;
            report.imported += 1;
            report.events += 1;
            report.notifications += m.mutation.notifications.len();
        }
        if let Some(owner) = descriptions.into_keys().next() {
            return Err(RegistryError::UnknownElement(owner).into());
        }
        Ok(report)
    }

    pub fn import_graph(&mut self, doc: GraphDocument) -> Result<ImportReport, WorkspaceError> {
        let mut report = ImportReport::default();
        for r in doc.relations {
            let m = self.add_relation(r)?;
            report.imported += 1;
            report.events += 1;
            report.notifications += m.mutation.notifications.len();
        }
        Ok(report)
    }

    pub fn export(&self) -> StoreDocument {
        self.store.export()
    }

    /// Validates and stores a specification under its content digest.
    pub fn put_spec(&mut self, spec: VOSpecification) -> Result<String, WorkspaceError> {
        let violations = validate_spec(&spec);
        if !violations.is_empty() {
            return Err(WorkspaceError::InvalidSpec(violations));
        }
        let id = spec.digest();
        if let Some(d) = &self.dir {
            write_json(
                &d.join("specs").join(format!("{id}.json")),
                &StoredSpec {
                    id: id.clone(),
                    spec: spec.clone(),
                },
            )?;
        }
        self.specs.insert(id.clone(), spec);
        Ok(id)
    }

    pub fn spec(&self, id: &str) -> Result<&VOSpecification, WorkspaceError> {
        self.specs.get(id).ok_or_else(|| WorkspaceError::UnknownSpec(id.to_string()))
    }

    pub fn specs(&self) -> impl Iterator<Item = (&String, &VOSpecification)> {
        self.specs.iter()
    }

    pub fn run(&self, id: &str) -> Result<&Run, WorkspaceError> {
        self.runs.get(id).ok_or_else(|| WorkspaceError::UnknownRun(id.to_string()))
    }

    pub fn runs(&self) -> impl Iterator<Item = &Run> {
        self.runs.values()
    }

    pub fn variants(&self, id: &str) -> Result<Vec<VOVariant>, WorkspaceError> {
        Ok(self.run(id)?.variants.clone().unwrap_or_default())
    }

    fn snapshot_for(&mut self, id: &str) -> Result<Snapshot, WorkspaceError> {
        if let Some(s) = self.snapshots.get(id) {
            return Ok(s.clone());
        }
        let current = self.store.snapshot();
        if current.id() == id {
            self.snapshots.insert(id.to_string(), current.clone());
            return Ok(current);
        }
        let dir = self
            .dir
            .as_ref()
            .ok_or_else(|| WorkspaceError::MissingSnapshot(id.to_string()))?;
        let path = dir.join("snapshots").join(format!("{id}.json"));
        if !path.exists() {
            return Err(WorkspaceError::MissingSnapshot(id.to_string()));
        }
        let snap = Snapshot::from_document(read_json(&path)?)?;
        if snap.id() != id {
            return Err(WorkspaceError::MissingSnapshot(id.to_string()));
        }
        self.snapshots.insert(id.to_string(), snap.clone());
        Ok(snap)
    }

    /// Captures the current store, persisting the capture for later phases.
    pub fn snapshot(&mut self) -> Result<Snapshot, WorkspaceError> {
        let snap = self.store.snapshot();
        if let Some(d) = &self.dir {
            let path = d.join("snapshots").join(format!("{}.json", snap.id()));
            if !path.exists() {
                write_json(&path, &snap.to_document())?;
            }
        }
        self.snapshots.insert(snap.id().to_string(), snap.clone());
        Ok(snap)
    }

    /// Creates a run over a fresh snapshot and advances it until `until` (or
    /// until it halts). An existing run with the same id is replaced.
    pub fn start_run(
        &mut self,
        spec: VOSpecification,
        config: RunConfig,
        until: RunState,
    ) -> Result<&Run, WorkspaceError> {
        let snap = self.snapshot()?;
        let mut run = Run::new(spec, &snap, config)?;
        while run.state < until && run.state < RunState::PerformanceRanked {
            run.advance(&snap)?;
        }
        let id = run.run_id.clone();
        self.runs.insert(id.clone(), run);
        self.save_run(&id)?;
        self.run(&id)
    }

    fn with_run<T>(
        &mut self,
        id: &str,
        f: impl FnOnce(&mut Run, &Snapshot, &mut Store) -> Result<T, PipelineError>,
    ) -> Result<T, WorkspaceError> {
        let snapshot_id = self.run(id)?.snapshot_id.clone();
        let snap = self.snapshot_for(&snapshot_id)?;
        let mut run = self.run(id)?.clone();
        let out = f(&mut run, &snap, &mut self.store)?;
        self.runs.insert(id.to_string(), run);
        self.save_run(id)?;
        Ok(out)
    }

    pub fn advance(&mut self, id: &str) -> Result<RunState, WorkspaceError> {
        self.with_run(id, |run, snap, _| run.advance(snap))
    }

    pub fn loop_back(
        &mut self,
        id: &str,
        target: RunState,
        amendment: Option<Amendment>,
    ) -> Result<RunState, WorkspaceError> {
        self.with_run(id, |run, snap, _| run.loop_back(target, amendment, snap))
    }

    /// Incepts the variant at `rank`; the resulting registration is a store
    /// mutation and is broadcast like any other.
    pub fn incept(&mut self, id: &str, rank: u32, override_stale: bool) -> Result<String, WorkspaceError> {
        let before = self.store.monitor().feed().len();
        let vo = self.with_run(id, |run, snap, store| run.incept_vo(store, snap, rank, override_stale))?;
        let fresh: Vec<Notification> = self.store.monitor().feed()[before..].to_vec();
        let mut touched = Vec::new();
        for (rid, run) in self.runs.iter_mut() {
            if fresh.iter().map(|n| run.on_notification(n)).sum::<usize>() > 0 {
                touched.push(rid.clone());
            }
        }
        for rid in touched {
            self.save_run(&rid)?;
        }
        self.save_store()?;
        Ok(vo)
    }
}
