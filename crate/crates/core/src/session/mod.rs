//! Project state for one annotation session: the annotation log, the
//! function registry, model choice, sampler state and the latest fitted
//! snapshot.
//!
//! Mutations go through `&mut Project` (single writer). Fitting is split into
//! [`Project::prepare_fit`], [`FitJob::run`] and [`Project::publish`] so a
//! caller can run the expensive middle step without holding the project.

mod feedback;
mod snapshot;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusPaths, Split};
use crate::error::{Error, Result};
use crate::labelmodel::{build_matrix, export_records, lf_stats, ExportRecord, FitConfig, ModelKind};
use crate::rules::{synthesize, LabelingFunction, SpanAnnotation, DEFAULT_TAU};
use crate::sampler::{next_document, ModelView, Pick, SamplerState};

pub use feedback::{Context, FalsePositive, FpReport, TrainMatch, CONTEXT_WINDOW, TRAIN_SAMPLE};
pub use snapshot::{selection_hash, FitJob, ModelSnapshot, SnapshotSummary};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectConfig {
    pub model: ModelKind,
    pub tau_default: f64,
    pub seed: u64,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Generative,
            tau_default: DEFAULT_TAU,
            seed: 0,
        }
    }
}

/// A suggested function with preview statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Suggestion {
    pub lf: LabelingFunction,
    /// Train documents with at least one match.
    pub doc_coverage: usize,
    /// Fraction of train tokens the function votes on.
    pub coverage: f64,
    pub train_votes: usize,
    pub dev_precision: Option<f64>,
    pub dev_votes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Suggestions {
    pub annotation_index: usize,
    /// The demonstration was made on a dev or test document.
    pub off_train: bool,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotStatus {
    None,
    Fresh,
    Stale,
}

#[derive(Debug)]
pub struct Project {
    corpus: Arc<Corpus>,
    corpus_paths: Option<CorpusPaths>,
    config: ProjectConfig,
    fit_config: FitConfig,
    annotations: Vec<SpanAnnotation>,
    registry: IndexMap<String, LabelingFunction>,
    selected: IndexSet<String>,
    snapshot: Option<Arc<ModelSnapshot>>,
    recorded: Option<SnapshotRecord>,
    sampler: SamplerState,
}

impl Project {
    pub fn new(corpus: Arc<Corpus>, corpus_paths: Option<CorpusPaths>, config: ProjectConfig) -> Self {
        let sampler = SamplerState::new(config.seed);
        Self {
            corpus,
            corpus_paths,
            config,
            fit_config: FitConfig::default(),
            annotations: Vec::new(),
            registry: IndexMap::new(),
            selected: IndexSet::new(),
            snapshot: None,
            recorded: None,
            sampler,
        }
    }

    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn corpus_paths(&self) -> Option<&CorpusPaths> {
        self.corpus_paths.as_ref()
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.config
    }

    pub fn model(&self) -> ModelKind {
        self.config.model
    }

    pub fn set_model(&mut self, model: ModelKind) {
        self.config.model = model;
    }

    pub fn fit_config(&self) -> &FitConfig {
        &self.fit_config
    }

    pub fn annotations(&self) -> &[SpanAnnotation] {
        &self.annotations
    }

    /// All known functions, in registration order.
    pub fn functions(&self) -> impl Iterator<Item = &LabelingFunction> {
        self.registry.values()
    }

    pub fn function(&self, id: &str) -> Option<&LabelingFunction> {
        self.registry.get(id)
    }

    pub fn is_selected(&self, id: &str) -> bool {
        self.selected.contains(id)
    }

    /// Selected functions in registration order; this is the column order of
    /// every label matrix the project builds.
    pub fn selected_functions(&self) -> Vec<LabelingFunction> {
        self.registry
            .values()
            .filter(|f| self.selected.contains(f.id()))
            .cloned()
            .collect()
    }

    pub fn selected_hash(&self) -> String {
        selection_hash(self.selected.iter().map(String::as_str))
    }

    pub fn sampler(&self) -> &SamplerState {
        &self.sampler
    }

    pub fn snapshot(&self) -> Option<&Arc<ModelSnapshot>> {
        self.snapshot.as_ref()
    }

    pub fn status(&self) -> SnapshotStatus {
        match &self.snapshot {
            None => SnapshotStatus::None,
            Some(s) if s.selected_hash == self.selected_hash() && s.model_kind == self.config.model => {
                SnapshotStatus::Fresh
            }
            Some(_) => SnapshotStatus::Stale,
        }
    }

    /// Validates and logs a demonstration, then registers its candidate
    /// functions as suggestions.
    pub fn submit_annotation(&mut self, ann: SpanAnnotation) -> Result<Suggestions> {
        let index = self.annotations.len();
        let synthesis = synthesize(&ann, &self.corpus, self.config.tau_default, Some(index))?;
        self.annotations.push(ann);

        let lfs: Vec<LabelingFunction> = synthesis.candidates.iter().map(|c| c.lf.clone()).collect();
        let stats = if lfs.is_empty() {
            Vec::new()
        } else {
            let train = build_matrix(&self.corpus, &lfs, Split::Train)?;
            let dev = snapshot::dev_inputs(&self.corpus, &lfs)?;
            lf_stats(&train, dev.as_ref().map(|(m, g)| (m, g.as_slice())))
        };
        let mut suggestions = Vec::with_capacity(lfs.len());
        for (cand, s) in synthesis.candidates.into_iter().zip(stats) {
            let lf = self.registry.entry(cand.lf.id().to_string()).or_insert(cand.lf).clone();
            suggestions.push(Suggestion {
                lf,
                doc_coverage: cand.doc_coverage,
                coverage: s.coverage,
                train_votes: s.train_votes,
                dev_precision: s.dev_precision,
                dev_votes: s.dev_votes,
            });
        }
        Ok(Suggestions {
            annotation_index: index,
            off_train: synthesis.off_train,
            suggestions,
        })
    }

    /// Registers a user-built function (e.g. a negated variant).
    pub fn add_function(&mut self, lf: LabelingFunction) -> Result<&LabelingFunction> {
        lf.vote(self.corpus.labels())?;
        crate::rules::CompiledFunction::new(&lf, &self.corpus)?;
        Ok(self.registry.entry(lf.id().to_string()).or_insert(lf))
    }

    /// Registers a copy of `id` with one condition's negation flipped.
    pub fn toggle_negation(&mut self, id: &str, position: usize, index: usize) -> Result<LabelingFunction> {
        let lf = self
            .registry
            .get(id)
            .ok_or_else(|| Error::UnknownFunction(id.to_string()))?
            .toggle_negation(position, index)?;
        Ok(self.add_function(lf)?.clone())
    }

    pub fn set_selected(&mut self, id: &str, selected: bool) -> Result<()> {
        if !self.registry.contains_key(id) {
            return Err(Error::UnknownFunction(id.to_string()));
        }
        if selected {
            self.selected.insert(id.to_string());
        } else {
            self.selected.shift_remove(id);
        }
        Ok(())
    }

    /// Drops an unselected suggestion from the registry.
    pub fn prune(&mut self, id: &str) -> Result<()> {
        if self.selected.contains(id) {
            return Err(Error::Invalid(format!("function {id} is selected; deselect it first")));
        }
        if self
            .recorded
            .as_ref()
            .is_some_and(|r| r.functions.iter().any(|f| f == id))
        {
            return Err(Error::Invalid(format!("function {id} is used by the latest fit")));
        }
        self.registry
            .shift_remove(id)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownFunction(id.to_string()))
    }

    pub fn prepare_fit(&self) -> Result<FitJob> {
        let functions = self.selected_functions();
        if functions.is_empty() {
            return Err(Error::EmptySelection);
        }
        Ok(FitJob {
            corpus: Arc::clone(&self.corpus),
            functions,
            model: self.config.model,
            config: self.fit_config.clone(),
            selected_hash: self.selected_hash(),
        })
    }

    pub fn publish(&mut self, snapshot: ModelSnapshot) -> Arc<ModelSnapshot> {
        self.recorded = Some(SnapshotRecord {
            selected_hash: snapshot.selected_hash.clone(),
            model: snapshot.model_kind,
            functions: snapshot.functions.iter().map(|f| f.id().to_string()).collect(),
        });
        let snapshot = Arc::new(snapshot);
        self.snapshot = Some(Arc::clone(&snapshot));
        snapshot
    }

    /// Fits the chosen model on the current selection and publishes the result.
    /// On failure the previous snapshot is kept.
    pub fn retrain(&mut self) -> Result<Arc<ModelSnapshot>> {
        let snapshot = self.prepare_fit()?.run()?;
        Ok(self.publish(snapshot))
    }

    /// What the latest fit was trained on, including fits made before the
    /// project was last saved.
    pub fn recorded_snapshot(&self) -> Option<&SnapshotRecord> {
        self.recorded.as_ref()
    }

    /// Rebuilds the recorded snapshot of a loaded project by refitting its
    /// functions with its model. Fits are deterministic, so the result equals
    /// the snapshot that was recorded. Returns `None` when nothing was recorded.
    pub fn restore_snapshot(&mut self) -> Result<Option<Arc<ModelSnapshot>>> {
        if let Some(s) = &self.snapshot {
            return Ok(Some(Arc::clone(s)));
        }
        let Some(record) = self.recorded.clone() else {
            return Ok(None);
        };
        let functions = record
            .functions
            .iter()
            .map(|id| {
                self.registry
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::UnknownFunction(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let job = FitJob {
            corpus: Arc::clone(&self.corpus),
            functions,
            model: record.model,
            config: self.fit_config.clone(),
            selected_hash: record.selected_hash,
        };
        Ok(Some(self.publish(job.run()?)))
    }

    pub fn next_document(&mut self) -> Result<Pick> {
        let view = self.snapshot.as_ref().map(|s| ModelView {
            train: &s.train_posterior,
            dev: s.dev_posterior.as_ref(),
        });
        next_document(&mut self.sampler, view, &self.corpus)
    }

    pub fn fp_feedback(&self, id: &str) -> Result<FpReport> {
        let lf = self
            .registry
            .get(id)
            .ok_or_else(|| Error::UnknownFunction(id.to_string()))?;
        feedback::fp_report(lf, &self.corpus)
    }

    /// Label export for `split` under the latest snapshot.
    pub fn export(&self, split: Split, force: bool) -> Result<Vec<ExportRecord>> {
        let snapshot = self.snapshot.as_ref().ok_or(Error::NoSnapshot)?;
        if !force && self.status() != SnapshotStatus::Fresh {
            return Err(Error::StaleSnapshot);
        }
        let p = snapshot.posterior_for(&self.corpus, split)?;
        export_records(&self.corpus, &p)
    }

    pub fn to_file(&self) -> ProjectFile {
        ProjectFile {
            version: SCHEMA_VERSION,
            labels: self.corpus.labels().classes().to_vec(),
            model: self.config.model,
            tau_default: self.config.tau_default,
            corpus_paths: self.corpus_paths.clone(),
            annotations: self.annotations.clone(),
            lfs: RegistryFile {
                suggested: self.registry.values().cloned().collect(),
                selected: self.selected.iter().cloned().collect(),
            },
            sampler: self.sampler.clone(),
            snapshot: self.recorded.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_file()).expect("project serializes");
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// Loads a project and re-ingests its corpus from the recorded paths.
    pub fn load(path: &Path) -> Result<Self> {
        let file = ProjectFile::read(path)?;
        let paths = file
            .corpus_paths
            .clone()
            .ok_or_else(|| Error::CorruptProject("project has no corpus paths".into()))?;
        let paths = resolve_relative(paths, path.parent().unwrap_or(Path::new(".")));
        let corpus = Arc::new(Corpus::ingest(&paths)?);
        Self::from_file(file, corpus)
    }

    /// Rebuilds a project from its file against an already loaded corpus.
    pub fn from_file(file: ProjectFile, corpus: Arc<Corpus>) -> Result<Self> {
        if file.labels != corpus.labels().classes() {
            return Err(Error::CorruptProject(format!(
                "project labels {:?} differ from corpus labels {:?}",
                file.labels,
                corpus.labels().classes()
            )));
        }
        let mut project = Project::new(
            corpus,
            file.corpus_paths,
            ProjectConfig {
                model: file.model,
                tau_default: file.tau_default,
                seed: file.sampler.seed,
            },
        );
        for ann in &file.annotations {
            crate::rules::synthesize(ann, &project.corpus, project.config.tau_default, None)
                .map_err(|e| Error::CorruptProject(format!("annotation {ann:?}: {e}")))?;
        }
        project.annotations = file.annotations;
        for lf in file.lfs.suggested {
            project.add_function(lf)?;
        }
        for id in &file.lfs.selected {
            project
                .set_selected(id, true)
                .map_err(|_| Error::CorruptProject(format!("selected id {id} is not registered")))?;
        }
        if let Some(record) = &file.snapshot {
            if let Some(id) = record.functions.iter().find(|id| !project.registry.contains_key(*id)) {
                return Err(Error::CorruptProject(format!(
                    "snapshot function {id} is not registered"
                )));
            }
        }
        project.recorded = file.snapshot;
        project.sampler = file.sampler;
        Ok(project)
    }
}

fn resolve_relative(mut paths: CorpusPaths, base: &Path) -> CorpusPaths {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    fix(&mut paths.corpus);
    fix(&mut paths.emb_a);
    fix(&mut paths.emb_b);
    fix(&mut paths.sent);
    fix(&mut paths.labels);
    paths
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistryFile {
    pub suggested: Vec<LabelingFunction>,
    pub selected: Vec<String>,
}

/// On-disk project document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectFile {
    pub version: u64,
    pub labels: Vec<String>,
    pub model: ModelKind,
    pub tau_default: f64,
    pub corpus_paths: Option<CorpusPaths>,
    pub annotations: Vec<SpanAnnotation>,
    pub lfs: RegistryFile,
    pub sampler: SamplerState,
    /// Absent until the first fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SnapshotRecord>,
}

/// Functions, model and selection hash of the latest fit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub selected_hash: String,
    pub model: ModelKind,
    pub functions: Vec<String>,
}

impl ProjectFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::CorruptProject(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptProject("missing version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| Error::CorruptProject(e.to_string()))
    }
}
