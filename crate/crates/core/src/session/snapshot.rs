use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Split};
use crate::error::Result;
use crate::labelmodel::{
    build_matrix, evaluate_split, lf_stats, Aggregator, FitConfig, LabelMatrix, LabelModel, LfStats, ModelKind,
    ModelMetrics, PosteriorMatrix,
};
use crate::rules::LabelingFunction;

/// Order-independent fingerprint of a selection.
pub fn selection_hash<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Immutable result of one fit.
#[derive(Debug)]
pub struct ModelSnapshot {
    pub selected_hash: String,
    pub model_kind: ModelKind,
    /// Functions in matrix column order.
    pub functions: Vec<LabelingFunction>,
    pub model: Arc<dyn LabelModel>,
    pub train_posterior: PosteriorMatrix,
    pub dev_posterior: Option<PosteriorMatrix>,
    pub dev_metrics: Option<ModelMetrics>,
    pub lf_stats: Vec<LfStats>,
    pub fit_duration: Duration,
}

impl ModelSnapshot {
    pub fn stats_for(&self, lf_id: &str) -> Option<&LfStats> {
        self.functions
            .iter()
            .position(|f| f.id() == lf_id)
            .map(|j| &self.lf_stats[j])
    }

    /// Posteriors for any split under this snapshot's functions and parameters.
    pub fn posterior_for(&self, corpus: &Corpus, split: Split) -> Result<PosteriorMatrix> {
        match split {
            Split::Train => Ok(self.train_posterior.clone()),
            Split::Dev if self.dev_posterior.is_some() => Ok(self.dev_posterior.clone().unwrap()),
            _ => self.model.posterior(&build_matrix(corpus, &self.functions, split)?),
        }
    }

    /// Summary without the large matrices.
    pub fn summary(&self) -> SnapshotSummary {
        SnapshotSummary {
            selected_hash: self.selected_hash.clone(),
            model: self.model_kind,
            functions: self
                .functions
                .iter()
                .zip(&self.lf_stats)
                .map(|(f, s)| (f.id().to_string(), f.name().to_string(), s.clone()))
                .collect(),
            dev_metrics: self.dev_metrics.clone(),
            params: self.model.params_json(),
            fit_ms: self.fit_duration.as_secs_f64() * 1000.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotSummary {
    pub selected_hash: String,
    pub model: ModelKind,
    pub functions: Vec<(String, String, LfStats)>,
    pub dev_metrics: Option<ModelMetrics>,
    pub params: serde_json::Value,
    pub fit_ms: f64,
}

/// Everything a fit needs, detached from the project so it can run off the
/// mutation path.
#[derive(Clone, Debug)]
pub struct FitJob {
    pub corpus: Arc<Corpus>,
    pub functions: Vec<LabelingFunction>,
    pub model: ModelKind,
    pub config: FitConfig,
    pub selected_hash: String,
}

pub(crate) fn dev_inputs(corpus: &Corpus, functions: &[LabelingFunction]) -> Result<Option<(LabelMatrix, Vec<usize>)>> {
    if corpus.docs_in(Split::Dev).next().is_none() {
        return Ok(None);
    }
    let m = build_matrix(corpus, functions, Split::Dev)?;
    let gold = corpus
        .docs_in(Split::Dev)
        .flat_map(|d| d.visible_gold().unwrap_or_default().iter().copied())
        .collect();
    Ok(Some((m, gold)))
}

impl FitJob {
    pub fn run(self) -> Result<ModelSnapshot> {
        let started = Instant::now();
        let corpus = &*self.corpus;
        let train = build_matrix(corpus, &self.functions, Split::Train)?;
        let fit = self.model.fit(&train, &self.config)?;
        let dev = dev_inputs(corpus, &self.functions)?;
        let (dev_posterior, dev_metrics) = match &dev {
            Some((m, _)) => {
                let p = fit.model.posterior(m)?;
                p.check()?;
                let metrics = evaluate_split(&p, corpus, Split::Dev)?;
                (Some(p), Some(metrics))
            }
            None => (None, None),
        };
        let lf_stats = lf_stats(&train, dev.as_ref().map(|(m, g)| (m, g.as_slice())));
        Ok(ModelSnapshot {
            selected_hash: self.selected_hash,
            model_kind: self.model,
            functions: self.functions,
            model: fit.model,
            train_posterior: fit.posterior,
            dev_posterior,
            dev_metrics,
            lf_stats,
            fit_duration: started.elapsed(),
        })
    }
}
