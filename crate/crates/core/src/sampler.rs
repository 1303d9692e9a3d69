//! Next-document selection.
//!
//! Calls alternate between false-positive-guided sampling (the unserved train
//! document most similar to the dev document the model most disbelieves) and
//! uncertainty sampling (highest mean token entropy). Without a fitted model
//! or dev gold the guided step falls back to uncertainty, which itself falls
//! back to a seeded uniform draw before the first fit.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Split};
use crate::error::{Error, Result};
use crate::labelmodel::{entropy, PosteriorMatrix, Segment};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerState {
    pub parity: u64,
    pub served: IndexSet<String>,
    pub seed: u64,
}

impl SamplerState {
    pub fn new(seed: u64) -> Self {
        Self {
            parity: 0,
            served: IndexSet::new(),
            seed,
        }
    }

    fn unserved_train<'c>(&self, corpus: &'c Corpus) -> Vec<&'c Document> {
        corpus
            .docs_in(Split::Train)
            .filter(|d| !self.served.contains(&d.id))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "similar-to-error")]
    FpGuided,
    #[serde(rename = "uncertain")]
    Uncertainty,
    #[serde(rename = "uncertainty-cold-start")]
    ColdStart,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::FpGuided => "similar-to-error",
            Strategy::Uncertainty => "uncertain",
            Strategy::ColdStart => "uncertainty-cold-start",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Posteriors of the current fitted model over the train and dev splits.
#[derive(Clone, Copy, Debug)]
pub struct ModelView<'a> {
    pub train: &'a PosteriorMatrix,
    pub dev: Option<&'a PosteriorMatrix>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Pick {
    pub doc_id: String,
    pub strategy: Strategy,
}

/// Mean posterior mass on the gold label over a document's tokens.
pub fn dev_error_score(p: &PosteriorMatrix, seg: &Segment, gold: &[usize]) -> f64 {
    let total: f64 = p.segment_rows(seg).zip(gold).map(|(row, &g)| row[g]).sum();
    total / seg.len as f64
}

/// The dev document whose gold labels the model believes least, ties by id.
pub fn worst_dev_document<'c>(dev: &PosteriorMatrix, corpus: &'c Corpus) -> Option<(&'c Document, f64)> {
    let mut best: Option<(&Document, f64)> = None;
    for seg in dev.segments() {
        let Some(doc) = corpus.doc(&seg.doc_id) else { continue };
        let Some(gold) = doc.visible_gold() else { continue };
        let score = dev_error_score(dev, seg, gold);
        let better = match best {
            None => true,
            Some((b, s)) => score < s || (score == s && doc.id < b.id),
        };
        if better {
            best = Some((doc, score));
        }
    }
    best
}

fn mark(state: &mut SamplerState, doc: &Document) -> String {
    state.served.insert(doc.id.clone());
    doc.id.clone()
}

/// Unserved train document most similar to the worst dev document.
pub fn fp_guided_pick(state: &mut SamplerState, model: Option<ModelView<'_>>, corpus: &Corpus) -> Result<String> {
    let candidates = state.unserved_train(corpus);
    if candidates.is_empty() {
        return Err(Error::Exhausted);
    }
    let model = model.ok_or(Error::NoSnapshot)?;
    let dev = model.dev.ok_or_else(|| Error::MissingGold(Split::Dev.to_string()))?;
    let (anchor, _) = worst_dev_document(dev, corpus).ok_or_else(|| Error::MissingGold(Split::Dev.to_string()))?;

    let mut best: Option<(&Document, f64)> = None;
    for doc in candidates {
        let sim = corpus.doc_similarity(doc, anchor);
        let better = match best {
            None => true,
            Some((b, s)) => sim > s || (sim == s && doc.id < b.id),
        };
        if better {
            best = Some((doc, sim));
        }
    }
    Ok(mark(state, best.expect("nonempty candidates").0))
}

/// Mean token entropy per train document, keyed by doc id.
pub fn document_entropies(train: &PosteriorMatrix) -> HashMap<&str, f64> {
    train
        .segments()
        .iter()
        .map(|seg| {
            let total: f64 = train.segment_rows(seg).map(entropy).sum();
            (seg.doc_id.as_str(), total / seg.len as f64)
        })
        .collect()
}

/// Highest mean-entropy unserved train document, or a seeded uniform draw
/// when no model has been fitted.
pub fn uncertainty_pick(
    state: &mut SamplerState,
    model: Option<ModelView<'_>>,
    corpus: &Corpus,
) -> Result<(String, Strategy)> {
    let candidates = state.unserved_train(corpus);
    if candidates.is_empty() {
        return Err(Error::Exhausted);
    }
    let Some(model) = model else {
        let mut rng =
            ChaCha8Rng::seed_from_u64(state.seed ^ (state.served.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let doc = *candidates.choose(&mut rng).expect("nonempty candidates");
        return Ok((mark(state, doc), Strategy::ColdStart));
    };
    let entropies = document_entropies(model.train);
    let mut best: Option<(&Document, f64)> = None;
    for doc in candidates {
        let h = entropies.get(doc.id.as_str()).copied().unwrap_or(0.0);
        let better = match best {
            None => true,
            Some((b, s)) => h > s || (h == s && doc.id < b.id),
        };
        if better {
            best = Some((doc, h));
        }
    }
    Ok((mark(state, best.expect("nonempty candidates").0), Strategy::Uncertainty))
}

/// Alternates strategies by parity: even calls are guided by dev errors
/// (falling back to uncertainty when unavailable), odd calls use uncertainty.
pub fn next_document(state: &mut SamplerState, model: Option<ModelView<'_>>, corpus: &Corpus) -> Result<Pick> {
    let pick = if state.parity.is_multiple_of(2) {
        match fp_guided_pick(state, model, corpus) {
            Ok(doc_id) => Pick {
                doc_id,
                strategy: Strategy::FpGuided,
            },
            Err(Error::Exhausted) => return Err(Error::Exhausted),
            Err(_) => {
                let (doc_id, strategy) = uncertainty_pick(state, model, corpus)?;
                Pick { doc_id, strategy }
            }
        }
    } else {
        let (doc_id, strategy) = uncertainty_pick(state, model, corpus)?;
        Pick { doc_id, strategy }
    };
    state.parity += 1;
    Ok(pick)
}
