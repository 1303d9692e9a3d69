use crate::corpus::{Corpus, Document, EmbeddingStore, Token};
use crate::error::{Error, Result};

use super::{AtomicCondition, ConditionKind, LabelingFunction, MatchSpan};

/// Slack on similarity thresholds for f32 rounding of normalized rows, so an
/// anchor always matches its own token even at `tau = 1`.
const SIMILARITY_SLACK: f64 = 1e-6;

enum Test<'c> {
    Exact(&'c str),
    Similar {
        store: &'c EmbeddingStore,
        anchor: &'c [f32],
        tau: f64,
    },
    Pos(&'c str),
    Dep(&'c str),
    Ner(&'c str),
}

struct CompiledCondition<'c> {
    test: Test<'c>,
    negated: bool,
}

impl<'c> CompiledCondition<'c> {
    fn compile(cond: &'c AtomicCondition, corpus: &'c Corpus) -> Result<Self> {
        let anchor = || cond.anchor.as_deref().unwrap_or("");
        let test = match cond.kind {
            ConditionKind::TokenExact => Test::Exact(anchor()),
            ConditionKind::PosMatch => Test::Pos(anchor()),
            ConditionKind::DepMatch => Test::Dep(anchor()),
            ConditionKind::NerMatch => Test::Ner(anchor()),
            ConditionKind::SimilarA | ConditionKind::SimilarB => {
                let vec_ref = cond
                    .vec_ref
                    .ok_or_else(|| Error::Invalid("similarity condition without anchor".into()))?;
                let store = corpus.store(vec_ref.channel);
                if vec_ref.row >= store.len() {
                    return Err(Error::Invalid(format!(
                        "anchor row {} out of bounds for channel {}",
                        vec_ref.row, vec_ref.channel
                    )));
                }
                Test::Similar {
                    store,
                    anchor: store.row(vec_ref.row),
                    tau: cond.tau.unwrap_or(super::DEFAULT_TAU),
                }
            }
        };
        Ok(Self {
            test,
            negated: cond.negated,
        })
    }

    fn holds(&self, token: &Token, row: usize) -> bool {
        let base = match &self.test {
            Test::Exact(anchor) => eq_case_folded(&token.text, anchor),
            Test::Similar { store, anchor, tau } => {
                crate::corpus::embedding_dot(store.row(row), anchor) + SIMILARITY_SLACK >= *tau
            }
            Test::Pos(tag) => token.pos == *tag,
            Test::Dep(tag) => token.dep == *tag,
            Test::Ner(tag) => !token.ner.is_empty() && token.ner == *tag,
        };
        base != self.negated
    }
}

fn eq_case_folded(a: &str, b: &str) -> bool {
    a.chars()
        .flat_map(char::to_lowercase)
        .eq(b.chars().flat_map(char::to_lowercase))
}

/// Evaluates one condition on the token at `position` of `doc`.
pub fn eval_condition(cond: &AtomicCondition, doc: &Document, position: usize, corpus: &Corpus) -> bool {
    match CompiledCondition::compile(cond, corpus) {
        Ok(c) => c.holds(&doc.tokens[position], doc.token_row(position)),
        Err(_) => cond.negated,
    }
}

/// A labeling function with anchors resolved against a corpus, ready to be
/// applied to many documents.
pub struct CompiledFunction<'c> {
    lf: &'c LabelingFunction,
    vote: usize,
    positions: Vec<Vec<CompiledCondition<'c>>>,
}

impl<'c> CompiledFunction<'c> {
    pub fn new(lf: &'c LabelingFunction, corpus: &'c Corpus) -> Result<Self> {
        let vote = lf.vote(corpus.labels())?;
        let positions = lf
            .pattern()
            .iter()
            .map(|conj| {
                conj.iter()
                    .map(|c| CompiledCondition::compile(c, corpus))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { lf, vote, positions })
    }

    pub fn function(&self) -> &LabelingFunction {
        self.lf
    }

    pub fn vote(&self) -> usize {
        self.vote
    }

    pub fn matches_at(&self, doc: &Document, start: usize) -> bool {
        if start + self.positions.len() > doc.len() {
            return false;
        }
        self.positions.iter().enumerate().all(|(offset, conj)| {
            let pos = start + offset;
            let row = doc.token_row(pos);
            conj.iter().all(|c| c.holds(&doc.tokens[pos], row))
        })
    }

    /// Start positions of all (possibly overlapping) matches.
    pub fn match_starts<'d>(&'d self, doc: &'d Document) -> impl Iterator<Item = usize> + 'd {
        let k = self.positions.len();
        let last = (doc.len() + 1).saturating_sub(k);
        (0..last).filter(move |&s| self.matches_at(doc, s))
    }

    pub fn apply(&self, doc: &Document) -> Vec<MatchSpan> {
        let k = self.positions.len();
        self.match_starts(doc)
            .map(|start| MatchSpan {
                doc_id: doc.id.clone(),
                start,
                end: start + k,
                lf_id: self.lf.id().to_string(),
                vote: self.vote,
            })
            .collect()
    }

    /// Per-token vote for `doc`: `Some(vote)` on tokens covered by a match.
    pub fn token_votes(&self, doc: &Document) -> Vec<Option<usize>> {
        let mut out = vec![None; doc.len()];
        let k = self.positions.len();
        for start in self.match_starts(doc) {
            for slot in &mut out[start..start + k] {
                *slot = Some(self.vote);
            }
        }
        out
    }
}

/// Slides the function's pattern over `doc` and returns every match.
pub fn apply_lf(lf: &LabelingFunction, doc: &Document, corpus: &Corpus) -> Result<Vec<MatchSpan>> {
    Ok(CompiledFunction::new(lf, corpus)?.apply(doc))
}
