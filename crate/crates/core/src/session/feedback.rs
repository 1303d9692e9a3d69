use serde::Serialize;

use crate::corpus::{Corpus, Document, Split};
use crate::error::Result;
use crate::rules::{CompiledFunction, LabelingFunction};

/// Tokens around a span.
pub const CONTEXT_WINDOW: usize = 5;
pub const TRAIN_SAMPLE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Context {
    /// Index of the first context token in the document.
    pub start: usize,
    pub tokens: Vec<String>,
}

impl Context {
    fn around(doc: &Document, start: usize, end: usize) -> Self {
        let from = start.saturating_sub(CONTEXT_WINDOW);
        let to = (end + CONTEXT_WINDOW).min(doc.len());
        Self {
            start: from,
            tokens: doc.tokens[from..to].iter().map(|t| t.text.clone()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FalsePositive {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub vote: String,
    pub gold: Vec<String>,
    pub context: Context,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainMatch {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub context: Context,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FpReport {
    pub lf_id: String,
    pub name: String,
    /// Dev matches whose vote disagrees with gold on at least one covered
    /// token, sorted by document id then span start.
    pub false_positives: Vec<FalsePositive>,
    pub dev_precision: Option<f64>,
    pub dev_votes: usize,
    pub train_coverage: f64,
    pub train_sample: Vec<TrainMatch>,
}

pub(crate) fn fp_report(lf: &LabelingFunction, corpus: &Corpus) -> Result<FpReport> {
    let f = CompiledFunction::new(lf, corpus)?;
    let labels = corpus.labels();
    let vote = f.vote();

    let mut false_positives = Vec::new();
    let (mut dev_votes, mut dev_correct) = (0usize, 0usize);
    for doc in corpus.docs_in(Split::Dev) {
        let Some(gold) = doc.visible_gold() else { continue };
        for (t, v) in f.token_votes(doc).into_iter().enumerate() {
            if v.is_some() {
                dev_votes += 1;
                dev_correct += usize::from(gold[t] == vote);
            }
        }
        for start in f.match_starts(doc) {
            let end = start + lf.span_len();
            if gold[start..end].iter().any(|&g| g != vote) {
                false_positives.push(FalsePositive {
                    doc_id: doc.id.clone(),
                    start,
                    end,
                    vote: labels.output_name(vote).to_string(),
                    gold: gold[start..end]
                        .iter()
                        .map(|&g| labels.output_name(g).to_string())
                        .collect(),
                    context: Context::around(doc, start, end),
                });
            }
        }
    }
    false_positives.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then(a.start.cmp(&b.start)));

    let mut train_tokens = 0usize;
    let mut train_covered = 0usize;
    let mut train_sample = Vec::new();
    for doc in corpus.docs_in(Split::Train) {
        train_tokens += doc.len();
        train_covered += f.token_votes(doc).iter().filter(|v| v.is_some()).count();
        for start in f.match_starts(doc) {
            if train_sample.len() == TRAIN_SAMPLE {
                break;
            }
            let end = start + lf.span_len();
            train_sample.push(TrainMatch {
                doc_id: doc.id.clone(),
                start,
                end,
                context: Context::around(doc, start, end),
            });
        }
    }

    Ok(FpReport {
        lf_id: lf.id().to_string(),
        name: lf.name().to_string(),
        false_positives,
        dev_precision: (dev_votes > 0).then(|| dev_correct as f64 / dev_votes as f64),
        dev_votes,
        train_coverage: if train_tokens == 0 {
            0.0
        } else {
            train_covered as f64 / train_tokens as f64
        },
        train_sample,
    })
}
