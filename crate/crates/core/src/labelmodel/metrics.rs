use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet, Split};
use crate::error::{Error, Result};

use super::{hard_labels, PosteriorMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    #[serde(flatten)]
    pub scores: Prf,
    pub support: usize,
}

/// Token-level precision/recall/F1 over the entity classes (not `O`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub per_class: Vec<ClassMetrics>,
    pub micro: Prf,
    pub tokens: usize,
}

impl ModelMetrics {
    pub fn micro_f1(&self) -> f64 {
        self.micro.f1
    }
}

/// Scores aligned predicted and gold output indices.
pub fn evaluate(pred: &[usize], gold: &[usize], labels: &LabelSet) -> Result<ModelMetrics> {
    if pred.len() != gold.len() {
        return Err(Error::Invalid(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    let c = labels.num_classes();
    let (mut tp, mut fp, mut fn_) = (vec![0; c], vec![0; c], vec![0; c]);
    for (&p, &g) in pred.iter().zip(gold) {
        if p == g {
            if p < c {
                tp[p] += 1;
            }
        } else {
            if p < c {
                fp[p] += 1;
            }
            if g < c {
                fn_[g] += 1;
            }
        }
    }
    let per_class = (0..c)
        .map(|i| ClassMetrics {
            class: labels.classes()[i].clone(),
            scores: Prf::from_counts(tp[i], fp[i], fn_[i]),
            support: tp[i] + fn_[i],
        })
        .collect();
    let micro = Prf::from_counts(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    Ok(ModelMetrics {
        per_class,
        micro,
        tokens: pred.len(),
    })
}

/// Scores posteriors computed over `split` against that split's gold.
pub fn evaluate_split(p: &PosteriorMatrix, corpus: &Corpus, split: Split) -> Result<ModelMetrics> {
    let mut gold = Vec::with_capacity(p.len());
    for seg in p.segments() {
        let doc = corpus
            .doc(&seg.doc_id)
            .ok_or_else(|| Error::UnknownDocument(seg.doc_id.clone()))?;
        let g = doc
            .visible_gold()
            .filter(|_| doc.split == split)
            .ok_or_else(|| Error::MissingGold(split.to_string()))?;
        gold.extend_from_slice(g);
    }
    if gold.is_empty() {
        return Err(Error::MissingGold(split.to_string()));
    }
    let pred = hard_labels(p, corpus.labels().outside());
    evaluate(&pred, &gold, corpus.labels())
}

impl fmt::Display for ModelMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<14}{:>10}{:>10}{:>10}{:>10}",
            "class", "precision", "recall", "f1", "support"
        )?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<14}{:>10.4}{:>10.4}{:>10.4}{:>10}",
                c.class, c.scores.precision, c.scores.recall, c.scores.f1, c.support
            )?;
        }
        writeln!(
            f,
            "{:<14}{:>10.4}{:>10.4}{:>10.4}{:>10}",
            "micro",
            self.micro.precision,
            self.micro.recall,
            self.micro.f1,
            self.micro.tp + self.micro.fn_
        )
    }
}
