use std::collections::HashSet;

use rayon::prelude::*;

use crate::corpus::{Channel, Corpus, Document, Split};
use crate::error::{Error, Result};

use super::{AtomicCondition, CompiledFunction, ConditionKind, LabelingFunction, Pattern, SpanAnnotation};

pub const MAX_SPAN: usize = 5;
pub const MAX_CANDIDATES: usize = 24;

#[derive(Clone, Debug)]
pub struct Candidate {
    pub lf: LabelingFunction,
    /// Train documents with at least one match.
    pub doc_coverage: usize,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    /// Ranked by coverage, then name.
    pub candidates: Vec<Candidate>,
    /// Set when the demonstration came from a dev or test document.
    pub off_train: bool,
}

/// Validates `ann` against the corpus, returning the annotated document.
pub(crate) fn check_annotation<'c>(ann: &SpanAnnotation, corpus: &'c Corpus) -> Result<&'c Document> {
    let doc = corpus
        .doc(&ann.doc_id)
        .ok_or_else(|| Error::UnknownDocument(ann.doc_id.clone()))?;
    if ann.start >= ann.end || ann.end > doc.len() {
        return Err(Error::InvalidSpan {
            start: ann.start,
            end: ann.end,
            len: doc.len(),
        });
    }
    if corpus.labels().class_index(&ann.label).is_none() {
        return Err(Error::UnknownLabel(ann.label.clone()));
    }
    let len = ann.end - ann.start;
    if len > MAX_SPAN {
        return Err(Error::SpanTooLong { len, max: MAX_SPAN });
    }
    Ok(doc)
}

/// Condition menu for one demonstration token, keyed by kind.
fn menu(doc: &Document, position: usize, tau: f64) -> Vec<AtomicCondition> {
    let token = &doc.tokens[position];
    let row = doc.token_row(position);
    let mut out = vec![AtomicCondition::exact(&token.text)];
    for (kind, tag) in [
        (ConditionKind::PosMatch, &token.pos),
        (ConditionKind::DepMatch, &token.dep),
        (ConditionKind::NerMatch, &token.ner),
    ] {
        if !tag.is_empty() {
            out.push(AtomicCondition::tag(kind, tag));
        }
    }
    out.push(AtomicCondition::similar(Channel::EmbA, row, &token.text, tau));
    out.push(AtomicCondition::similar(Channel::EmbB, row, &token.text, tau));
    out
}

fn patterns(doc: &Document, ann: &SpanAnnotation, tau: f64) -> Vec<Pattern> {
    let menus: Vec<Vec<AtomicCondition>> = (ann.start..ann.end).map(|p| menu(doc, p, tau)).collect();
    let mut out = Vec::new();
    if let [only] = menus.as_slice() {
        for c in only {
            out.push(vec![vec![c.clone()]]);
        }
        for lexical in only.iter().filter(|c| !c.kind.is_tag()) {
            for tag in only.iter().filter(|c| c.kind.is_tag()) {
                out.push(vec![vec![lexical.clone(), tag.clone()]]);
            }
        }
    } else {
        // Homogeneous patterns; the TOKEN_EXACT one is the literal surface sequence.
        for kind in ConditionKind::ALL {
            let per_position: Option<Pattern> = menus
                .iter()
                .map(|m| m.iter().find(|c| c.kind == kind).map(|c| vec![c.clone()]))
                .collect();
            if let Some(p) = per_position {
                out.push(p);
            }
        }
    }
    out
}

/// Builds ranked candidate labeling functions from one span demonstration.
///
/// `provenance` is recorded on every candidate (the annotation's log index).
pub fn synthesize(ann: &SpanAnnotation, corpus: &Corpus, tau: f64, provenance: Option<usize>) -> Result<Synthesis> {
    let doc = check_annotation(ann, corpus)?;
    let mut seen = HashSet::new();
    let mut lfs = Vec::new();
    for pattern in patterns(doc, ann, tau) {
        let lf = LabelingFunction::new(pattern, &ann.label, ann.polarity, provenance)?;
        if seen.insert(lf.id().to_string()) {
            lfs.push(lf);
        }
    }

    let train: Vec<&Document> = corpus.docs_in(Split::Train).collect();
    let mut candidates = lfs
        .into_par_iter()
        .map(|lf| {
            let compiled = CompiledFunction::new(&lf, corpus)?;
            let doc_coverage = train
                .iter()
                .filter(|d| compiled.match_starts(d).next().is_some())
                .count();
            Ok(Candidate { lf, doc_coverage })
        })
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| {
        b.doc_coverage
            .cmp(&a.doc_coverage)
            .then_with(|| a.lf.name().cmp(b.lf.name()))
    });
    candidates.truncate(MAX_CANDIDATES);
    Ok(Synthesis {
        candidates,
        off_train: doc.split != Split::Train,
    })
}
