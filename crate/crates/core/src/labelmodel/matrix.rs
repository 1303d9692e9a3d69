use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Corpus, Document, Split};
use crate::error::{Error, Result};
use crate::rules::{CompiledFunction, LabelingFunction};

/// One function's output on one token: `None` is ABSTAIN, otherwise an
/// output-space index.
pub type Vote = Option<u16>;

/// A document's token range within a matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub doc_id: String,
    pub offset: usize,
    pub len: usize,
}

/// Tokens x functions vote matrix. Each function always votes the same
/// output (`lf_votes[j]`) when it fires.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    k: usize,
    lf_votes: Vec<usize>,
    votes: Vec<Vote>,
    segments: Vec<Segment>,
}

impl LabelMatrix {
    /// `votes` is row-major (`n` rows of `lf_votes.len()` entries);
    /// `segments` must partition the rows in order.
    pub fn new(k: usize, lf_votes: Vec<usize>, votes: Vec<Vote>, segments: Vec<Segment>) -> Result<Self> {
        let l = lf_votes.len();
        if k < 2 {
            return Err(Error::Invalid("output space needs at least one class and O".into()));
        }
        if lf_votes.iter().any(|&v| v >= k) {
            return Err(Error::Invalid("function vote outside the output space".into()));
        }
        if l == 0 {
            if !votes.is_empty() {
                return Err(Error::Invalid("votes given for zero functions".into()));
            }
        } else if !votes.len().is_multiple_of(l) {
            return Err(Error::Invalid(
                "vote count is not a multiple of the function count".into(),
            ));
        }
        let n = votes.len().checked_div(l).unwrap_or(0);
        for (idx, v) in votes.iter().enumerate() {
            if let Some(v) = v {
                if usize::from(*v) != lf_votes[idx % l] {
                    return Err(Error::Invalid(format!(
                        "token {} function {}: vote {v} differs from the function's label {}",
                        idx / l,
                        idx % l,
                        lf_votes[idx % l]
                    )));
                }
            }
        }
        let mut next = 0;
        for seg in &segments {
            if seg.offset != next || seg.len == 0 {
                return Err(Error::Invalid("segments must partition the token rows".into()));
            }
            next += seg.len;
        }
        if next != n {
            return Err(Error::Invalid(format!("segments cover {next} of {n} tokens")));
        }
        Ok(Self {
            k,
            lf_votes,
            votes,
            segments,
        })
    }

    /// Single-segment matrix, convenient for token-independent models.
    pub fn single_segment(k: usize, lf_votes: Vec<usize>, votes: Vec<Vote>) -> Result<Self> {
        let l = lf_votes.len().max(1);
        let n = votes.len() / l;
        let segments = if n == 0 {
            vec![]
        } else {
            vec![Segment {
                doc_id: "all".into(),
                offset: 0,
                len: n,
            }]
        };
        Self::new(k, lf_votes, votes, segments)
    }

    pub fn num_outputs(&self) -> usize {
        self.k
    }

    pub fn num_tokens(&self) -> usize {
        if self.lf_votes.is_empty() {
            self.segments.iter().map(|s| s.len).sum()
        } else {
            self.votes.len() / self.lf_votes.len()
        }
    }

    pub fn num_functions(&self) -> usize {
        self.lf_votes.len()
    }

    pub fn lf_votes(&self) -> &[usize] {
        &self.lf_votes
    }

    pub fn row(&self, i: usize) -> &[Vote] {
        let l = self.lf_votes.len();
        &self.votes[i * l..(i + 1) * l]
    }

    pub fn get(&self, i: usize, j: usize) -> Vote {
        self.votes[i * self.lf_votes.len() + j]
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Reorders function columns: new column `c` is old column `order[c]`.
    pub fn permute_columns(&self, order: &[usize]) -> Self {
        let l = self.lf_votes.len();
        assert_eq!(order.len(), l);
        let lf_votes = order.iter().map(|&j| self.lf_votes[j]).collect();
        let votes = (0..self.num_tokens())
            .flat_map(|i| order.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.votes[i * l + j])
            .collect();
        Self {
            k: self.k,
            lf_votes,
            votes,
            segments: self.segments.clone(),
        }
    }
}

/// Applies `lfs` to every document of `split`, in corpus order.
pub fn build_matrix(corpus: &Corpus, lfs: &[LabelingFunction], split: Split) -> Result<LabelMatrix> {
    if lfs.is_empty() {
        return Err(Error::EmptySelection);
    }
    let compiled = lfs
        .iter()
        .map(|lf| CompiledFunction::new(lf, corpus))
        .collect::<Result<Vec<_>>>()?;
    let docs: Vec<&Document> = corpus.docs_in(split).collect();
    let l = lfs.len();
    let per_doc: Vec<Vec<Vote>> = docs
        .par_iter()
        .map(|doc| {
            let mut block = vec![None; doc.len() * l];
            for (j, f) in compiled.iter().enumerate() {
                for (t, v) in f.token_votes(doc).into_iter().enumerate() {
                    block[t * l + j] = v.map(|v| v as u16);
                }
            }
            block
        })
        .collect();
    let mut segments = Vec::with_capacity(docs.len());
    let mut offset = 0;
    for doc in &docs {
        segments.push(Segment {
            doc_id: doc.id.clone(),
            offset,
            len: doc.len(),
        });
        offset += doc.len();
    }
    let lf_votes = compiled.iter().map(CompiledFunction::vote).collect();
    LabelMatrix::new(
        corpus.labels().num_outputs(),
        lf_votes,
        per_doc.into_iter().flatten().collect(),
        segments,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Channel, DocumentRecord, EmbeddingStore, LabelSet, Token};
    use crate::rules::{apply_lf, AtomicCondition, Polarity};

    fn corpus() -> Corpus {
        let docs = [
            vec!["took", "aspirin", "today"],
            vec!["flu", "and", "aspirin", "aspirin"],
        ];
        let n: usize = docs.iter().map(Vec::len).sum();
        let rows = vec![[1.0f32, 0.0]; n];
        Corpus::from_records(
            LabelSet::new(["Chemical", "Disease"]).unwrap(),
            docs.iter()
                .enumerate()
                .map(|(i, ws)| DocumentRecord {
                    id: format!("d{i}"),
                    split: Split::Train,
                    tokens: ws.iter().map(|w| Token::new(w, "NOUN", "x", "")).collect(),
                    gold: None,
                })
                .collect(),
            EmbeddingStore::from_rows(Channel::EmbA, 2, &rows).unwrap(),
            EmbeddingStore::from_rows(Channel::EmbB, 2, &rows).unwrap(),
            EmbeddingStore::from_rows(Channel::Sent, 2, &[[1.0f32, 0.0]; 2]).unwrap(),
        )
        .unwrap()
    }

    fn exact(text: &str, target: &str) -> LabelingFunction {
        LabelingFunction::new(
            vec![vec![AtomicCondition::exact(text)]],
            target,
            Polarity::Positive,
            None,
        )
        .unwrap()
    }

    #[test]
    fn single_function_column() {
        let c = corpus();
        let m = build_matrix(&c, &[exact("aspirin", "Chemical")], Split::Train).unwrap();
        assert_eq!(m.num_tokens(), 7);
        let col: Vec<Vote> = (0..3).map(|i| m.get(i, 0)).collect();
        assert_eq!(col, vec![None, Some(0), None]);
        assert_eq!(m.segments()[1].offset, 3);
    }

    #[test]
    fn conflicts_preserved() {
        let c = corpus();
        let m = build_matrix(&c, &[exact("flu", "Chemical"), exact("flu", "Disease")], Split::Train).unwrap();
        assert_eq!(m.row(3), &[Some(0), Some(1)]);
    }

    #[test]
    fn empty_selection_rejected() {
        assert!(matches!(
            build_matrix(&corpus(), &[], Split::Train),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn matches_per_token_recomputation() {
        let c = corpus();
        let lfs = vec![
            exact("aspirin", "Chemical"),
            exact("and", "Disease"),
            exact("took", "Chemical"),
        ];
        let m = build_matrix(&c, &lfs, Split::Train).unwrap();
        for seg in m.segments() {
            let doc = c.doc(&seg.doc_id).unwrap();
            for (j, lf) in lfs.iter().enumerate() {
                let spans = apply_lf(lf, doc, &c).unwrap();
                for t in 0..doc.len() {
                    let expected = spans.iter().find(|s| s.start <= t && t < s.end).map(|s| s.vote as u16);
                    assert_eq!(m.get(seg.offset + t, j), expected);
                }
            }
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(LabelMatrix::new(3, vec![0], vec![Some(1)], vec![]).is_err());
        assert!(LabelMatrix::new(3, vec![5], vec![None], vec![]).is_err());
        let seg = |offset, len| Segment {
            doc_id: "x".into(),
            offset,
            len,
        };
        assert!(LabelMatrix::new(3, vec![0], vec![None, None], vec![seg(0, 1)]).is_err());
        assert!(LabelMatrix::new(3, vec![0], vec![None, None], vec![seg(0, 1), seg(1, 1)]).is_ok());
    }
}
