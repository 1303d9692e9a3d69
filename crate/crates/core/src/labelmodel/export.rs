use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet, OUTSIDE};
use crate::error::{Error, Result};

use super::{hard_labels, PosteriorMatrix};

/// One exported document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub id: String,
    pub tokens: Vec<String>,
    /// Per token, probabilities over the classes then `O`.
    pub p: Vec<Vec<f64>>,
    pub hard: Vec<String>,
    pub bio: Vec<String>,
}

/// Converts hard labels to BIO tags, merging contiguous same-class runs.
pub fn to_bio(hard: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(hard.len());
    let mut prev: Option<&str> = None;
    for label in hard {
        if label == OUTSIDE {
            out.push(OUTSIDE.to_string());
            prev = None;
        } else {
            let tag = if prev == Some(label.as_str()) { "I" } else { "B" };
            out.push(format!("{tag}-{label}"));
            prev = Some(label);
        }
    }
    out
}

/// Inverse of [`to_bio`].
pub fn from_bio(bio: &[String]) -> Result<Vec<String>> {
    bio.iter()
        .map(|tag| {
            if tag == OUTSIDE {
                Ok(OUTSIDE.to_string())
            } else if let Some(class) = tag.strip_prefix("B-").or_else(|| tag.strip_prefix("I-")) {
                Ok(class.to_string())
            } else {
                Err(Error::Invalid(format!("malformed BIO tag {tag:?}")))
            }
        })
        .collect()
}

fn names(labels: &LabelSet, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| labels.output_name(i).to_string()).collect()
}

/// Export records for every segment of `p`, in segment order.
pub fn export_records(corpus: &Corpus, p: &PosteriorMatrix) -> Result<Vec<ExportRecord>> {
    let labels = corpus.labels();
    let hard = hard_labels(p, labels.outside());
    p.segments()
        .iter()
        .map(|seg| {
            let doc = corpus
                .doc(&seg.doc_id)
                .ok_or_else(|| Error::UnknownDocument(seg.doc_id.clone()))?;
            let hard = names(labels, &hard[seg.offset..seg.offset + seg.len]);
            Ok(ExportRecord {
                id: doc.id.clone(),
                tokens: doc.tokens.iter().map(|t| t.text.clone()).collect(),
                p: p.segment_rows(seg).map(<[f64]>::to_vec).collect(),
                bio: to_bio(&hard),
                hard,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn bio_merges_runs() {
        let hard = s(&["Chem", "Chem", "O", "Dis", "Chem", "Chem"]);
        assert_eq!(
            to_bio(&hard),
            s(&["B-Chem", "I-Chem", "O", "B-Dis", "B-Chem", "I-Chem"])
        );
        assert_eq!(from_bio(&to_bio(&hard)).unwrap(), hard);
        assert!(from_bio(&s(&["X-Chem"])).is_err());
    }
}
