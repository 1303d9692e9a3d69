use serde::Serialize;

use super::LabelMatrix;

/// Per-function statistics shown next to each selected function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LfStats {
    /// Fraction of train tokens with a non-abstaining vote.
    pub coverage: f64,
    pub train_votes: usize,
    /// Fraction of dev votes that match gold; `None` without dev votes.
    pub dev_precision: Option<f64>,
    pub dev_votes: usize,
    pub dev_correct: usize,
    /// Fraction of train votes contradicted by another function on the same token.
    pub conflict_rate: f64,
}

/// `dev` pairs the dev-split matrix with its gold labels, row-aligned.
pub fn lf_stats(train: &LabelMatrix, dev: Option<(&LabelMatrix, &[usize])>) -> Vec<LfStats> {
    let l = train.num_functions();
    let n = train.num_tokens();
    let mut votes = vec![0usize; l];
    let mut conflicts = vec![0usize; l];
    for i in 0..n {
        let row = train.row(i);
        for (j, v) in row.iter().enumerate() {
            let Some(v) = v else { continue };
            votes[j] += 1;
            if row.iter().flatten().any(|other| other != v) {
                conflicts[j] += 1;
            }
        }
    }

    let mut dev_votes = vec![0usize; l];
    let mut dev_correct = vec![0usize; l];
    if let Some((m, gold)) = dev {
        debug_assert_eq!(m.num_tokens(), gold.len());
        for (i, &g) in gold.iter().enumerate() {
            for (j, v) in m.row(i).iter().enumerate() {
                if let Some(v) = v {
                    dev_votes[j] += 1;
                    if usize::from(*v) == g {
                        dev_correct[j] += 1;
                    }
                }
            }
        }
    }

    (0..l)
        .map(|j| LfStats {
            coverage: if n == 0 { 0.0 } else { votes[j] as f64 / n as f64 },
            train_votes: votes[j],
            dev_precision: (dev_votes[j] > 0).then(|| dev_correct[j] as f64 / dev_votes[j] as f64),
            dev_votes: dev_votes[j],
            dev_correct: dev_correct[j],
            conflict_rate: if votes[j] == 0 {
                0.0
            } else {
                conflicts[j] as f64 / votes[j] as f64
            },
        })
        .collect()
}
