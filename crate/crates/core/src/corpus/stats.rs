use std::fmt;

use serde::Serialize;

use super::{Corpus, Split};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitStats {
    pub split: Split,
    pub docs: usize,
    pub tokens: usize,
    pub mean_tokens: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub splits: Vec<SplitStats>,
    pub total_docs: usize,
    pub total_tokens: usize,
    pub mean_tokens: f64,
    /// Token frequency of each output class over dev and test gold, in output
    /// order (classes then `O`). `None` when no dev/test gold exists.
    pub gold_frequencies: Option<Vec<(String, f64)>>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let splits = Split::ALL
        .iter()
        .map(|&split| {
            let (docs, tokens) = corpus.docs_in(split).fold((0, 0), |(d, t), doc| (d + 1, t + doc.len()));
            SplitStats {
                split,
                docs,
                tokens,
                mean_tokens: mean(tokens, docs),
            }
        })
        .collect();

    let labels = corpus.labels();
    let mut counts = vec![0usize; labels.num_outputs()];
    for doc in corpus.documents() {
        if let Some(gold) = doc.visible_gold() {
            for &g in gold {
                counts[g] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    let gold_frequencies = (total > 0).then(|| {
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (labels.output_name(i).to_string(), c as f64 / total as f64))
            .collect()
    });

    let total_docs = corpus.documents().len();
    CorpusStats {
        splits,
        total_docs,
        total_tokens: corpus.total_tokens(),
        mean_tokens: mean(corpus.total_tokens(), total_docs),
        gold_frequencies,
    }
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8}{:>8}{:>10}{:>12}", "split", "docs", "tokens", "tokens/doc")?;
        for s in &self.splits {
            writeln!(
                f,
                "{:<8}{:>8}{:>10}{:>12.1}",
                s.split.name(),
                s.docs,
                s.tokens,
                s.mean_tokens
            )?;
        }
        writeln!(
            f,
            "{:<8}{:>8}{:>10}{:>12.1}",
            "all", self.total_docs, self.total_tokens, self.mean_tokens
        )?;
        match &self.gold_frequencies {
            Some(freqs) => {
                writeln!(f, "class frequency (dev+test gold):")?;
                for (name, p) in freqs {
                    writeln!(f, "  {name:<12}{p:.3}")?;
                }
            }
            None => writeln!(f, "class frequency: no gold")?,
        }
        Ok(())
    }
}
