//! Scripted annotation sessions driven by gold labels.
//!
//! Each interaction asks the sampler for a train document, demonstrates up to
//! [`SPANS_PER_DOCUMENT`] of its gold spans (longest first), selects the best
//! new suggestion per demonstration by dev precision and retrains. A
//! dictionary tagger built from every gold span seen so far serves as the
//! baseline.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::corpus::{Corpus, Document, Split};
use crate::error::{Error, Result};
use crate::labelmodel::{evaluate, evaluate_split, ModelKind};

use crate::rules::{Polarity, SpanAnnotation, MAX_SPAN};
use crate::session::{Project, ProjectConfig};

pub const SPANS_PER_DOCUMENT: usize = 3;
/// Suggestions below this dev precision are never auto-selected.
pub const MIN_DEV_PRECISION: f64 = 0.5;
pub const CSV_HEADER: &str = "interaction,elapsed_proxy,n_lfs,dev_f1,test_f1,baseline_f1";

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub budget: usize,
    pub seed: u64,
    pub model: ModelKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub interaction: usize,
    /// Cumulative tokens shown to the annotator.
    pub elapsed_proxy: usize,
    pub n_lfs: usize,
    pub dev_f1: f64,
    pub test_f1: f64,
    pub baseline_f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutcome {
    pub rows: Vec<CurveRow>,
    /// Set to the number of train documents when the budget exceeded it.
    pub truncated_to: Option<usize>,
}

impl SimulationOutcome {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6}",
                r.interaction, r.elapsed_proxy, r.n_lfs, r.dev_f1, r.test_f1, r.baseline_f1
            )?;
        }
        Ok(())
    }
}

/// Maximal runs of one non-O class, as `(start, end, class)` with `end`
/// exclusive.
pub fn gold_spans(gold: &[usize], outside: usize) -> Vec<(usize, usize, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < gold.len() {
        let c = gold[i];
        let mut j = i + 1;
        while j < gold.len() && gold[j] == c {
            j += 1;
        }
        if c != outside {
            spans.push((i, j, c));
        }
        i = j;
    }
    spans
}

/// Case-insensitive longest-match-first phrase tagger.
#[derive(Clone, Debug, Default)]
pub struct DictionaryTagger {
    entries: HashMap<Vec<String>, usize>,
    max_len: usize,
}

impl DictionaryTagger {
    /// Adds a phrase; the first class recorded for a phrase wins.
    pub fn insert(&mut self, words: &[&str], class: usize) {
        let key: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        self.max_len = self.max_len.max(key.len());
        self.entries.entry(key).or_insert(class);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tag(&self, doc: &Document, outside: usize) -> Vec<usize> {
        let words: Vec<String> = doc.tokens.iter().map(|t| t.text.to_lowercase()).collect();
        let mut out = vec![outside; words.len()];
        let mut i = 0;
        while i < words.len() {
            let longest = (1..=self.max_len.min(words.len() - i))
                .rev()
                .find_map(|n| self.entries.get(&words[i..i + n]).map(|&c| (n, c)));
            match longest {
                Some((n, c)) => {
                    out[i..i + n].fill(c);
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }
}

fn split_gold(corpus: &Corpus, split: Split) -> Result<Vec<usize>> {
    let mut gold = Vec::new();
    for doc in corpus.docs_in(split) {
        gold.extend_from_slice(
            doc.visible_gold()
                .ok_or_else(|| Error::MissingGold(split.to_string()))?,
        );
    }
    if gold.is_empty() {
        return Err(Error::MissingGold(split.to_string()));
    }
    Ok(gold)
}

/// Runs a scripted session of at most `config.budget` interactions.
pub fn simulate(corpus: Arc<Corpus>, config: &SimulationConfig) -> Result<SimulationOutcome> {
    let outside = corpus.labels().outside();
    split_gold(&corpus, Split::Dev)?;
    let test_gold = split_gold(&corpus, Split::Test)?;
    let train_docs = corpus.docs_in(Split::Train).count();
    let truncated_to = (config.budget > train_docs).then_some(train_docs);
    let budget = config.budget.min(train_docs);

    let mut project = Project::new(
        Arc::clone(&corpus),
        None,
        ProjectConfig {
            model: config.model,
            seed: config.seed,
            ..ProjectConfig::default()
        },
    );
    let mut dictionary = DictionaryTagger::default();
    let mut elapsed = 0;
    let mut rows = Vec::with_capacity(budget);

    for interaction in 1..=budget {
        let pick = match project.next_document() {
            Ok(p) => p,
            Err(Error::Exhausted) => break,
            Err(e) => return Err(e),
        };
        let doc = corpus
            .doc(&pick.doc_id)
            .ok_or_else(|| Error::UnknownDocument(pick.doc_id.clone()))?;
        elapsed += doc.len();
        let gold = doc
            .gold
            .as_deref()
            .ok_or_else(|| Error::MissingGold(pick.doc_id.clone()))?;

        let mut spans = gold_spans(gold, outside);
        for &(s, e, c) in &spans {
            let words: Vec<&str> = doc.tokens[s..e].iter().map(|t| t.text.as_str()).collect();
            dictionary.insert(&words, c);
        }
        spans.retain(|&(s, e, _)| e - s <= MAX_SPAN);
        spans.sort_by_key(|&(s, e, _)| (std::cmp::Reverse(e - s), s));

        let mut changed = false;
        for &(start, end, class) in spans.iter().take(SPANS_PER_DOCUMENT) {
            let ann = SpanAnnotation {
                doc_id: doc.id.clone(),
                start,
                end,
                label: corpus.labels().output_name(class).to_string(),
                polarity: Polarity::Positive,
            };
            let suggestions = project.submit_annotation(ann)?;
            let best = suggestions
                .suggestions
                .iter()
                .filter(|s| !project.is_selected(s.lf.id()))
                .filter_map(|s| s.dev_precision.filter(|&p| p >= MIN_DEV_PRECISION).map(|p| (p, s)))
                .fold(None::<(f64, &crate::session::Suggestion)>, |best, (p, s)| match best {
                    Some((bp, b)) if bp > p || (bp == p && b.dev_votes >= s.dev_votes) => Some((bp, b)),
                    _ => Some((p, s)),
                });
            if let Some((_, s)) = best {
                let id = s.lf.id().to_string();
                project.set_selected(&id, true)?;
                changed = true;
            }
        }
        if changed {
            project.retrain()?;
        }

        let (dev_f1, test_f1) = match project.snapshot() {
            Some(snap) => {
                let dev = match &snap.dev_metrics {
                    Some(m) => m.micro_f1(),
                    None => 0.0,
                };
                let p = snap.posterior_for(&corpus, Split::Test)?;
                (dev, evaluate_split(&p, &corpus, Split::Test)?.micro_f1())
            }
            None => (0.0, 0.0),
        };
        let baseline: Vec<usize> = corpus
            .docs_in(Split::Test)
            .flat_map(|d| dictionary.tag(d, outside))
            .collect();
        let baseline_f1 = evaluate(&baseline, &test_gold, corpus.labels())?.micro_f1();
        rows.push(CurveRow {
            interaction,
            elapsed_proxy: elapsed,
            n_lfs: project.selected_functions().len(),
            dev_f1,
            test_f1,
            baseline_f1,
        });
    }
    Ok(SimulationOutcome { rows, truncated_to })
}
