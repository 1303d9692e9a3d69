use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use spanwise_core::corpus::{Channel, Corpus, Split};
use spanwise_core::rules::{
    apply_lf, eval_condition, synthesize, AtomicCondition, ConditionKind, LabelingFunction, Polarity, SpanAnnotation,
    DEFAULT_TAU, MAX_SPAN,
};
use spanwise_core::session::{Project, ProjectConfig};
use spanwise_core::synthetic::random_corpus;

const CORPORA: usize = 6;

fn corpora() -> &'static [Arc<Corpus>] {
    static CELL: OnceLock<Vec<Arc<Corpus>>> = OnceLock::new();
    CELL.get_or_init(|| {
        (0..CORPORA as u64)
            .map(|s| Arc::new(random_corpus(100 + s, 30, 9).into_corpus().unwrap()))
            .collect()
    })
}

/// (corpus, doc, start, end, label, polarity) with the span inside the document.
fn annotation() -> impl Strategy<Value = (usize, SpanAnnotation)> {
    (
        0..CORPORA,
        0usize..30,
        0usize..9,
        1usize..=MAX_SPAN,
        prop::bool::ANY,
        prop::bool::ANY,
    )
        .prop_map(|(c, d, start, len, label_a, positive)| {
            let doc = &corpora()[c].documents()[d];
            let start = start % doc.len();
            let end = (start + len).min(doc.len());
            let ann = SpanAnnotation {
                doc_id: doc.id.clone(),
                start,
                end,
                label: if label_a { "A" } else { "B" }.to_string(),
                polarity: if positive {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
            };
            (c, ann)
        })
}

fn brute_force_doc_coverage(lf: &LabelingFunction, corpus: &Corpus) -> usize {
    corpus
        .docs_in(Split::Train)
        .filter(|d| !apply_lf(lf, d, corpus).unwrap().is_empty())
        .count()
}

fn brute_force_tokens(lf: &LabelingFunction, corpus: &Corpus) -> usize {
    corpus
        .docs_in(Split::Train)
        .map(|d| {
            let covered: BTreeSet<usize> = apply_lf(lf, d, corpus)
                .unwrap()
                .iter()
                .flat_map(|m| m.start..m.end)
                .collect();
            covered.len()
        })
        .sum()
}

fn condition(c: usize) -> impl Strategy<Value = AtomicCondition> {
    let rows = corpora()[c].total_tokens();
    prop_oneof![
        prop::sample::select(vec!["alpha", "beta", "GAMMA", "zeta"]).prop_map(AtomicCondition::exact),
        prop::sample::select(vec!["NOUN", "VERB", "ADJ"])
            .prop_map(|t| AtomicCondition::tag(ConditionKind::PosMatch, t)),
        prop::sample::select(vec!["nsubj", "dobj"]).prop_map(|t| AtomicCondition::tag(ConditionKind::DepMatch, t)),
        prop::sample::select(vec!["ORG", "PER"]).prop_map(|t| AtomicCondition::tag(ConditionKind::NerMatch, t)),
        (0..rows, prop::bool::ANY, 0.5f64..1.0).prop_map(|(row, a, tau)| {
            let channel = if a { Channel::EmbA } else { Channel::EmbB };
            AtomicCondition::similar(channel, row, "x", tau)
        }),
    ]
    .prop_flat_map(|c| (Just(c), prop::bool::ANY))
    .prop_map(|(c, neg)| if neg { c.negate() } else { c })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn synthesized_functions_match_their_source((c, ann) in annotation()) {
        let corpus = &corpora()[c];
        let doc = corpus.doc(&ann.doc_id).unwrap();
        let synthesis = synthesize(&ann, corpus, DEFAULT_TAU, None).unwrap();
        prop_assert!(!synthesis.candidates.is_empty());
        for cand in &synthesis.candidates {
            let matches = apply_lf(&cand.lf, doc, corpus).unwrap();
            prop_assert!(
                matches.iter().any(|m| m.start == ann.start && m.end == ann.end),
                "{} misses its source span", cand.lf.describe()
            );
            prop_assert_eq!(cand.doc_coverage, brute_force_doc_coverage(&cand.lf, corpus));
        }
        let order: Vec<(std::cmp::Reverse<usize>, &str)> = synthesis
            .candidates
            .iter()
            .map(|c| (std::cmp::Reverse(c.doc_coverage), c.lf.name()))
            .collect();
        prop_assert!(order.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn suggestion_previews_match_brute_force((c, ann) in annotation()) {
        let corpus = Arc::clone(&corpora()[c]);
        let mut project = Project::new(Arc::clone(&corpus), None, ProjectConfig::default());
        let out = project.submit_annotation(ann).unwrap();
        let train_tokens: usize = corpus.docs_in(Split::Train).map(|d| d.len()).sum();
        for s in &out.suggestions {
            let tokens = brute_force_tokens(&s.lf, &corpus);
            prop_assert_eq!(s.train_votes, tokens);
            prop_assert!((s.coverage - tokens as f64 / train_tokens as f64).abs() < 1e-12);
            prop_assert_eq!(s.doc_coverage, brute_force_doc_coverage(&s.lf, &corpus));
        }
    }

    #[test]
    fn adding_a_condition_never_adds_matches(
        c in 0..CORPORA,
        (first, second) in (0..CORPORA).prop_flat_map(|c| (condition(c), condition(c))),
        extra in prop::collection::vec(Just(()), 0..2),
    ) {
        let corpus = &corpora()[c];
        // similarity rows refer to corpus `c` only when drawn for it; clamp otherwise
        let clamp = |mut cond: AtomicCondition| {
            if let Some(v) = cond.vec_ref.as_mut() {
                v.row %= corpus.total_tokens();
            }
            cond
        };
        let (first, second) = (clamp(first), clamp(second));
        let mut pattern = vec![vec![first.clone()]];
        pattern.extend(extra.iter().map(|_| vec![AtomicCondition::tag(ConditionKind::DepMatch, "nsubj")]));
        let loose = LabelingFunction::new(pattern.clone(), "A", Polarity::Positive, None).unwrap();
        pattern[0].push(second);
        let tight = LabelingFunction::new(pattern, "A", Polarity::Positive, None).unwrap();
        for doc in corpus.documents() {
            let starts = |lf: &LabelingFunction| -> BTreeSet<usize> {
                apply_lf(lf, doc, corpus).unwrap().iter().map(|m| m.start).collect()
            };
            prop_assert!(starts(&tight).is_subset(&starts(&loose)));
        }
    }

    #[test]
    fn negation_is_an_involution(c in 0..CORPORA, cond in condition(0), d in 0usize..30, pos in 0usize..9) {
        let corpus = &corpora()[c];
        let mut cond = cond;
        if let Some(v) = cond.vec_ref.as_mut() {
            v.row %= corpus.total_tokens();
        }
        let doc = &corpus.documents()[d];
        let pos = pos % doc.len();
        let base = eval_condition(&cond, doc, pos, corpus);
        prop_assert_eq!(eval_condition(&cond.clone().negate(), doc, pos, corpus), !base);
        prop_assert_eq!(eval_condition(&cond.negate().negate(), doc, pos, corpus), base);
    }

    #[test]
    fn identity_survives_serialization(c in 0..CORPORA, conds in prop::collection::vec(condition(0), 1..4), target_a in prop::bool::ANY) {
        let _ = c;
        let pattern: Vec<Vec<AtomicCondition>> = conds.into_iter().map(|c| vec![c]).collect();
        let target = if target_a { "A" } else { "B" };
        let lf = LabelingFunction::new(pattern, target, Polarity::Negative, Some(3)).unwrap();
        let json = serde_json::to_string(&lf).unwrap();
        let back: LabelingFunction = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.id(), lf.id());
        prop_assert_eq!(back.describe(), lf.describe());
        prop_assert_eq!(&back, &lf);
    }
}
