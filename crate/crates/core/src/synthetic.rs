//! Synthetic corpora with known ground-truth rules.
//!
//! [`planted`] builds a two-class corpus where entity tokens are marked by
//! six generating rules:
//!
//! 1. Chemical tokens carry the NER tag `CHEMICAL`;
//! 2. Chemical tokens lie in a tight `emb_a` cluster;
//! 3. a third of Chemical mentions use one of a few frequent surface forms;
//! 4. Disease tokens carry the NER tag `DISEASE`;
//! 5. Disease tokens lie in a tight `emb_b` cluster;
//! 6. a third of Disease mentions use one of a few frequent surface forms,
//!    and some are two-token `<name> disease` spans.
//!
//! Each tag and embedding signal is independently corrupted with probability
//! `noise`, and background tokens receive a spurious entity NER tag with
//! probability `noise / 10`. [`random_corpus`] builds small unstructured
//! corpora for property tests.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    write_corpus_file, write_embeddings, Channel, Corpus, CorpusPaths, DocumentRecord, EmbeddingStore, LabelSet, Split,
    Token, OUTSIDE,
};
use crate::error::{Error, Result};

/// A corpus held as plain records and embedding rows, before validation.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub labels: LabelSet,
    pub records: Vec<DocumentRecord>,
    pub dim: usize,
    pub emb_a: Vec<Vec<f32>>,
    pub emb_b: Vec<Vec<f32>>,
    pub sent: Vec<Vec<f32>>,
}

impl SyntheticCorpus {
    pub fn into_corpus(self) -> Result<Corpus> {
        Corpus::from_records(
            self.labels,
            self.records,
            EmbeddingStore::from_rows(Channel::EmbA, self.dim, &self.emb_a)?,
            EmbeddingStore::from_rows(Channel::EmbB, self.dim, &self.emb_b)?,
            EmbeddingStore::from_rows(Channel::Sent, self.dim, &self.sent)?,
        )
    }

    /// Writes corpus, sidecars and label set into `dir` with standard names.
    pub fn write(&self, dir: &Path) -> Result<CorpusPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = CorpusPaths {
            corpus: dir.join("corpus.jsonl"),
            emb_a: dir.join("emb_a.bin"),
            emb_b: dir.join("emb_b.bin"),
            sent: dir.join("sent.bin"),
            labels: dir.join("labels.json"),
        };
        write_corpus_file(&paths.corpus, &self.records)?;
        write_embeddings(&paths.emb_a, Channel::EmbA, self.dim, &self.emb_a)?;
        write_embeddings(&paths.emb_b, Channel::EmbB, self.dim, &self.emb_b)?;
        write_embeddings(&paths.sent, Channel::Sent, self.dim, &self.sent)?;
        let labels = serde_json::to_string(&self.labels).expect("labels serialize");
        std::fs::write(&paths.labels, labels).map_err(|e| Error::io(&paths.labels, e))?;
        Ok(paths)
    }
}

#[derive(Clone, Debug)]
pub struct PlantedConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub noise: f64,
    pub dim: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            train: 800,
            dev: 100,
            test: 100,
            noise: 0.10,
            dim: 16,
            seed: 7,
        }
    }
}

const FUNCTION_WORDS: &[(&str, &str, &str)] = &[
    ("the", "DET", "det"),
    ("a", "DET", "det"),
    ("of", "ADP", "prep"),
    ("in", "ADP", "prep"),
    ("with", "ADP", "prep"),
    ("and", "CCONJ", "cc"),
    ("was", "AUX", "auxpass"),
    ("patients", "NOUN", "nsubj"),
    ("treatment", "NOUN", "pobj"),
    ("dose", "NOUN", "dobj"),
    ("induced", "VERB", "amod"),
    ("observed", "VERB", "ROOT"),
    ("reported", "VERB", "ROOT"),
    ("after", "ADP", "prep"),
    ("severe", "ADJ", "amod"),
    ("acute", "ADJ", "amod"),
    ("study", "NOUN", "nsubj"),
    ("effect", "NOUN", "dobj"),
    ("risk", "NOUN", "pobj"),
    ("significant", "ADJ", "amod"),
];

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn near(rng: &mut impl Rng, center: &[f32], spread: f32) -> Vec<f32> {
    center.iter().map(|c| c + rng.gen_range(-spread..spread)).collect()
}

fn vocabulary(prefix: &str, n: usize, rng: &mut impl Rng) -> Vec<String> {
    const SYLLABLES: &[&str] = &[
        "ar", "bo", "ci", "da", "el", "fo", "gu", "hy", "ix", "lo", "me", "no", "pra", "qui", "ro", "su", "ta", "vi",
        "xa", "zo",
    ];
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let parts = rng.gen_range(2..4);
        let mut word: String = (0..parts).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        word.push_str(prefix);
        if !out.contains(&word) {
            out.push(word);
        }
    }
    out
}

struct EntityKind {
    class: &'static str,
    ner: &'static str,
    pos: &'static str,
    frequent: Vec<String>,
    rare: Vec<String>,
    center: Vec<f32>,
    channel_a: bool,
}

/// Planted two-class corpus; see the module docs for the generating rules.
pub fn planted(config: &PlantedConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let labels = LabelSet::new(["Chemical", "Disease"]).unwrap();
    let kinds = [
        EntityKind {
            class: "Chemical",
            ner: "CHEMICAL",
            pos: "NOUN",
            frequent: vocabulary("ine", 8, &mut rng),
            rare: vocabulary("ol", 600, &mut rng),
            center: random_unit(&mut rng, dim),
            channel_a: true,
        },
        EntityKind {
            class: "Disease",
            ner: "DISEASE",
            pos: "NOUN",
            frequent: vocabulary("itis", 8, &mut rng),
            rare: vocabulary("osis", 600, &mut rng),
            center: random_unit(&mut rng, dim),
            channel_a: false,
        },
    ];
    let background_weights: Vec<f64> = (0..FUNCTION_WORDS.len()).map(|i| 1.0 / (i as f64 + 2.0)).collect();
    let background = WeightedIndex::new(&background_weights).unwrap();
    let noise = config.noise;

    let mut records = Vec::new();
    let (mut emb_a, mut emb_b, mut sent) = (Vec::new(), Vec::new(), Vec::new());
    let splits = std::iter::repeat_n(Split::Train, config.train)
        .chain(std::iter::repeat_n(Split::Dev, config.dev))
        .chain(std::iter::repeat_n(Split::Test, config.test));
    for (d, split) in splits.enumerate() {
        let mut tokens = Vec::new();
        let mut gold = Vec::new();
        let mut doc_vec = vec![0.0f32; dim];
        let len = rng.gen_range(12..28);
        while tokens.len() < len {
            if rng.gen_bool(0.12) {
                let kind = &kinds[rng.gen_range(0..2)];
                let surface = if rng.gen_bool(1.0 / 3.0) {
                    kind.frequent.choose(&mut rng).unwrap().clone()
                } else {
                    kind.rare.choose(&mut rng).unwrap().clone()
                };
                let mut words = vec![(surface, kind.pos, "dobj")];
                if kind.class == "Disease" && rng.gen_bool(0.25) {
                    words[0].2 = "compound";
                    words.push(("disease".to_string(), "NOUN", "dobj"));
                }
                for (text, pos, dep) in words {
                    let ner = if rng.gen_bool(noise) { "" } else { kind.ner };
                    let on_cluster = !rng.gen_bool(noise);
                    let cluster = if on_cluster {
                        near(&mut rng, &kind.center, 0.12)
                    } else {
                        random_unit(&mut rng, dim)
                    };
                    let other = random_unit(&mut rng, dim);
                    let (a, b) = if kind.channel_a {
                        (cluster, other)
                    } else {
                        (other, cluster)
                    };
                    for (x, c) in doc_vec.iter_mut().zip(&kind.center) {
                        *x += c;
                    }
                    tokens.push(Token::new(&text, pos, dep, ner));
                    gold.push(kind.class.to_string());
                    emb_a.push(a);
                    emb_b.push(b);
                }
            } else {
                let (text, pos, dep) = FUNCTION_WORDS[background.sample(&mut rng)];
                let ner = if rng.gen_bool(noise / 10.0) {
                    kinds[rng.gen_range(0..2)].ner
                } else {
                    ""
                };
                tokens.push(Token::new(text, pos, dep, ner));
                gold.push(OUTSIDE.to_string());
                emb_a.push(random_unit(&mut rng, dim));
                emb_b.push(random_unit(&mut rng, dim));
            }
        }
        for (x, r) in doc_vec.iter_mut().zip(random_unit(&mut rng, dim)) {
            *x += r;
        }
        sent.push(doc_vec);
        records.push(DocumentRecord {
            id: format!("{}-{d:04}", split.name()),
            split,
            tokens,
            gold: Some(gold),
        });
    }
    SyntheticCorpus {
        labels,
        records,
        dim,
        emb_a,
        emb_b,
        sent,
    }
}

/// Small random corpus with a narrow vocabulary and repeated embedding rows,
/// so that every condition kind matches somewhere. Train documents carry gold
/// as well, for scripted annotators.
pub fn random_corpus(seed: u64, docs: usize, max_len: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 4;
    let labels = LabelSet::new(["A", "B"]).unwrap();
    let words = ["alpha", "Beta", "gamma", "delta", "eps"];
    let pos = ["NOUN", "VERB", "ADJ"];
    let dep = ["nsubj", "dobj"];
    let ner = ["", "", "ORG", "PER"];
    let outputs = ["A", "B", OUTSIDE, OUTSIDE];
    let prototypes: Vec<Vec<f32>> = (0..4).map(|_| random_unit(&mut rng, dim)).collect();
    let mut records = Vec::new();
    let (mut emb_a, mut emb_b, mut sent) = (Vec::new(), Vec::new(), Vec::new());
    for d in 0..docs {
        let len = rng.gen_range(1..=max_len);
        let split = match d % 5 {
            3 => Split::Dev,
            4 => Split::Test,
            _ => Split::Train,
        };
        let tokens = (0..len)
            .map(|_| {
                Token::new(
                    words.choose(&mut rng).unwrap(),
                    pos.choose(&mut rng).unwrap(),
                    dep.choose(&mut rng).unwrap(),
                    ner.choose(&mut rng).unwrap(),
                )
            })
            .collect();
        for _ in 0..len {
            let pick = |rng: &mut ChaCha8Rng| {
                if rng.gen_bool(0.5) {
                    prototypes.choose(rng).unwrap().clone()
                } else {
                    random_unit(rng, dim)
                }
            };
            emb_a.push(pick(&mut rng));
            emb_b.push(pick(&mut rng));
        }
        sent.push(random_unit(&mut rng, dim));
        records.push(DocumentRecord {
            id: format!("r{d:03}"),
            split,
            tokens,
            gold: Some(
                (0..len)
                    .map(|_| outputs.choose(&mut rng).unwrap().to_string())
                    .collect(),
            ),
        });
    }
    SyntheticCorpus {
        labels,
        records,
        dim,
        emb_a,
        emb_b,
        sent,
    }
}

/// Target statistics for [`shaped`]: document count, mean tokens per
/// document and gold frequencies of each class (the remainder is `O`).
#[derive(Clone, Debug)]
pub struct CorpusShape {
    pub docs: usize,
    pub mean_tokens: f64,
    pub frequencies: Vec<(String, f64)>,
    /// Fraction of documents placed in dev and in test each.
    pub held_out: f64,
}

/// Corpus matching `shape`: lengths differ by at most one token and gold
/// labels are spread by error diffusion, so frequencies hit their targets
/// to within one token per class.
pub fn shaped(shape: &CorpusShape, seed: u64) -> Result<SyntheticCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = LabelSet::new(shape.frequencies.iter().map(|(c, _)| c.clone()))?;
    let mut targets: Vec<f64> = shape.frequencies.iter().map(|(_, f)| *f).collect();
    let rest = 1.0 - targets.iter().sum::<f64>();
    if !(0.0..=1.0).contains(&rest) || targets.iter().any(|f| *f < 0.0) {
        return Err(Error::Invalid(
            "class frequencies must be non-negative and sum to at most 1".into(),
        ));
    }
    targets.push(rest);
    let total = (shape.docs as f64 * shape.mean_tokens).round() as usize;
    if shape.docs == 0 || total < shape.docs {
        return Err(Error::Invalid("shape needs at least one token per document".into()));
    }
    let held = (shape.docs as f64 * shape.held_out).round() as usize;
    let (base, extra) = (total / shape.docs, total % shape.docs);

    let dim = 4;
    let mut assigned = vec![0.0f64; targets.len()];
    let mut seen = 0.0f64;
    let mut records = Vec::with_capacity(shape.docs);
    let (mut emb_a, mut emb_b, mut sent) = (Vec::new(), Vec::new(), Vec::new());
    for d in 0..shape.docs {
        let split = if d < held {
            Split::Dev
        } else if d < 2 * held {
            Split::Test
        } else {
            Split::Train
        };
        let len = base + usize::from(d < extra);
        let mut tokens = Vec::with_capacity(len);
        let mut gold = Vec::with_capacity(len);
        for t in 0..len {
            seen += 1.0;
            let c = (0..targets.len())
                .max_by(|&a, &b| {
                    let da = targets[a] * seen - assigned[a];
                    let db = targets[b] * seen - assigned[b];
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap();
            assigned[c] += 1.0;
            tokens.push(Token::new(&format!("w{}", (d * 31 + t) % 97), "X", "dep", ""));
            gold.push(labels.output_name(c).to_string());
            emb_a.push(random_unit(&mut rng, dim));
            emb_b.push(random_unit(&mut rng, dim));
        }
        sent.push(random_unit(&mut rng, dim));
        records.push(DocumentRecord {
            id: format!("doc{d:05}"),
            split,
            tokens,
            gold: Some(gold),
        });
    }
    Ok(SyntheticCorpus {
        labels,
        records,
        dim,
        emb_a,
        emb_b,
        sent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_shape() {
        let config = PlantedConfig {
            train: 40,
            dev: 5,
            test: 5,
            ..PlantedConfig::default()
        };
        let corpus = planted(&config).into_corpus().unwrap();
        assert_eq!(corpus.documents().len(), 50);
        assert_eq!(corpus.docs_in(Split::Dev).count(), 5);
        let entity_tokens = corpus
            .documents()
            .iter()
            .flat_map(|d| d.gold.as_ref().unwrap())
            .filter(|&&g| g != corpus.labels().outside())
            .count();
        assert!(entity_tokens > 50);
    }

    #[test]
    fn planted_is_deterministic() {
        let config = PlantedConfig {
            train: 5,
            dev: 1,
            test: 1,
            ..PlantedConfig::default()
        };
        let a = planted(&config);
        let b = planted(&config);
        assert_eq!(a.records, b.records);
        assert_eq!(a.emb_a, b.emb_a);
    }

    #[test]
    fn shaped_corpus_hits_targets() {
        let shape = CorpusShape {
            docs: 838,
            mean_tokens: 36.5,
            frequencies: vec![("Aspect".into(), 0.100), ("Opinion".into(), 0.114)],
            held_out: 0.2,
        };
        let corpus = shaped(&shape, 1).unwrap().into_corpus().unwrap();
        let stats = crate::corpus::corpus_stats(&corpus);
        assert_eq!(stats.total_docs, 838);
        assert!((stats.mean_tokens - 36.5).abs() < 0.05);
        let freqs = stats.gold_frequencies.unwrap();
        for ((_, got), want) in freqs.iter().zip([0.100, 0.114, 0.786]) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn random_corpus_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let synthetic = random_corpus(3, 12, 6);
        let paths = synthetic.write(dir.path()).unwrap();
        let from_files = Corpus::ingest(&paths).unwrap();
        let in_memory = synthetic.into_corpus().unwrap();
        assert_eq!(from_files.documents(), in_memory.documents());
        assert_eq!(from_files.store(Channel::EmbA), in_memory.store(Channel::EmbA));
    }
}
