//! Tokenized corpus with precomputed feature channels.
//!
//! Tag features (POS, dependency, NER) and the three embedding channels are
//! produced offline and ingested here; nothing in this crate runs an encoder.

mod embedding;
mod stats;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use embedding::dot as embedding_dot;
pub use embedding::{cosine, write_embeddings, Channel, EmbeddingStore};
pub use stats::{corpus_stats, CorpusStats, SplitStats};

/// Background class name. Index `num_classes()` in the output space.
pub const OUTSIDE: &str = "O";
pub const ABSTAIN: &str = "ABSTAIN";

/// Entity classes in stable index order. The output space is the classes
/// followed by [`OUTSIDE`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabelSetRecord", into = "LabelSetRecord")]
pub struct LabelSet {
    classes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LabelSetRecord {
    classes: Vec<String>,
}

impl TryFrom<LabelSetRecord> for LabelSet {
    type Error = Error;

    fn try_from(r: LabelSetRecord) -> Result<Self> {
        LabelSet::new(r.classes)
    }
}

impl From<LabelSet> for LabelSetRecord {
    fn from(l: LabelSet) -> Self {
        LabelSetRecord { classes: l.classes }
    }
}

impl LabelSet {
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = S>) -> Result<Self> {
        let classes: Vec<String> = classes.into_iter().map(Into::into).collect();
        if classes.is_empty() {
            return Err(Error::LabelSet("at least one class is required".into()));
        }
        for (i, c) in classes.iter().enumerate() {
            if c.is_empty() || c == OUTSIDE || c == ABSTAIN {
                return Err(Error::LabelSet(format!("reserved or empty class name {c:?}")));
            }
            if classes[..i].contains(c) {
                return Err(Error::LabelSet(format!("duplicate class {c:?}")));
            }
        }
        Ok(Self { classes })
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::LabelSet(format!("{}: {e}", path.display())))
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Classes plus the background class.
    pub fn num_outputs(&self) -> usize {
        self.classes.len() + 1
    }

    pub fn outside(&self) -> usize {
        self.classes.len()
    }

    /// Index in the output space; accepts [`OUTSIDE`].
    pub fn index_of(&self, name: &str) -> Option<usize> {
        if name == OUTSIDE {
            return Some(self.outside());
        }
        self.classes.iter().position(|c| c == name)
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn output_name(&self, idx: usize) -> &str {
        if idx == self.outside() {
            OUTSIDE
        } else {
            &self.classes[idx]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(Error::Invalid(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    #[serde(default)]
    pub pos: String,
    #[serde(default)]
    pub dep: String,
    /// Empty when the token is not part of a named entity.
    #[serde(default)]
    pub ner: String,
}

impl Token {
    pub fn new(text: &str, pos: &str, dep: &str, ner: &str) -> Self {
        Self {
            text: text.into(),
            pos: pos.into(),
            dep: dep.into(),
            ner: ner.into(),
        }
    }
}

/// One corpus line as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub split: Split,
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub split: Split,
    pub tokens: Vec<Token>,
    /// Output-space indices. Always present for dev and test. Train gold is
    /// kept only so scripted annotators can read it; the engine never uses it.
    pub gold: Option<Vec<usize>>,
    index: usize,
    token_offset: usize,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Position of this document in corpus order; also its sentence-channel row.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Token-channel row of this document's first token.
    pub fn token_offset(&self) -> usize {
        self.token_offset
    }

    pub fn token_row(&self, position: usize) -> usize {
        self.token_offset + position
    }

    /// Gold labels that the engine may consult (dev and test only).
    pub fn visible_gold(&self) -> Option<&[usize]> {
        match self.split {
            Split::Train => None,
            _ => self.gold.as_deref(),
        }
    }
}

/// Paths a corpus was ingested from; persisted in project files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub corpus: PathBuf,
    pub emb_a: PathBuf,
    pub emb_b: PathBuf,
    pub sent: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug)]
pub struct Corpus {
    labels: LabelSet,
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
    emb_a: EmbeddingStore,
    emb_b: EmbeddingStore,
    sent: EmbeddingStore,
    total_tokens: usize,
}

impl Corpus {
    /// Validates documents against the label set and stores. `records` must
    /// be in file order: token channel rows follow it.
    pub fn from_records(
        labels: LabelSet,
        records: Vec<DocumentRecord>,
        emb_a: EmbeddingStore,
        emb_b: EmbeddingStore,
        sent: EmbeddingStore,
    ) -> Result<Self> {
        Self::build(labels, records.into_iter().map(|r| (0, r)), emb_a, emb_b, sent, None)
    }

    fn build(
        labels: LabelSet,
        records: impl IntoIterator<Item = (usize, DocumentRecord)>,
        emb_a: EmbeddingStore,
        emb_b: EmbeddingStore,
        sent: EmbeddingStore,
        source: Option<&Path>,
    ) -> Result<Self> {
        let fail = |line: usize, message: String| match source {
            Some(path) => Error::CorpusFormat {
                path: path.to_path_buf(),
                line,
                message,
            },
            None => Error::Invalid(message),
        };

        let mut documents = Vec::new();
        let mut by_id = HashMap::new();
        let mut offset = 0;
        for (line, rec) in records {
            if rec.tokens.is_empty() {
                return Err(fail(line, format!("document {:?} has no tokens", rec.id)));
            }
            if let Some(t) = rec.tokens.iter().position(|t| t.text.is_empty()) {
                return Err(fail(line, format!("document {:?}: token {t} has empty text", rec.id)));
            }
            if by_id.contains_key(&rec.id) {
                return Err(fail(line, format!("duplicate document id {:?}", rec.id)));
            }
            let gold = match rec.gold {
                Some(g) => {
                    if g.len() != rec.tokens.len() {
                        return Err(fail(
                            line,
                            format!(
                                "document {:?}: {} gold labels for {} tokens",
                                rec.id,
                                g.len(),
                                rec.tokens.len()
                            ),
                        ));
                    }
                    let idx = g
                        .iter()
                        .map(|name| {
                            labels.index_of(name).ok_or_else(|| {
                                fail(line, format!("document {:?}: unknown gold label {name:?}", rec.id))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Some(idx)
                }
                None if rec.split != Split::Train => {
                    return Err(fail(
                        line,
                        format!("{} document {:?} requires gold labels", rec.split, rec.id),
                    ));
                }
                None => None,
            };
            let index = documents.len();
            by_id.insert(rec.id.clone(), index);
            let len = rec.tokens.len();
            documents.push(Document {
                id: rec.id,
                split: rec.split,
                tokens: rec.tokens,
                gold,
                index,
                token_offset: offset,
            });
            offset += len;
        }

        for store in [&emb_a, &emb_b] {
            if store.len() != offset {
                return Err(Error::LengthMismatch {
                    channel: store.channel().name(),
                    rows: store.len(),
                    expected: offset,
                });
            }
        }
        if sent.len() != documents.len() {
            return Err(Error::LengthMismatch {
                channel: sent.channel().name(),
                rows: sent.len(),
                expected: documents.len(),
            });
        }
        Ok(Self {
            labels,
            documents,
            by_id,
            emb_a,
            emb_b,
            sent,
            total_tokens: offset,
        })
    }

    pub fn ingest(paths: &CorpusPaths) -> Result<Self> {
        let labels = LabelSet::from_json_file(&paths.labels)?;
        let records = read_corpus_file(&paths.corpus)?;
        let emb_a = EmbeddingStore::read(&paths.emb_a, Channel::EmbA)?;
        let emb_b = EmbeddingStore::read(&paths.emb_b, Channel::EmbB)?;
        let sent = EmbeddingStore::read(&paths.sent, Channel::Sent)?;
        Self::build(labels, records, emb_a, emb_b, sent, Some(&paths.corpus))
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.documents[i])
    }

    pub fn docs_in(&self, split: Split) -> impl Iterator<Item = &Document> + '_ {
        self.documents.iter().filter(move |d| d.split == split)
    }

    pub fn total_tokens(&self) -> usize {
        self.total_tokens
    }

    pub fn store(&self, channel: Channel) -> &EmbeddingStore {
        match channel {
            Channel::EmbA => &self.emb_a,
            Channel::EmbB => &self.emb_b,
            Channel::Sent => &self.sent,
        }
    }

    /// Cosine between the sentence embeddings of two documents.
    pub fn doc_similarity(&self, a: &Document, b: &Document) -> f64 {
        self.sent.similarity(a.index, b.index)
    }
}

/// Reads a JSON-lines corpus file, returning records with their 1-based line numbers.
pub fn read_corpus_file(path: &Path) -> Result<Vec<(usize, DocumentRecord)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| Error::CorpusFormat {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

pub fn write_corpus_file(path: &Path, records: &[DocumentRecord]) -> Result<()> {
    use std::io::Write;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for rec in records {
        let line = serde_json::to_string(rec).expect("records serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, split: Split, words: &[&str], gold: Option<&[&str]>) -> DocumentRecord {
        DocumentRecord {
            id: id.into(),
            split,
            tokens: words.iter().map(|w| Token::new(w, "NOUN", "dep", "")).collect(),
            gold: gold.map(|g| g.iter().map(|s| s.to_string()).collect()),
        }
    }

    fn store(channel: Channel, rows: usize) -> EmbeddingStore {
        let rows: Vec<[f32; 4]> = (0..rows).map(|i| [1.0, i as f32, 0.5, 0.0]).collect();
        EmbeddingStore::from_rows(channel, 4, &rows).unwrap()
    }

    fn labels() -> LabelSet {
        LabelSet::new(["Chemical", "Disease"]).unwrap()
    }

    #[test]
    fn label_set_validation() {
        assert!(LabelSet::new(Vec::<String>::new()).is_err());
        assert!(LabelSet::new(["O"]).is_err());
        assert!(LabelSet::new(["ABSTAIN"]).is_err());
        assert!(LabelSet::new(["A", "A"]).is_err());
        assert!(LabelSet::new([""]).is_err());
        let l = labels();
        assert_eq!(l.index_of("O"), Some(2));
        assert_eq!(l.index_of("Disease"), Some(1));
        assert_eq!(l.output_name(2), "O");
        let parsed: LabelSet = serde_json::from_str(r#"{"classes":["A","B"]}"#).unwrap();
        assert_eq!(parsed.classes(), ["A", "B"]);
        assert!(serde_json::from_str::<LabelSet>(r#"{"classes":["O"]}"#).is_err());
    }

    #[test]
    fn minimal_corpus_has_consistent_references() {
        let docs = vec![record("d1", Split::Train, &["took", "aspirin", "today"], None)];
        let c = Corpus::from_records(
            labels(),
            docs,
            store(Channel::EmbA, 3),
            store(Channel::EmbB, 3),
            store(Channel::Sent, 1),
        )
        .unwrap();
        let d = c.doc("d1").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.token_row(2), 2);
        assert_eq!(c.total_tokens(), 3);
    }

    #[test]
    fn row_count_mismatch_names_channel() {
        let docs = vec![record("d1", Split::Train, &["a", "b", "c"], None)];
        let err = Corpus::from_records(
            labels(),
            docs,
            store(Channel::EmbA, 2),
            store(Channel::EmbB, 3),
            store(Channel::Sent, 1),
        )
        .unwrap_err();
        match err {
            Error::LengthMismatch {
                channel,
                rows,
                expected,
            } => {
                assert_eq!((channel, rows, expected), ("emb_a", 2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gold_validation() {
        let bad_label = vec![record("d", Split::Dev, &["a"], Some(&["Drug"]))];
        assert!(Corpus::from_records(
            labels(),
            bad_label,
            store(Channel::EmbA, 1),
            store(Channel::EmbB, 1),
            store(Channel::Sent, 1)
        )
        .is_err());
        let bad_len = vec![record("d", Split::Dev, &["a", "b"], Some(&["O"]))];
        assert!(Corpus::from_records(
            labels(),
            bad_len,
            store(Channel::EmbA, 2),
            store(Channel::EmbB, 2),
            store(Channel::Sent, 1)
        )
        .is_err());
        let missing = vec![record("d", Split::Test, &["a"], None)];
        assert!(Corpus::from_records(
            labels(),
            missing,
            store(Channel::EmbA, 1),
            store(Channel::EmbB, 1),
            store(Channel::Sent, 1)
        )
        .is_err());
        let dup = vec![
            record("d", Split::Train, &["a"], None),
            record("d", Split::Train, &["b"], None),
        ];
        assert!(Corpus::from_records(
            labels(),
            dup,
            store(Channel::EmbA, 2),
            store(Channel::EmbB, 2),
            store(Channel::Sent, 2)
        )
        .is_err());
    }

    #[test]
    fn ingest_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n);
        std::fs::write(p("labels.json"), r#"{"classes":["Chemical"]}"#).unwrap();
        let good = r#"{"id":"a","split":"train","tokens":[{"text":"x","pos":"N","dep":"d","ner":""}]}"#;
        let dup = r#"{"id":"a","split":"train","tokens":[{"text":"y","pos":"N","dep":"d","ner":""}]}"#;
        std::fs::write(p("corpus.jsonl"), format!("{good}\n{dup}\n")).unwrap();
        write_embeddings(&p("a.bin"), Channel::EmbA, 2, &[[1.0f32, 0.0]; 2]).unwrap();
        write_embeddings(&p("b.bin"), Channel::EmbB, 2, &[[1.0f32, 0.0]; 2]).unwrap();
        write_embeddings(&p("s.bin"), Channel::Sent, 2, &[[1.0f32, 0.0]; 2]).unwrap();
        let paths = CorpusPaths {
            corpus: p("corpus.jsonl"),
            emb_a: p("a.bin"),
            emb_b: p("b.bin"),
            sent: p("s.bin"),
            labels: p("labels.json"),
        };
        match Corpus::ingest(&paths) {
            Err(Error::CorpusFormat { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
        std::fs::write(p("corpus.jsonl"), format!("{good}\nnot json\n")).unwrap();
        assert!(matches!(
            Corpus::ingest(&paths),
            Err(Error::CorpusFormat { line: 2, .. })
        ));
    }
}
