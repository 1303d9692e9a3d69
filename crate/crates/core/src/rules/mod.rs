//! Atomic conditions, labeling functions and their synthesis from span
//! demonstrations.

mod apply;
mod synth;

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Channel, LabelSet, OUTSIDE};
use crate::error::{Error, Result};

pub use apply::{apply_lf, eval_condition, CompiledFunction};
pub use synth::{synthesize, Candidate, Synthesis, MAX_CANDIDATES, MAX_SPAN};

/// Default cosine threshold for similarity conditions.
pub const DEFAULT_TAU: f64 = 0.85;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionKind {
    TokenExact,
    SimilarA,
    SimilarB,
    PosMatch,
    DepMatch,
    NerMatch,
}

impl ConditionKind {
    pub const ALL: [ConditionKind; 6] = [
        ConditionKind::TokenExact,
        ConditionKind::PosMatch,
        ConditionKind::DepMatch,
        ConditionKind::NerMatch,
        ConditionKind::SimilarA,
        ConditionKind::SimilarB,
    ];

    pub fn is_tag(self) -> bool {
        matches!(
            self,
            ConditionKind::PosMatch | ConditionKind::DepMatch | ConditionKind::NerMatch
        )
    }

    pub fn is_similarity(self) -> bool {
        matches!(self, ConditionKind::SimilarA | ConditionKind::SimilarB)
    }

    pub fn channel(self) -> Option<Channel> {
        match self {
            ConditionKind::SimilarA => Some(Channel::EmbA),
            ConditionKind::SimilarB => Some(Channel::EmbB),
            _ => None,
        }
    }
}

/// Anchor vector stored by reference to the demonstration token's row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VecRef {
    pub channel: Channel,
    pub row: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicCondition {
    pub kind: ConditionKind,
    /// Surface text for `TOKEN_EXACT`, tag for `*_MATCH`, and the
    /// demonstration token's text (display only) for similarity conditions.
    pub anchor: Option<String>,
    pub vec_ref: Option<VecRef>,
    pub tau: Option<f64>,
    pub negated: bool,
}

impl AtomicCondition {
    pub fn exact(text: &str) -> Self {
        Self {
            kind: ConditionKind::TokenExact,
            anchor: Some(text.to_string()),
            vec_ref: None,
            tau: None,
            negated: false,
        }
    }

    pub fn tag(kind: ConditionKind, tag: &str) -> Self {
        debug_assert!(kind.is_tag());
        Self {
            kind,
            anchor: Some(tag.to_string()),
            vec_ref: None,
            tau: None,
            negated: false,
        }
    }

    pub fn similar(channel: Channel, row: usize, text: &str, tau: f64) -> Self {
        let kind = match channel {
            Channel::EmbA => ConditionKind::SimilarA,
            Channel::EmbB => ConditionKind::SimilarB,
            Channel::Sent => panic!("sentence channel cannot anchor a token condition"),
        };
        Self {
            kind,
            anchor: Some(text.to_string()),
            vec_ref: Some(VecRef { channel, row }),
            tau: Some(tau),
            negated: false,
        }
    }

    pub fn negate(mut self) -> Self {
        self.negated = !self.negated;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("{:?} condition: {m}", self.kind)));
        match self.kind {
            ConditionKind::TokenExact => {
                if self.anchor.as_deref().is_none_or(str::is_empty) {
                    return bad("missing anchor text");
                }
            }
            k if k.is_tag() => {
                if self.anchor.as_deref().is_none_or(str::is_empty) {
                    return bad("missing anchor tag");
                }
            }
            k => {
                let Some(vec_ref) = self.vec_ref else {
                    return bad("missing anchor vector");
                };
                if Some(vec_ref.channel) != k.channel() {
                    return bad("anchor vector from the wrong channel");
                }
                match self.tau {
                    Some(t) if t > 0.0 && t <= 1.0 => {}
                    _ => return bad("threshold must lie in (0, 1]"),
                }
            }
        }
        if !self.kind.is_similarity() && (self.vec_ref.is_some() || self.tau.is_some()) {
            return bad("unexpected similarity payload");
        }
        Ok(())
    }

    fn render(&self, out: &mut String) {
        if self.negated {
            out.push_str("NOT ");
        }
        let anchor = self.anchor.as_deref().unwrap_or("");
        let _ = match self.kind {
            ConditionKind::TokenExact => write!(out, "text={anchor:?}"),
            ConditionKind::PosMatch => write!(out, "pos={anchor}"),
            ConditionKind::DepMatch => write!(out, "dep={anchor}"),
            ConditionKind::NerMatch => write!(out, "ner={anchor}"),
            ConditionKind::SimilarA | ConditionKind::SimilarB => {
                let name = if self.kind == ConditionKind::SimilarA {
                    "sim_a"
                } else {
                    "sim_b"
                };
                write!(out, "{name}({anchor:?})≥{}", self.tau.unwrap_or_default())
            }
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        })
    }
}

/// One conjunction of conditions per span position.
pub type Pattern = Vec<Vec<AtomicCondition>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LfRecord", into = "LfRecord")]
pub struct LabelingFunction {
    id: String,
    name: String,
    pattern: Pattern,
    target: String,
    polarity: Polarity,
    provenance: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct LfRecord {
    id: String,
    name: String,
    pattern: Pattern,
    target: String,
    polarity: Polarity,
    #[serde(default)]
    provenance: Option<usize>,
}

impl TryFrom<LfRecord> for LabelingFunction {
    type Error = Error;

    fn try_from(r: LfRecord) -> Result<Self> {
        let lf = LabelingFunction::new(r.pattern, &r.target, r.polarity, r.provenance)?;
        if lf.id != r.id {
            return Err(Error::CorruptProject(format!(
                "labeling function id {} does not match its content ({})",
                r.id, lf.id
            )));
        }
        Ok(lf)
    }
}

impl From<LabelingFunction> for LfRecord {
    fn from(lf: LabelingFunction) -> Self {
        LfRecord {
            id: lf.id,
            name: lf.name,
            pattern: lf.pattern,
            target: lf.target,
            polarity: lf.polarity,
            provenance: lf.provenance,
        }
    }
}

/// Maximum conjunction width per position.
pub const MAX_CONJUNCTION: usize = 2;

impl LabelingFunction {
    /// `provenance` is the index of the source annotation in the project log.
    pub fn new(pattern: Pattern, target: &str, polarity: Polarity, provenance: Option<usize>) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::Invalid("labeling function pattern is empty".into()));
        }
        for position in &pattern {
            if position.is_empty() || position.len() > MAX_CONJUNCTION {
                return Err(Error::Invalid(format!(
                    "each position needs 1 to {MAX_CONJUNCTION} conditions, got {}",
                    position.len()
                )));
            }
            for cond in position {
                cond.validate()?;
            }
        }
        if target.is_empty() || target == OUTSIDE {
            return Err(Error::Invalid(format!("invalid target class {target:?}")));
        }
        let mut lf = Self {
            id: String::new(),
            name: String::new(),
            pattern,
            target: target.to_string(),
            polarity,
            provenance,
        };
        lf.id = content_id(&lf.pattern, &lf.target, lf.polarity);
        lf.name = lf.describe();
        Ok(lf)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn span_len(&self) -> usize {
        self.pattern.len()
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn provenance(&self) -> Option<usize> {
        self.provenance
    }

    /// Output-space index this function votes when it fires.
    pub fn vote(&self, labels: &LabelSet) -> Result<usize> {
        let class = labels
            .class_index(&self.target)
            .ok_or_else(|| Error::UnknownLabel(self.target.clone()))?;
        Ok(match self.polarity {
            Polarity::Positive => class,
            Polarity::Negative => labels.outside(),
        })
    }

    /// A copy with the negation of one condition flipped.
    pub fn toggle_negation(&self, position: usize, index: usize) -> Result<Self> {
        let mut pattern = self.pattern.clone();
        let cond = pattern
            .get_mut(position)
            .and_then(|p| p.get_mut(index))
            .ok_or_else(|| Error::Invalid(format!("no condition {index} at position {position}")))?;
        cond.negated = !cond.negated;
        Self::new(pattern, &self.target, self.polarity, self.provenance)
    }

    /// Human-readable rendering, e.g. `[text="aspirin"] → Chemical`.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (i, position) in self.pattern.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push('[');
            for (j, cond) in position.iter().enumerate() {
                if j > 0 {
                    out.push_str(" & ");
                }
                cond.render(&mut out);
            }
            out.push(']');
        }
        match self.polarity {
            Polarity::Positive => write!(out, " → {}", self.target),
            Polarity::Negative => write!(out, " → NOT {} (O)", self.target),
        }
        .unwrap();
        out
    }
}

/// Canonical JSON with sorted keys and no whitespace.
pub fn canonical_json(pattern: &Pattern, target: &str, polarity: Polarity) -> String {
    let value = serde_json::json!({
        "pattern": pattern,
        "target": target,
        "polarity": polarity,
    });
    let mut out = String::new();
    write_sorted(&value, &mut out);
    out
}

fn write_sorted(value: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                write_sorted(&map[k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_sorted(v, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn content_id(pattern: &Pattern, target: &str, polarity: Polarity) -> String {
    hex::encode(Sha256::digest(canonical_json(pattern, target, polarity).as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub polarity: Polarity,
}

/// A window where every position's conjunction holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchSpan {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub lf_id: String,
    /// Output-space index of the emitted vote.
    pub vote: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_lf(text: &str, polarity: Polarity) -> LabelingFunction {
        LabelingFunction::new(vec![vec![AtomicCondition::exact(text)]], "Chemical", polarity, None).unwrap()
    }

    #[test]
    fn describe_renderings() {
        assert_eq!(
            exact_lf("aspirin", Polarity::Positive).describe(),
            "[text=\"aspirin\"] → Chemical"
        );
        let neg = LabelingFunction::new(
            vec![vec![AtomicCondition::tag(ConditionKind::PosMatch, "NOUN").negate()]],
            "Aspect",
            Polarity::Negative,
            None,
        )
        .unwrap();
        assert_eq!(neg.describe(), "[NOT pos=NOUN] → NOT Aspect (O)");
        let pair = LabelingFunction::new(
            vec![
                vec![
                    AtomicCondition::similar(Channel::EmbA, 3, "good", 0.85),
                    AtomicCondition::tag(ConditionKind::NerMatch, "ORG"),
                ],
                vec![AtomicCondition::tag(ConditionKind::DepMatch, "amod")],
            ],
            "Opinion",
            Polarity::Positive,
            None,
        )
        .unwrap();
        assert_eq!(pair.name(), "[sim_a(\"good\")≥0.85 & ner=ORG] [dep=amod] → Opinion");
    }

    #[test]
    fn canonical_form_is_sorted_and_compact() {
        let lf = exact_lf("aspirin", Polarity::Positive);
        let json = canonical_json(lf.pattern(), lf.target(), lf.polarity());
        assert_eq!(
            json,
            r#"{"pattern":[[{"anchor":"aspirin","kind":"TOKEN_EXACT","negated":false,"tau":null,"vec_ref":null}]],"polarity":"positive","target":"Chemical"}"#
        );
        assert_eq!(lf.id(), hex::encode(Sha256::digest(json.as_bytes())));
        assert_eq!(lf.id().len(), 64);
    }

    #[test]
    fn id_depends_on_content_only() {
        let a = exact_lf("aspirin", Polarity::Positive);
        let b = LabelingFunction::new(a.pattern().clone(), "Chemical", Polarity::Positive, Some(7)).unwrap();
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), exact_lf("aspirin", Polarity::Negative).id());
        assert_ne!(a.id(), a.toggle_negation(0, 0).unwrap().id());
        assert_eq!(
            a.id(),
            a.toggle_negation(0, 0).unwrap().toggle_negation(0, 0).unwrap().id()
        );
    }

    #[test]
    fn serde_round_trip_checks_id() {
        let lf = exact_lf("aspirin", Polarity::Positive);
        let json = serde_json::to_string(&lf).unwrap();
        let back: LabelingFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, lf);
        let tampered = json.replace("aspirin\"", "ibuprofen\"");
        assert!(serde_json::from_str::<LabelingFunction>(&tampered).is_err());
    }

    #[test]
    fn structural_validation() {
        assert!(LabelingFunction::new(vec![], "A", Polarity::Positive, None).is_err());
        let three = vec![vec![AtomicCondition::exact("a"); 3]];
        assert!(LabelingFunction::new(three, "A", Polarity::Positive, None).is_err());
        let mut bad_tau = AtomicCondition::similar(Channel::EmbB, 0, "x", 0.5);
        bad_tau.tau = Some(1.5);
        assert!(LabelingFunction::new(vec![vec![bad_tau]], "A", Polarity::Positive, None).is_err());
        let empty_tag = AtomicCondition::tag(ConditionKind::NerMatch, "");
        assert!(LabelingFunction::new(vec![vec![empty_tag]], "A", Polarity::Positive, None).is_err());
        assert!(LabelingFunction::new(vec![vec![AtomicCondition::exact("a")]], "O", Polarity::Positive, None).is_err());
    }

    #[test]
    fn votes() {
        let labels = LabelSet::new(["Chemical", "Disease"]).unwrap();
        assert_eq!(exact_lf("a", Polarity::Positive).vote(&labels).unwrap(), 0);
        assert_eq!(exact_lf("a", Polarity::Negative).vote(&labels).unwrap(), 2);
    }
}
