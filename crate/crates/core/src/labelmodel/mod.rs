//! Label matrices, aggregation models and their evaluation.
//!
//! Every aggregator turns a [`LabelMatrix`] (tokens x functions, entries
//! `ABSTAIN` or an output index) into a [`PosteriorMatrix`] over the classes
//! plus `O`. New aggregators plug in through [`Aggregator`].

mod export;
mod generative;
mod hmm;
mod majority;
mod matrix;
mod metrics;
mod stats;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use export::{export_records, from_bio, to_bio, ExportRecord};
pub use generative::{fit_generative, GenerativeParams};
pub use hmm::{fit_hmm, HmmParams};
pub use majority::{fit_majority, MajorityVoter};
pub use matrix::{build_matrix, LabelMatrix, Segment, Vote};
pub use metrics::{evaluate, evaluate_split, ClassMetrics, ModelMetrics, Prf};
pub use stats::{lf_stats, LfStats};

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix {
    k: usize,
    probs: Vec<f64>,
    segments: Vec<Segment>,
}

impl PosteriorMatrix {
    pub fn new(k: usize, probs: Vec<f64>, segments: Vec<Segment>) -> Self {
        debug_assert_eq!(probs.len() % k, 0);
        Self { k, probs, segments }
    }

    pub fn num_outputs(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.k)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Rows of one document segment.
    pub fn segment_rows(&self, seg: &Segment) -> impl Iterator<Item = &[f64]> {
        self.probs[seg.offset * self.k..(seg.offset + seg.len) * self.k].chunks_exact(self.k)
    }

    pub fn segment_of(&self, doc_id: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.doc_id == doc_id)
    }

    /// Checks the distribution invariant on every row.
    pub fn check(&self) -> Result<()> {
        for (i, row) in self.rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::FitFailed(format!(
                    "posterior row {i} is not a distribution: {row:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Argmax per row. Ties that include `outside` resolve to `outside`; ties
/// among classes resolve to the lowest index.
pub fn hard_labels(p: &PosteriorMatrix, outside: usize) -> Vec<usize> {
    p.rows().map(|row| argmax_row(row, outside)).collect()
}

pub(crate) fn argmax_row(row: &[f64], outside: usize) -> usize {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if row[outside] == max {
        return outside;
    }
    row.iter().position(|&p| p == max).unwrap_or(outside)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop once the objective improves by less than this.
    pub tol: f64,
    pub init_theta: f64,
    pub init_phi: f64,
    /// Initial HMM self-transition probability.
    pub self_transition: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            init_theta: 0.7,
            init_phi: 0.05,
            self_transition: 0.9,
        }
    }
}

/// A fitted aggregator that can score new label matrices with its parameters.
pub trait LabelModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn posterior(&self, m: &LabelMatrix) -> Result<PosteriorMatrix>;

    fn params_json(&self) -> serde_json::Value;

    /// Objective per EM iteration; empty for non-iterative models.
    fn trace(&self) -> &[f64] {
        &[]
    }
}

pub struct Fit {
    pub model: Arc<dyn LabelModel>,
    pub posterior: PosteriorMatrix,
}

pub trait Aggregator {
    fn fit(&self, m: &LabelMatrix, config: &FitConfig) -> Result<Fit>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Majority,
    Generative,
    Hmm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Majority => "majority",
            ModelKind::Generative => "generative",
            ModelKind::Hmm => "hmm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "majority" => Ok(ModelKind::Majority),
            "generative" => Ok(ModelKind::Generative),
            "hmm" => Ok(ModelKind::Hmm),
            _ => Err(Error::Invalid(format!("unknown model {s:?}"))),
        }
    }
}

impl Aggregator for ModelKind {
    fn fit(&self, m: &LabelMatrix, config: &FitConfig) -> Result<Fit> {
        let fit = match self {
            ModelKind::Majority => Fit {
                posterior: fit_majority(m),
                model: Arc::new(MajorityVoter),
            },
            ModelKind::Generative => {
                let (params, posterior) = fit_generative(m, config);
                Fit {
                    model: Arc::new(params),
                    posterior,
                }
            }
            ModelKind::Hmm => {
                let (params, posterior) = fit_hmm(m, config);
                Fit {
                    model: Arc::new(params),
                    posterior,
                }
            }
        };
        fit.posterior.check()?;
        Ok(fit)
    }
}

/// Natural-log entropy of a distribution.
pub fn entropy(row: &[f64]) -> f64 {
    -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_row(row: &[f64]) -> PosteriorMatrix {
        PosteriorMatrix::new(row.len(), row.to_vec(), vec![])
    }

    #[test]
    fn tie_rules() {
        // classes Chem=0, Dis=1, O=2
        assert_eq!(hard_labels(&single_row(&[0.4, 0.4, 0.2]), 2), vec![0]);
        assert_eq!(hard_labels(&single_row(&[0.5, 0.0, 0.5]), 2), vec![2]);
        let third = 1.0 / 3.0;
        assert_eq!(hard_labels(&single_row(&[third, third, third]), 2), vec![2]);
        assert_eq!(hard_labels(&single_row(&[0.1, 0.6, 0.3]), 2), vec![1]);
    }

    #[test]
    fn model_kind_parsing() {
        for k in [ModelKind::Majority, ModelKind::Generative, ModelKind::Hmm] {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("flyingsquid".parse::<ModelKind>().is_err());
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(&[1.0 / 3.0; 3]) - 3f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&[1.0, 0.0, 0.0]), 0.0);
    }
}
