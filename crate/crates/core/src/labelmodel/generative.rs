//! Token-independent generative label model.
//!
//! Each function `j` votes a fixed output `c_j`. Given the true output `y` it
//! fires with probability `theta_j` when `y == c_j` and `phi_j` otherwise,
//! independently of the other functions. Parameters are fit by EM with
//! Beta(2,2) priors on `theta`/`phi` and a Dirichlet(2) prior on the class
//! prior, so the tracked objective is the log posterior (log-likelihood plus
//! log prior), which EM never decreases.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::{FitConfig, LabelMatrix, LabelModel, PosteriorMatrix, Segment, Vote};

/// Per-function emission log-probabilities shared with the HMM.
pub(crate) struct Emissions {
    k: usize,
    lf_votes: Vec<usize>,
    hit_delta: Vec<f64>,
    false_delta: Vec<f64>,
    base: Vec<f64>,
}

impl Emissions {
    pub(crate) fn new(k: usize, lf_votes: &[usize], theta: &[f64], phi: &[f64]) -> Self {
        let mut base = vec![0.0; k];
        for (j, &c) in lf_votes.iter().enumerate() {
            for (y, b) in base.iter_mut().enumerate() {
                *b += if y == c {
                    (1.0 - theta[j]).ln()
                } else {
                    (1.0 - phi[j]).ln()
                };
            }
        }
        Self {
            k,
            lf_votes: lf_votes.to_vec(),
            hit_delta: theta.iter().map(|t| t.ln() - (1.0 - t).ln()).collect(),
            false_delta: phi.iter().map(|p| p.ln() - (1.0 - p).ln()).collect(),
            base,
        }
    }

    /// `out[y] = log P(row | Y = y)`.
    pub(crate) fn log_likelihood(&self, row: &[Vote], out: &mut [f64]) {
        out.copy_from_slice(&self.base);
        for (j, v) in row.iter().enumerate() {
            if v.is_some() {
                let c = self.lf_votes[j];
                for (y, o) in out.iter_mut().enumerate().take(self.k) {
                    *o += if y == c { self.hit_delta[j] } else { self.false_delta[j] };
                }
            }
        }
    }
}

/// Expected counts for the emission M-step.
#[derive(Clone, Debug)]
pub(crate) struct EmissionStats {
    /// `sum_i gamma_i(c_j) * fires_ij`
    hits: Vec<f64>,
    /// `sum_i fires_ij`
    fires: Vec<f64>,
    /// `sum_i gamma_i(y)`
    mass: Vec<f64>,
    tokens: f64,
}

impl EmissionStats {
    pub(crate) fn new(k: usize, l: usize) -> Self {
        Self {
            hits: vec![0.0; l],
            fires: vec![0.0; l],
            mass: vec![0.0; k],
            tokens: 0.0,
        }
    }

    pub(crate) fn add(&mut self, row: &[Vote], lf_votes: &[usize], gamma: &[f64]) {
        for (j, v) in row.iter().enumerate() {
            if v.is_some() {
                self.fires[j] += 1.0;
                self.hits[j] += gamma[lf_votes[j]];
            }
        }
        for (m, g) in self.mass.iter_mut().zip(gamma) {
            *m += g;
        }
        self.tokens += 1.0;
    }

    pub(crate) fn merge(&mut self, other: &Self) {
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        for (a, b) in self.fires.iter_mut().zip(&other.fires) {
            *a += b;
        }
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        self.tokens += other.tokens;
    }

    pub(crate) fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Smoothed MAP estimates of `(theta, phi)`.
    pub(crate) fn emission_update(&self, lf_votes: &[usize]) -> (Vec<f64>, Vec<f64>) {
        lf_votes
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                let on = self.mass[c];
                let off = (self.tokens - on).max(0.0);
                let theta = (1.0 + self.hits[j]) / (2.0 + on);
                let phi = (1.0 + (self.fires[j] - self.hits[j]).max(0.0)) / (2.0 + off);
                (theta, phi)
            })
            .unzip()
    }
}

/// `log Beta(2,2)` density terms, up to a constant.
pub(crate) fn emission_log_prior(theta: &[f64], phi: &[f64]) -> f64 {
    theta.iter().chain(phi).map(|p| p.ln() + (1.0 - p).ln()).sum()
}

/// `log Dirichlet(2)` density terms, up to a constant.
pub(crate) fn dirichlet_log_prior(dist: &[f64]) -> f64 {
    dist.iter().map(|p| p.ln()).sum()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerativeParams {
    pub lf_votes: Vec<usize>,
    /// `P(fire | Y = c_j)`
    pub theta: Vec<f64>,
    /// `P(fire | Y != c_j)`
    pub phi: Vec<f64>,
    /// Class prior over the output space.
    pub prior: Vec<f64>,
    /// Log-posterior objective, one entry per evaluated parameter set.
    pub trace: Vec<f64>,
}

impl GenerativeParams {
    pub fn initial(k: usize, lf_votes: &[usize], config: &FitConfig) -> Self {
        let l = lf_votes.len();
        Self {
            lf_votes: lf_votes.to_vec(),
            theta: vec![config.init_theta; l],
            phi: vec![config.init_phi; l],
            prior: vec![1.0 / k as f64; k],
            trace: Vec::new(),
        }
    }

    fn k(&self) -> usize {
        self.prior.len()
    }

    fn check_matrix(&self, m: &LabelMatrix) -> Result<()> {
        if m.lf_votes() != self.lf_votes.as_slice() || m.num_outputs() != self.k() {
            return Err(Error::Invalid(
                "label matrix functions differ from the fitted model".into(),
            ));
        }
        Ok(())
    }

    /// Posteriors plus log-likelihood and expected counts.
    fn e_step(&self, m: &LabelMatrix, want_rows: bool) -> (f64, EmissionStats, Vec<f64>) {
        let k = self.k();
        let l = self.lf_votes.len();
        let emissions = Emissions::new(k, &self.lf_votes, &self.theta, &self.phi);
        let log_prior: Vec<f64> = self.prior.iter().map(|p| p.ln()).collect();

        let per_segment = |seg: &Segment| {
            let mut stats = EmissionStats::new(k, l);
            let mut ll = 0.0;
            let mut rows = if want_rows {
                Vec::with_capacity(seg.len * k)
            } else {
                Vec::new()
            };
            let mut buf = vec![0.0; k];
            for i in seg.offset..seg.offset + seg.len {
                let row = m.row(i);
                emissions.log_likelihood(row, &mut buf);
                for (b, lp) in buf.iter_mut().zip(&log_prior) {
                    *b += lp;
                }
                let norm = log_sum_exp(&buf);
                ll += norm;
                for b in buf.iter_mut() {
                    *b = (*b - norm).exp();
                }
                stats.add(row, &self.lf_votes, &buf);
                if want_rows {
                    rows.extend_from_slice(&buf);
                }
            }
            (ll, stats, rows)
        };

        let parts: Vec<_> = m.segments().par_iter().map(per_segment).collect();
        let mut total = EmissionStats::new(k, l);
        let mut ll = 0.0;
        let mut rows = Vec::new();
        for (seg_ll, stats, seg_rows) in parts {
            ll += seg_ll;
            total.merge(&stats);
            rows.extend(seg_rows);
        }
        (ll, total, rows)
    }

    fn log_prior(&self) -> f64 {
        emission_log_prior(&self.theta, &self.phi) + dirichlet_log_prior(&self.prior)
    }

    /// Log-likelihood of `m` under these parameters.
    pub fn log_likelihood(&self, m: &LabelMatrix) -> f64 {
        self.e_step(m, false).0
    }

    fn m_step(&mut self, stats: &EmissionStats) {
        let k = self.k() as f64;
        let (theta, phi) = stats.emission_update(&self.lf_votes);
        self.theta = theta;
        self.phi = phi;
        self.prior = stats.mass().iter().map(|g| (1.0 + g) / (k + stats.tokens)).collect();
    }
}

impl LabelModel for GenerativeParams {
    fn name(&self) -> &'static str {
        "generative"
    }

    fn posterior(&self, m: &LabelMatrix) -> Result<PosteriorMatrix> {
        self.check_matrix(m)?;
        let (_, _, rows) = self.e_step(m, true);
        Ok(PosteriorMatrix::new(self.k(), rows, m.segments().to_vec()))
    }

    fn params_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("params serialize")
    }

    fn trace(&self) -> &[f64] {
        &self.trace
    }
}

/// Fits the generative model by EM and returns the posteriors of `m`.
pub fn fit_generative(m: &LabelMatrix, config: &FitConfig) -> (GenerativeParams, PosteriorMatrix) {
    let mut params = GenerativeParams::initial(m.num_outputs(), m.lf_votes(), config);
    let mut converged = false;
    for _ in 0..config.max_iter {
        let (ll, stats, _) = params.e_step(m, false);
        let objective = ll + params.log_prior();
        if let Some(&prev) = params.trace.last() {
            if (objective - prev).abs() < config.tol {
                params.trace.push(objective);
                converged = true;
                break;
            }
        }
        params.trace.push(objective);
        params.m_step(&stats);
    }
    let (ll, _, rows) = params.e_step(m, true);
    if !converged {
        let objective = ll + params.log_prior();
        params.trace.push(objective);
    }
    let posterior = PosteriorMatrix::new(m.num_outputs(), rows, m.segments().to_vec());
    (params, posterior)
}
