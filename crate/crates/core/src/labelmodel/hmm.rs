//! Sequential label model: a hidden Markov chain over outputs per document,
//! with the same conditionally independent function emissions as the
//! generative model. Fit by Baum-Welch with per-step scaling and the same
//! smoothing priors (Dirichlet(2) on the initial distribution and transition
//! rows).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::generative::{dirichlet_log_prior, emission_log_prior, EmissionStats, Emissions};
use super::{FitConfig, LabelMatrix, LabelModel, PosteriorMatrix, Segment};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HmmParams {
    pub lf_votes: Vec<usize>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Initial state distribution.
    pub initial: Vec<f64>,
    /// Row-major `k x k`; `transition[r * k + s] = P(s | r)`.
    pub transition: Vec<f64>,
    pub trace: Vec<f64>,
}

/// Forward-backward output for one segment.
struct SegmentPass {
    log_likelihood: f64,
    /// `len * k` posterior marginals.
    gamma: Vec<f64>,
    /// `k * k` expected transition counts.
    xi: Vec<f64>,
}

impl HmmParams {
    pub fn initial(k: usize, lf_votes: &[usize], config: &FitConfig) -> Self {
        let l = lf_votes.len();
        let off = (1.0 - config.self_transition) / (k - 1) as f64;
        let transition = (0..k * k)
            .map(|idx| {
                if idx / k == idx % k {
                    config.self_transition
                } else {
                    off
                }
            })
            .collect();
        Self {
            lf_votes: lf_votes.to_vec(),
            theta: vec![config.init_theta; l],
            phi: vec![config.init_phi; l],
            initial: vec![1.0 / k as f64; k],
            transition,
            trace: Vec::new(),
        }
    }

    fn k(&self) -> usize {
        self.initial.len()
    }

    fn pass(&self, m: &LabelMatrix, emissions: &Emissions, seg: &Segment) -> SegmentPass {
        let k = self.k();
        let len = seg.len;
        // Scaled emission likelihoods: e[t][s] = exp(logL - shift_t).
        let mut e = vec![0.0; len * k];
        let mut shift = vec![0.0; len];
        let mut buf = vec![0.0; k];
        for t in 0..len {
            emissions.log_likelihood(m.row(seg.offset + t), &mut buf);
            let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            shift[t] = max;
            for s in 0..k {
                e[t * k + s] = (buf[s] - max).exp();
            }
        }

        let trans = &self.transition;
        let mut alpha = vec![0.0; len * k];
        let mut scale = vec![0.0; len];
        for t in 0..len {
            for s in 0..k {
                let prior = if t == 0 {
                    self.initial[s]
                } else {
                    (0..k).map(|r| alpha[(t - 1) * k + r] * trans[r * k + s]).sum()
                };
                alpha[t * k + s] = prior * e[t * k + s];
            }
            let c: f64 = alpha[t * k..(t + 1) * k].iter().sum();
            scale[t] = c;
            alpha[t * k..(t + 1) * k].iter_mut().for_each(|a| *a /= c);
        }

        let mut beta = vec![1.0; len * k];
        for t in (0..len.saturating_sub(1)).rev() {
            for r in 0..k {
                beta[t * k + r] = (0..k)
                    .map(|s| trans[r * k + s] * e[(t + 1) * k + s] * beta[(t + 1) * k + s])
                    .sum::<f64>()
                    / scale[t + 1];
            }
        }

        let mut gamma = vec![0.0; len * k];
        for t in 0..len {
            let row = &mut gamma[t * k..(t + 1) * k];
            for s in 0..k {
                row[s] = alpha[t * k + s] * beta[t * k + s];
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|g| *g /= z);
        }

        let mut xi = vec![0.0; k * k];
        for t in 0..len.saturating_sub(1) {
            let mut step = vec![0.0; k * k];
            for r in 0..k {
                for s in 0..k {
                    step[r * k + s] =
                        alpha[t * k + r] * trans[r * k + s] * e[(t + 1) * k + s] * beta[(t + 1) * k + s] / scale[t + 1];
                }
            }
            let z: f64 = step.iter().sum();
            for (x, v) in xi.iter_mut().zip(&step) {
                *x += v / z;
            }
        }

        let log_likelihood = scale.iter().map(|c| c.ln()).sum::<f64>() + shift.iter().sum::<f64>();
        SegmentPass {
            log_likelihood,
            gamma,
            xi,
        }
    }

    /// Posterior marginals and log-likelihood of one segment under fixed
    /// parameters.
    pub fn forward_backward(&self, m: &LabelMatrix, seg: &Segment) -> (Vec<f64>, f64) {
        let emissions = Emissions::new(self.k(), &self.lf_votes, &self.theta, &self.phi);
        let pass = self.pass(m, &emissions, seg);
        (pass.gamma, pass.log_likelihood)
    }

    fn e_step(&self, m: &LabelMatrix) -> (f64, Vec<SegmentPass>) {
        let emissions = Emissions::new(self.k(), &self.lf_votes, &self.theta, &self.phi);
        let passes: Vec<SegmentPass> = m
            .segments()
            .par_iter()
            .map(|seg| self.pass(m, &emissions, seg))
            .collect();
        let ll = passes.iter().map(|p| p.log_likelihood).sum();
        (ll, passes)
    }

    fn log_prior(&self) -> f64 {
        emission_log_prior(&self.theta, &self.phi)
            + dirichlet_log_prior(&self.initial)
            + dirichlet_log_prior(&self.transition)
    }

    pub fn log_likelihood(&self, m: &LabelMatrix) -> f64 {
        self.e_step(m).0
    }

    fn m_step(&mut self, m: &LabelMatrix, passes: &[SegmentPass]) {
        let k = self.k();
        let l = self.lf_votes.len();
        let mut stats = EmissionStats::new(k, l);
        let mut first = vec![0.0; k];
        let mut xi = vec![0.0; k * k];
        for (seg, pass) in m.segments().iter().zip(passes) {
            for t in 0..seg.len {
                stats.add(m.row(seg.offset + t), &self.lf_votes, &pass.gamma[t * k..(t + 1) * k]);
            }
            for (f, g) in first.iter_mut().zip(&pass.gamma[..k]) {
                *f += g;
            }
            for (x, v) in xi.iter_mut().zip(&pass.xi) {
                *x += v;
            }
        }
        let (theta, phi) = stats.emission_update(&self.lf_votes);
        self.theta = theta;
        self.phi = phi;
        let docs = m.segments().len() as f64;
        self.initial = first.iter().map(|f| (1.0 + f) / (k as f64 + docs)).collect();
        for r in 0..k {
            let row = &xi[r * k..(r + 1) * k];
            let total: f64 = row.iter().sum();
            for (s, x) in row.iter().enumerate() {
                self.transition[r * k + s] = (1.0 + x) / (k as f64 + total);
            }
        }
    }

    fn check_matrix(&self, m: &LabelMatrix) -> Result<()> {
        if m.lf_votes() != self.lf_votes.as_slice() || m.num_outputs() != self.k() {
            return Err(Error::Invalid(
                "label matrix functions differ from the fitted model".into(),
            ));
        }
        Ok(())
    }
}

fn gather(k: usize, passes: Vec<SegmentPass>) -> Vec<f64> {
    let mut rows = Vec::with_capacity(passes.iter().map(|p| p.gamma.len()).sum::<usize>().max(k));
    for p in passes {
        rows.extend(p.gamma);
    }
    rows
}

impl LabelModel for HmmParams {
    fn name(&self) -> &'static str {
        "hmm"
    }

    fn posterior(&self, m: &LabelMatrix) -> Result<PosteriorMatrix> {
        self.check_matrix(m)?;
        let (_, passes) = self.e_step(m);
        Ok(PosteriorMatrix::new(
            self.k(),
            gather(self.k(), passes),
            m.segments().to_vec(),
        ))
    }

    fn params_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("params serialize")
    }

    fn trace(&self) -> &[f64] {
        &self.trace
    }
}

/// Baum-Welch over the document segments of `m`; returns per-token
/// posterior marginals.
pub fn fit_hmm(m: &LabelMatrix, config: &FitConfig) -> (HmmParams, PosteriorMatrix) {
    let k = m.num_outputs();
    let mut params = HmmParams::initial(k, m.lf_votes(), config);
    let mut converged = false;
    for _ in 0..config.max_iter {
        let (ll, passes) = params.e_step(m);
        let objective = ll + params.log_prior();
        if let Some(&prev) = params.trace.last() {
            if (objective - prev).abs() < config.tol {
                params.trace.push(objective);
                converged = true;
                break;
            }
        }
        params.trace.push(objective);
        params.m_step(m, &passes);
    }
    let (ll, passes) = params.e_step(m);
    if !converged {
        let objective = ll + params.log_prior();
        params.trace.push(objective);
    }
    let posterior = PosteriorMatrix::new(k, gather(k, passes), m.segments().to_vec());
    (params, posterior)
}
