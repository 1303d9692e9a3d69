//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spanwise_core::labelmodel::{HmmParams, LabelMatrix, Segment, Vote};

/// Random matrix with `2..=max_k` outputs, `1..=max_l` functions and random
/// document boundaries.
pub fn random_matrix(rng: &mut ChaCha8Rng, max_n: usize, max_l: usize, max_k: usize, max_seg: usize) -> LabelMatrix {
    let k = rng.gen_range(2..=max_k);
    let l = rng.gen_range(1..=max_l);
    let n = rng.gen_range(1..=max_n);
    let lf_votes: Vec<usize> = (0..l).map(|_| rng.gen_range(0..k)).collect();
    let density: f64 = rng.gen_range(0.05..0.8);
    let votes: Vec<Vote> = (0..n * l)
        .map(|idx| rng.gen_bool(density).then_some(lf_votes[idx % l] as u16))
        .collect();
    let mut segments = Vec::new();
    let mut offset = 0;
    while offset < n {
        let len = rng.gen_range(1..=max_seg).min(n - offset);
        segments.push(Segment {
            doc_id: format!("d{:03}", segments.len()),
            offset,
            len,
        });
        offset += len;
    }
    LabelMatrix::new(k, lf_votes, votes, segments).unwrap()
}

/// Empirical vote distribution per token; all-abstain rows go to `O`.
pub fn majority_oracle(m: &LabelMatrix) -> Vec<Vec<f64>> {
    let k = m.num_outputs();
    (0..m.num_tokens())
        .map(|i| {
            let mut counts = vec![0u32; k];
            for j in 0..m.num_functions() {
                if let Some(v) = m.get(i, j) {
                    counts[v as usize] += 1;
                }
            }
            let total: u32 = counts.iter().sum();
            if total == 0 {
                let mut row = vec![0.0; k];
                row[k - 1] = 1.0;
                row
            } else {
                counts.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect()
}

/// `P(row | y)` straight from the definition.
pub fn emission(row: &[Vote], lf_votes: &[usize], theta: &[f64], phi: &[f64], y: usize) -> f64 {
    row.iter()
        .enumerate()
        .map(|(j, v)| {
            let (hit, miss) = if y == lf_votes[j] {
                (theta[j], 1.0 - theta[j])
            } else {
                (phi[j], 1.0 - phi[j])
            };
            if v.is_some() {
                hit
            } else {
                miss
            }
        })
        .product()
}

/// Posterior marginals and log-likelihood of one segment by summing over
/// every state sequence.
pub fn enumerate_hmm(params: &HmmParams, m: &LabelMatrix, seg: &Segment) -> (Vec<f64>, f64) {
    let k = params.initial.len();
    let len = seg.len;
    let mut marginals = vec![0.0; len * k];
    let mut total = 0.0;
    let mut states = vec![0usize; len];
    loop {
        let mut w = params.initial[states[0]];
        for t in 0..len {
            if t > 0 {
                w *= params.transition[states[t - 1] * k + states[t]];
            }
            w *= emission(
                m.row(seg.offset + t),
                &params.lf_votes,
                &params.theta,
                &params.phi,
                states[t],
            );
        }
        total += w;
        for t in 0..len {
            marginals[t * k + states[t]] += w;
        }
        // odometer increment
        let mut t = 0;
        loop {
            if t == len {
                for x in &mut marginals {
                    *x /= total;
                }
                return (marginals, total.ln());
            }
            states[t] += 1;
            if states[t] < k {
                break;
            }
            states[t] = 0;
            t += 1;
        }
    }
}

pub fn random_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

/// Tokens drawn from the generative model with known parameters, in
/// documents of `doc_len` tokens. Returns the matrix and the true labels.
pub fn sample_generative(
    seed: u64,
    prior: &[f64],
    lf_votes: &[usize],
    theta: f64,
    phi: f64,
    n: usize,
    doc_len: usize,
) -> (LabelMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = prior.len();
    let l = lf_votes.len();
    let mut votes = Vec::with_capacity(n * l);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u: f64 = rng.gen();
        let mut y = k - 1;
        for (c, p) in prior.iter().enumerate() {
            if u < *p {
                y = c;
                break;
            }
            u -= p;
        }
        truth.push(y);
        for &c in lf_votes {
            let p = if c == y { theta } else { phi };
            votes.push(rng.gen_bool(p).then_some(c as u16));
        }
    }
    let segments = (0..n.div_ceil(doc_len))
        .map(|d| Segment {
            doc_id: format!("g{d:05}"),
            offset: d * doc_len,
            len: doc_len.min(n - d * doc_len),
        })
        .collect();
    (LabelMatrix::new(k, lf_votes.to_vec(), votes, segments).unwrap(), truth)
}

/// Largest single-step decrease in a trace (0 when non-decreasing).
pub fn worst_decrease(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}
