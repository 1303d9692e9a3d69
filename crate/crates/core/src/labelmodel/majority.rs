use crate::error::Result;

use super::{LabelMatrix, LabelModel, PosteriorMatrix};

/// Empirical distribution of non-abstaining votes per token. Tokens where
/// every function abstains get all their mass on `O`.
pub fn fit_majority(m: &LabelMatrix) -> PosteriorMatrix {
    let k = m.num_outputs();
    let outside = k - 1;
    let n = m.num_tokens();
    let mut probs = vec![0.0; n * k];
    for i in 0..n {
        let row = &mut probs[i * k..(i + 1) * k];
        let mut total = 0u32;
        for v in m.row(i).iter().flatten() {
            row[usize::from(*v)] += 1.0;
            total += 1;
        }
        if total == 0 {
            row[outside] = 1.0;
        } else {
            let total = f64::from(total);
            row.iter_mut().for_each(|p| *p /= total);
        }
    }
    PosteriorMatrix::new(k, probs, m.segments().to_vec())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MajorityVoter;

impl LabelModel for MajorityVoter {
    fn name(&self) -> &'static str {
        "majority"
    }

    fn posterior(&self, m: &LabelMatrix) -> Result<PosteriorMatrix> {
        Ok(fit_majority(m))
    }

    fn params_json(&self) -> serde_json::Value {
        serde_json::json!({})
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_counting() {
        // Chem=0, Dis=1, O=2
        let m = LabelMatrix::single_segment(3, vec![0, 0, 1, 0], vec![Some(0), Some(0), Some(1), None]).unwrap();
        let p = fit_majority(&m);
        assert_eq!(p.row(0), &[2.0 / 3.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn all_abstain_goes_to_outside() {
        let m = LabelMatrix::single_segment(3, vec![0, 1], vec![None, None]).unwrap();
        assert_eq!(fit_majority(&m).row(0), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn outside_votes_count() {
        let m = LabelMatrix::single_segment(2, vec![0, 1], vec![Some(0), Some(1)]).unwrap();
        assert_eq!(fit_majority(&m).row(0), &[0.5, 0.5]);
    }
}
