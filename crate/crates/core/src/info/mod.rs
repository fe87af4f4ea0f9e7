//! Shannon quantities of classical-quantum channels, accessible information
//! and capacity.
//!
//! Logarithms are base 2 and `0 · log 0 = 0`. Probabilities below
//! [`ZERO_PROB`] are treated as exact zeros inside logarithms.

mod access;
mod capacity;
mod von_neumann;

pub use access::{
    accessible_information, accessible_information_with_start, OptimizationResult, OptimizerOptions,
};
pub use capacity::{
    blahut_arimoto, blahut_arimoto_from, c1_alternating, C1Result, CapacityResult, DEFAULT_MAX_ITER,
};
pub use von_neumann::{best_von_neumann, VonNeumannResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pom::ChannelMatrix;

pub const ZERO_PROB: f64 = 1e-15;
const SUM_TOL: f64 = 1e-9;

/// Nonnegative entries summing to one within `1e-9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Entries in `[-1e-12, 0)` are clamped to zero.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        let mut entries = entries;
        for x in entries.iter_mut() {
            if !x.is_finite() || *x < -1e-12 {
                return Err(Error::InvalidDistribution(format!("entry {x} is negative or not finite")));
            }
            *x = x.max(0.0);
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(ProbabilityVector(entries))
    }

    pub fn uniform(n: usize) -> Self {
        ProbabilityVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbabilityVector::new(v)
    }
}

impl TryFrom<&[f64]> for ProbabilityVector {
    type Error = Error;

    fn try_from(v: &[f64]) -> Result<Self> {
        ProbabilityVector::new(v.to_vec())
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

#[inline]
fn plogp(p: f64) -> f64 {
    if p <= ZERO_PROB {
        0.0
    } else {
        p * p.log2()
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &ProbabilityVector) -> f64 {
    let h = -p.0.iter().map(|&x| plogp(x)).sum::<f64>();
    h.max(0.0)
}

fn check_rows(ch: &ChannelMatrix, priors: &ProbabilityVector) -> Result<()> {
    if priors.len() != ch.rows() {
        return Err(Error::DimensionMismatch { expected: ch.rows(), got: priors.len() });
    }
    Ok(())
}

fn output_probs(ch: &ChannelMatrix, priors: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; ch.cols()];
    for (i, &p) in priors.iter().enumerate() {
        for (qj, w) in q.iter_mut().zip(ch.row(i)) {
            *qj += p * w;
        }
    }
    q
}

/// `P(y_j) = Σ_i P(y_j|x_i) P(x_i)`.
pub fn output_distribution(ch: &ChannelMatrix, priors: &ProbabilityVector) -> Result<ProbabilityVector> {
    check_rows(ch, priors)?;
    ProbabilityVector::new(output_probs(ch, &priors.0))
}

/// Bayes posterior `P(x_i | y_j)`.
pub fn posterior(ch: &ChannelMatrix, priors: &ProbabilityVector, j: usize) -> Result<ProbabilityVector> {
    check_rows(ch, priors)?;
    if j >= ch.cols() {
        return Err(Error::IndexOutOfRange { index: j, len: ch.cols() });
    }
    let joint: Vec<f64> = priors.0.iter().enumerate().map(|(i, p)| p * ch.get(i, j)).collect();
    let qj: f64 = joint.iter().sum();
    if qj <= ZERO_PROB {
        return Err(Error::ZeroProbabilityOutput(j));
    }
    ProbabilityVector::new(joint.into_iter().map(|x| x / qj).collect())
}

/// `H(X|Y)`, with zero-probability outputs contributing nothing.
pub fn conditional_entropy(ch: &ChannelMatrix, priors: &ProbabilityVector) -> Result<f64> {
    check_rows(ch, priors)?;
    let q = output_probs(ch, &priors.0);
    let mut h = 0.0;
    for (j, &qj) in q.iter().enumerate() {
        if qj <= ZERO_PROB {
            continue;
        }
        let hj: f64 = -priors
            .0
            .iter()
            .enumerate()
            .map(|(i, p)| plogp(p * ch.get(i, j) / qj))
            .sum::<f64>();
        h += qj * hj;
    }
    Ok(h.max(0.0))
}

/// `I(X:Y) = H(X) − H(X|Y)`, clamped at zero.
pub fn mutual_information(ch: &ChannelMatrix, priors: &ProbabilityVector) -> Result<f64> {
    let hxy = conditional_entropy(ch, priors)?;
    Ok((entropy(priors) - hxy).max(0.0))
}

/// The double sum `Σ_ij P(x_i) P(y_j|x_i) log₂(P(y_j|x_i)/P(y_j))`.
pub fn mutual_information_direct(ch: &ChannelMatrix, priors: &ProbabilityVector) -> Result<f64> {
    check_rows(ch, priors)?;
    Ok(mi_flat(ch.as_slice(), ch.cols(), &priors.0))
}

/// Double-sum mutual information on a row-major slice; used in hot loops.
pub(crate) fn mi_flat(data: &[f64], cols: usize, priors: &[f64]) -> f64 {
    let mut q = [0.0f64; 16];
    let mut q_heap;
    let q: &mut [f64] = if cols <= q.len() {
        &mut q[..cols]
    } else {
        q_heap = vec![0.0; cols];
        &mut q_heap
    };
    for (row, &p) in data.chunks_exact(cols).zip(priors) {
        for (qj, w) in q.iter_mut().zip(row) {
            *qj += p * w;
        }
    }
    let mut total = 0.0;
    for (row, &p) in data.chunks_exact(cols).zip(priors) {
        if p <= 0.0 {
            continue;
        }
        for (&w, &qj) in row.iter().zip(q.iter()) {
            if w > ZERO_PROB {
                total += p * w * (w / qj).log2();
            }
        }
    }
    total.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn trine_channel() -> ChannelMatrix {
        ChannelMatrix::from_rows(vec![
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap()
    }

    // quinary Davies channel, signal-major rows, rounded to 3 decimals
    fn quinary_channel() -> ChannelMatrix {
        ChannelMatrix::from_rows(vec![
            vec![0.0, 0.5, 0.5],
            vec![0.309, 0.191, 0.5],
            vec![0.809, 0.0, 0.191],
            vec![0.809, 0.191, 0.0],
            vec![0.309, 0.5, 0.191],
        ])
        .unwrap()
    }

    fn flat_channel() -> ChannelMatrix {
        ChannelMatrix::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&pv(&[1.0, 0.0])), 0.0);
        assert_abs_diff_eq!(entropy(&pv(&[0.5, 0.5])), 1.0);
        assert_abs_diff_eq!(entropy(&pv(&[1.0 / 3.0; 3])), 3f64.log2(), epsilon = 1e-15);
    }

    #[test]
    fn zero_log_zero() {
        assert_eq!(plogp(0.0), 0.0);
        assert_eq!(plogp(1e-16), 0.0);
        assert_abs_diff_eq!(entropy(&pv(&[0.0, 0.5, 0.0, 0.5])), 1.0);
    }

    #[test]
    fn invalid_distributions() {
        assert!(ProbabilityVector::new(vec![]).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.4]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbabilityVector::new(vec![f64::NAN, 1.0]).is_err());
        assert_eq!(ProbabilityVector::new(vec![1.0 + 1e-13, -1e-13]).unwrap().as_slice(), &[1.0 + 1e-13, 0.0]);
    }

    #[test]
    fn output_distribution_examples() {
        let q = output_distribution(&trine_channel(), &ProbabilityVector::uniform(3)).unwrap();
        for x in q.as_slice() {
            assert_abs_diff_eq!(*x, 1.0 / 3.0, epsilon = 1e-15);
        }
        let q2 = output_distribution(&quinary_channel(), &ProbabilityVector::uniform(5)).unwrap();
        for (got, want) in q2.as_slice().iter().zip([0.4472, 0.2764, 0.2764]) {
            assert_abs_diff_eq!(*got, want, epsilon = 5e-4);
        }
        let q3 = output_distribution(&ChannelMatrix::identity(2), &pv(&[0.3, 0.7])).unwrap();
        assert_eq!(q3.as_slice(), &[0.3, 0.7]);
        assert!(matches!(
            output_distribution(&trine_channel(), &ProbabilityVector::uniform(2)),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn posterior_examples() {
        let post = posterior(&trine_channel(), &ProbabilityVector::uniform(3), 0).unwrap();
        assert_eq!(post.as_slice(), &[0.0, 0.5, 0.5]);
        let id = posterior(&ChannelMatrix::identity(3), &ProbabilityVector::uniform(3), 0).unwrap();
        assert_eq!(id.as_slice(), &[1.0, 0.0, 0.0]);
        let pri = pv(&[0.2, 0.8]);
        for j in 0..2 {
            let p = posterior(&flat_channel(), &pri, j).unwrap();
            assert_abs_diff_eq!(p.as_slice()[0], 0.2, epsilon = 1e-15);
            assert_abs_diff_eq!(p.as_slice()[1], 0.8, epsilon = 1e-15);
        }
        let dead = ChannelMatrix::from_rows(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(posterior(&dead, &pri, 1), Err(Error::ZeroProbabilityOutput(1)));
    }

    #[test]
    fn conditional_entropy_examples() {
        let u2 = ProbabilityVector::uniform(2);
        assert_eq!(conditional_entropy(&ChannelMatrix::identity(2), &u2).unwrap(), 0.0);
        let flat = ChannelMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(conditional_entropy(&flat, &u2).unwrap(), 1.0);
        assert_abs_diff_eq!(
            conditional_entropy(&trine_channel(), &ProbabilityVector::uniform(3)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn mutual_information_examples() {
        let u3 = ProbabilityVector::uniform(3);
        assert_abs_diff_eq!(mutual_information(&trine_channel(), &u3).unwrap(), 3f64.log2() - 1.0, epsilon = 1e-12);
        let i5 = mutual_information(&quinary_channel(), &ProbabilityVector::uniform(5)).unwrap();
        assert!((i5 - 0.471).abs() < 0.005, "{i5}");
        assert_eq!(mutual_information(&flat_channel(), &pv(&[0.4, 0.6])).unwrap(), 0.0);
    }

    fn random_channel(raw: &[f64], rows: usize, cols: usize) -> ChannelMatrix {
        let rows_v = raw
            .chunks(cols)
            .take(rows)
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|x| x / s).collect()
            })
            .collect();
        ChannelMatrix::from_rows(rows_v).unwrap()
    }

    fn random_priors(raw: &[f64]) -> ProbabilityVector {
        let s: f64 = raw.iter().sum();
        ProbabilityVector::new(raw.iter().map(|x| x / s).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn two_forms_agree(raw in prop::collection::vec(0.01f64..1.0, 12), pr in prop::collection::vec(0.01f64..1.0, 3)) {
            let ch = random_channel(&raw, 3, 4);
            let p = random_priors(&pr);
            let a = mutual_information(&ch, &p).unwrap();
            let b = mutual_information_direct(&ch, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
            prop_assert!(a >= 0.0);
            let hy = entropy(&output_distribution(&ch, &p).unwrap());
            prop_assert!(a <= entropy(&p).min(hy) + 1e-12);
        }

        #[test]
        fn zero_iff_rows_equal(raw in prop::collection::vec(0.01f64..1.0, 9), pr in prop::collection::vec(0.01f64..1.0, 3)) {
            let p = random_priors(&pr);
            let equal_rows: Vec<f64> = raw[..3].iter().cycle().take(9).copied().collect();
            let same = random_channel(&equal_rows, 3, 3);
            prop_assert!(mutual_information(&same, &p).unwrap() < 1e-12);
            let ch = random_channel(&raw, 3, 3);
            let spread = (0..3).flat_map(|j| (0..3).map(move |i| (i, j)))
                .map(|(i, j)| (ch.get(i, j) - ch.get(0, j)).abs())
                .fold(0.0, f64::max);
            prop_assume!(spread > 1e-3);
            prop_assert!(mutual_information(&ch, &p).unwrap() > 0.0);
        }

        #[test]
        fn merging_outputs_never_helps(raw in prop::collection::vec(0.01f64..1.0, 12), pr in prop::collection::vec(0.01f64..1.0, 3), a in 0usize..4, b in 0usize..4) {
            prop_assume!(a != b);
            let ch = random_channel(&raw, 3, 4);
            let p = random_priors(&pr);
            let merged_rows: Vec<Vec<f64>> = (0..3).map(|i| {
                let mut r: Vec<f64> = Vec::new();
                for j in 0..4 {
                    if j == b { continue; }
                    r.push(if j == a { ch.get(i, a) + ch.get(i, b) } else { ch.get(i, j) });
                }
                r
            }).collect();
            let merged = ChannelMatrix::from_rows(merged_rows).unwrap();
            prop_assert!(mutual_information(&merged, &p).unwrap() <= mutual_information(&ch, &p).unwrap() + 1e-12);
        }
    }
}
