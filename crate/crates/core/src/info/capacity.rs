use serde::{Deserialize, Serialize};

use super::access::{accessible_information_with_start, OptimizerOptions};
use super::{ProbabilityVector, ZERO_PROB};
use crate::ensemble::SignalEnsemble;
use crate::error::{Error, Result};
use crate::pom::{channel_matrix, ChannelMatrix, Pom};

pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub priors: Vec<f64>,
    /// Mutual information at `priors`, in bits.
    pub capacity: f64,
    /// `max_i D(W_i ‖ q) − I` at termination; an upper bound on the remaining gap.
    pub gap: f64,
    pub iterations: usize,
    /// Mutual information at the start of each iteration.
    pub history: Vec<f64>,
}

struct BaRun {
    result: CapacityResult,
    converged: bool,
}

/// Per-row divergences `D(W_i ‖ q)` in bits, for output distribution `q`.
fn divergences(ch: &ChannelMatrix, q: &[f64], out: &mut [f64]) {
    for (i, d) in out.iter_mut().enumerate() {
        *d = ch
            .row(i)
            .iter()
            .zip(q)
            .filter(|(w, _)| **w > ZERO_PROB)
            .map(|(w, qj)| w * (w / qj).log2())
            .sum();
    }
}

fn run_ba(ch: &ChannelMatrix, init: &[f64], tol: f64, max_iter: usize) -> BaRun {
    let rows = ch.rows();
    let mut p = init.to_vec();
    let mut q = vec![0.0; ch.cols()];
    let mut d = vec![0.0; rows];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        q.iter_mut().for_each(|x| *x = 0.0);
        for (i, &pi) in p.iter().enumerate() {
            for (qj, w) in q.iter_mut().zip(ch.row(i)) {
                *qj += pi * w;
            }
        }
        divergences(ch, &q, &mut d);
        let lower: f64 = p.iter().zip(&d).map(|(pi, di)| pi * di).sum::<f64>().max(0.0);
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        history.push(lower);
        let gap = (upper - lower).max(0.0);
        if gap < tol || iterations >= max_iter {
            return BaRun {
                converged: gap < tol,
                result: CapacityResult { priors: p, capacity: lower, gap, iterations, history },
            };
        }
        // p_i ← p_i 2^{D_i} / Z, shifted by the max for stability
        let mut z = 0.0;
        for (pi, di) in p.iter_mut().zip(&d) {
            *pi *= (di - upper).exp2();
            z += *pi;
        }
        p.iter_mut().for_each(|x| *x /= z);
        iterations += 1;
    }
}

/// Blahut–Arimoto from uniform priors with the default iteration cap.
pub fn blahut_arimoto(ch: &ChannelMatrix, tol: f64) -> Result<CapacityResult> {
    blahut_arimoto_from(ch, &ProbabilityVector::uniform(ch.rows()), tol, DEFAULT_MAX_ITER)
}

/// Blahut–Arimoto from `init`. Inputs with zero initial weight stay at zero.
pub fn blahut_arimoto_from(
    ch: &ChannelMatrix,
    init: &ProbabilityVector,
    tol: f64,
    max_iter: usize,
) -> Result<CapacityResult> {
    if init.len() != ch.rows() {
        return Err(Error::DimensionMismatch { expected: ch.rows(), got: init.len() });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParams(format!("tol must be positive, got {tol}")));
    }
    let run = run_ba(ch, init.as_slice(), tol, max_iter);
    if !run.converged {
        return Err(Error::NonConvergence { iterations: run.result.iterations, gap: run.result.gap });
    }
    Ok(run.result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Result {
    pub priors: Vec<f64>,
    pub pom: Pom,
    /// Lower bound on `C₁`, in bits.
    pub bits: f64,
    /// Value after each half-step (POM update, then prior update).
    pub history: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
}

const C1_MAX_ROUNDS: usize = 50;

/// Alternates POM optimization at fixed priors with Blahut–Arimoto at fixed
/// POM, starting from the ensemble's priors. The value sequence is
/// nondecreasing; the result is a lower bound on `C₁`.
pub fn c1_alternating(e: &SignalEnsemble, n: usize, opts: &OptimizerOptions) -> Result<C1Result> {
    let mut priors = e.priors().to_vec();
    let mut pom: Option<Pom> = None;
    let mut value = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    let mut rounds = 0;
    let ba_tol = opts.tol.max(1e-12);
    while rounds < C1_MAX_ROUNDS {
        rounds += 1;
        let current = e.with_priors(priors.clone())?;
        let acc = accessible_information_with_start(&current, n, opts, pom.as_ref())?;
        history.push(acc.mutual_info);
        let ch = channel_matrix(e, &acc.pom)?;
        let init = ProbabilityVector::new(priors.clone())?;
        let ba = run_ba(&ch, init.as_slice(), ba_tol, DEFAULT_MAX_ITER);
        // BA never lowers the value below its starting point, but guard
        // against rounding so the sequence stays monotone.
        let (new_priors, new_value) = if ba.result.capacity >= acc.mutual_info {
            (ba.result.priors, ba.result.capacity)
        } else {
            (priors.clone(), acc.mutual_info)
        };
        history.push(new_value);
        pom = Some(acc.pom);
        priors = new_priors;
        let gain = new_value - value;
        value = new_value;
        if gain < opts.tol && acc.converged && ba.converged {
            converged = true;
            break;
        }
    }
    Ok(C1Result {
        priors,
        pom: pom.expect("at least one round"),
        bits: value,
        history,
        rounds,
        converged,
    })
}
