//! Multi-start maximization of mutual information over rank-one POMs.
//!
//! A POM with `N` rank-one elements `w_j |φ_j⟩⟨φ_j|` is stored as the
//! columns `v_j = √w_j (cos φ_j, sin φ_j)` of a 2×N matrix `V`. The three
//! real completeness constraints `Σ w_j cos²φ_j = 1`, `Σ w_j sin²φ_j = 1`,
//! `Σ w_j cos φ_j sin φ_j = 0` are exactly `V Vᵀ = I`. An arbitrary `V` is
//! projected onto that set by the polar factor `(V Vᵀ)^{-1/2} V`, and right
//! multiplication by a Givens rotation in `R^N` keeps it there.
//!
//! Each start runs projected gradient ascent with backtracking, then a
//! coordinate search over Givens planes that handles the non-smooth maxima
//! at zero channel entries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mi_flat, ZERO_PROB};
use super::von_neumann::golden_section_max;
use crate::ensemble::SignalEnsemble;
use crate::error::{Error, Result};
use crate::pom::{validate_pom, Pom, PomElement};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// Improvement threshold, in bits, for a full local-search round.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Iteration cap for each local phase of each start.
    pub max_iter: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions { tol: 1e-12, restarts: 32, seed: 0, max_iter: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub pom: Pom,
    pub mutual_info: f64,
    /// Gradient steps plus coordinate rounds of the winning start.
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning start; `restarts` denotes the warm start.
    pub best_start: usize,
}

type Frame = Vec<[f64; 2]>;

struct Problem<'a> {
    psi: Vec<[f64; 2]>,
    priors: &'a [f64],
    n: usize,
}

impl Problem<'_> {
    fn fill_channel(&self, v: &Frame, buf: &mut Vec<f64>) {
        buf.clear();
        for p in &self.psi {
            for c in v {
                let d = p[0] * c[0] + p[1] * c[1];
                buf.push(d * d);
            }
        }
    }

    fn value(&self, v: &Frame, buf: &mut Vec<f64>) -> f64 {
        self.fill_channel(v, buf);
        mi_flat(buf, self.n, self.priors)
    }

    /// Euclidean gradient of the mutual information with respect to `V`.
    ///
    /// `∂I/∂P_ij = p_i log₂(P_ij / q_j)` and `∂P_ij/∂v_j = 2 (ψ_i·v_j) ψ_i`.
    fn gradient(&self, v: &Frame, buf: &mut Vec<f64>) -> Frame {
        self.fill_channel(v, buf);
        let mut q = vec![0.0; self.n];
        for (row, &p) in buf.chunks_exact(self.n).zip(self.priors) {
            for (qj, w) in q.iter_mut().zip(row) {
                *qj += p * w;
            }
        }
        let mut g = vec![[0.0; 2]; self.n];
        for ((row, psi), &p) in buf.chunks_exact(self.n).zip(&self.psi).zip(self.priors) {
            for j in 0..self.n {
                if row[j] <= ZERO_PROB || q[j] <= ZERO_PROB {
                    continue;
                }
                let d = psi[0] * v[j][0] + psi[1] * v[j][1];
                let k = 2.0 * p * (row[j] / q[j]).log2() * d;
                g[j][0] += k * psi[0];
                g[j][1] += k * psi[1];
            }
        }
        g
    }
}

/// Polar projection `V ← (V Vᵀ)^{-1/2} V`; `None` if `V Vᵀ` is near singular.
fn project(v: &Frame) -> Option<Frame> {
    let (mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0);
    for c in v {
        sa += c[0] * c[0];
        sb += c[0] * c[1];
        sc += c[1] * c[1];
    }
    let det = sa * sc - sb * sb;
    let scale = (sa + sc).max(f64::MIN_POSITIVE);
    if det.is_nan() || det <= 1e-12 * scale * scale {
        return None;
    }
    // sqrt of a 2x2 SPD matrix: (S + √det I) / √(tr S + 2√det)
    let sd = det.sqrt();
    let t = (sa + sc + 2.0 * sd).sqrt();
    let (ra, rb, rc) = ((sa + sd) / t, sb / t, (sc + sd) / t);
    let rdet = ra * rc - rb * rb;
    let (ia, ib, ic) = (rc / rdet, -rb / rdet, ra / rdet);
    Some(v.iter().map(|c| [ia * c[0] + ib * c[1], ib * c[0] + ic * c[1]]).collect())
}

fn givens(v: &Frame, j: usize, k: usize, alpha: f64) -> Frame {
    let (s, c) = alpha.sin_cos();
    let mut out = v.clone();
    out[j] = [c * v[j][0] - s * v[k][0], c * v[j][1] - s * v[k][1]];
    out[k] = [s * v[j][0] + c * v[k][0], s * v[j][1] + c * v[k][1]];
    out
}

fn random_frame(n: usize, seed: u64, stream: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    loop {
        let v: Frame = (0..n)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        if let Some(p) = project(&v) {
            return p;
        }
    }
}

fn frame_from_pom(p: &Pom) -> Option<Frame> {
    let v: Frame = p
        .elements()
        .iter()
        .map(|e| {
            let x = e.a.max(0.0).sqrt();
            let y = e.c.max(0.0).sqrt();
            [x, if e.b < 0.0 { -y } else { y }]
        })
        .collect();
    project(&v)
}

struct LocalOutcome {
    frame: Frame,
    value: f64,
    iterations: usize,
    converged: bool,
}

const GIVENS_BRACKET: f64 = 0.3;

fn local_search(prob: &Problem<'_>, start: Frame, opts: &OptimizerOptions) -> LocalOutcome {
    let mut buf = Vec::with_capacity(prob.psi.len() * prob.n);
    let mut v = start;
    let mut f = prob.value(&v, &mut buf);
    let mut iterations = 0;

    // Projected gradient ascent with backtracking.
    let mut step = 0.5;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let g = prob.gradient(&v, &mut buf);
        let mut t = step * 2.0;
        let mut accepted = None;
        while t > 1e-14 {
            let trial: Frame = v
                .iter()
                .zip(&g)
                .map(|(c, d)| [c[0] + t * d[0], c[1] + t * d[1]])
                .collect();
            if let Some(pv) = project(&trial) {
                let ft = prob.value(&pv, &mut buf);
                if ft > f {
                    accepted = Some((pv, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((pv, ft)) => {
                let gain = ft - f;
                v = pv;
                f = ft;
                step = t;
                if gain < opts.tol {
                    break;
                }
            }
            None => break,
        }
    }

    // Coordinate rounds over Givens planes.
    let mut converged = false;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let before = f;
        for j in 0..prob.n {
            for k in j + 1..prob.n {
                let (alpha, fa) = golden_section_max(
                    |a| prob.value(&givens(&v, j, k, a), &mut buf),
                    -GIVENS_BRACKET,
                    GIVENS_BRACKET,
                    1e-12,
                );
                if fa > f {
                    v = givens(&v, j, k, alpha);
                    f = fa;
                }
            }
        }
        if f - before < opts.tol {
            converged = true;
            break;
        }
    }
    if let Some(pv) = project(&v) {
        v = pv;
        f = prob.value(&v, &mut buf);
    }
    LocalOutcome { frame: v, value: f, iterations, converged }
}

fn frame_to_pom(v: &Frame) -> Pom {
    Pom::from_elements(v.iter().map(|c| PomElement::outer(c[0], c[1])).collect())
}

/// Maximizes mutual information over `n`-outcome rank-one POMs for the
/// ensemble's states and priors.
pub fn accessible_information(e: &SignalEnsemble, n: usize, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    accessible_information_with_start(e, n, opts, None)
}

/// As [`accessible_information`], adding `warm` (if it has `n` elements) as
/// one extra start.
pub fn accessible_information_with_start(
    e: &SignalEnsemble,
    n: usize,
    opts: &OptimizerOptions,
    warm: Option<&Pom>,
) -> Result<OptimizationResult> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidN(n));
    }
    if opts.restarts == 0 && warm.is_none() {
        return Err(Error::InvalidParams("restarts must be at least 1".into()));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParams(format!("tol must be positive, got {}", opts.tol)));
    }
    let prob = Problem {
        psi: e.states().map(|q| q.vector()).collect(),
        priors: e.priors(),
        n,
    };
    let mut starts: Vec<(usize, Frame)> = (0..opts.restarts)
        .map(|s| (s, random_frame(n, opts.seed, s as u64)))
        .collect();
    if let Some(f) = warm.filter(|p| p.len() == n).and_then(frame_from_pom) {
        starts.push((opts.restarts, f));
    }
    let outcomes: Vec<(usize, LocalOutcome)> = starts
        .into_par_iter()
        .map(|(idx, f)| (idx, local_search(&prob, f, opts)))
        .collect();
    // Highest value wins; ties go to the lower start index.
    let (best_start, best) = outcomes
        .into_iter()
        .reduce(|a, b| {
            if b.1.value > a.1.value || (b.1.value == a.1.value && b.0 < a.0) {
                b
            } else {
                a
            }
        })
        .expect("at least one start");
    let pom = frame_to_pom(&best.frame);
    let report = validate_pom(&pom);
    if !report.passed {
        return Err(Error::InvalidPom(format!(
            "optimizer iterate failed validation (completeness residual {:e})",
            report.completeness_residual
        )));
    }
    Ok(OptimizationResult {
        pom,
        mutual_info: best.value.max(0.0),
        iterations: best.iterations,
        converged: best.converged,
        best_start,
    })
}
