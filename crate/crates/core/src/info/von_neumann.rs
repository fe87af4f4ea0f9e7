use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::mi_flat;
use crate::ensemble::SignalEnsemble;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Best two-outcome projective measurement found by the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonNeumannResult {
    pub phi: f64,
    pub bits: f64,
}

/// Maximizes `f` on `[lo, hi]` by golden-section search until the bracket is
/// narrower than `tol`. Returns the best point seen and its value.
pub(crate) fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn projective_mi(e: &SignalEnsemble, phi: f64, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    for i in 0..e.len() {
        let c = (e.raw_angle(i) - phi).cos().powi(2);
        buf.push(c);
        buf.push(1.0 - c);
    }
    mi_flat(buf, 2, e.priors())
}

/// Scans `grid` equally spaced angles in `[0, π)` for the projector pair
/// `{φ, φ + π/2}`, then refines around the best cell by golden-section
/// search to `1e-8` in `φ`.
pub fn best_von_neumann(e: &SignalEnsemble, grid: usize) -> VonNeumannResult {
    let grid = grid.max(1);
    let h = PI / grid as f64;
    let mut buf = Vec::with_capacity(2 * e.len());
    let (mut best_phi, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 0..grid {
        let phi = k as f64 * h;
        let v = projective_mi(e, phi, &mut buf);
        if v > best {
            best = v;
            best_phi = phi;
        }
    }
    let (phi, v) = golden_section_max(|p| projective_mi(e, p, &mut buf), best_phi - h, best_phi + h, 1e-8);
    if v > best {
        best = v;
        best_phi = phi;
    }
    VonNeumannResult { phi: best_phi.rem_euclid(PI), bits: best }
}
