//! Real symmetric qubit signal sets.
//!
//! A real qubit is a linear polarization `cos θ |H⟩ + sin θ |V⟩`. Rays are
//! π-periodic, so angles are stored in `[0, π)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIOR_SUM_TOL: f64 = 1e-9;

/// A linear polarization state with its angle stored canonically in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct RealQubit {
    theta: f64,
}

impl RealQubit {
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        // rem_euclid can round up to exactly π for tiny negative inputs.
        if t >= PI {
            t = 0.0;
        }
        RealQubit { theta: t }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Unit vector `(cos θ, sin θ)` in the `{|H⟩, |V⟩}` basis.
    pub fn vector(&self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [c, s]
    }

    pub fn rotated(&self, delta: f64) -> Self {
        RealQubit::new(self.theta + delta)
    }

    /// Distance between two rays, in `[0, π/2]`.
    pub fn ray_distance(&self, other: &RealQubit) -> f64 {
        let d = (self.theta - other.theta).rem_euclid(PI);
        d.min(PI - d)
    }
}

impl From<f64> for RealQubit {
    fn from(theta: f64) -> Self {
        RealQubit::new(theta)
    }
}

impl From<RealQubit> for f64 {
    fn from(q: RealQubit) -> f64 {
        q.theta
    }
}

/// Inner product `cos(θ_a − θ_b)` of the canonical vector forms.
pub fn overlap(a: &RealQubit, b: &RealQubit) -> f64 {
    (a.theta - b.theta).cos()
}

/// `M` letter states at angles `iπ/M + θ₀` with prior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRecord", into = "EnsembleRecord")]
pub struct SignalEnsemble {
    size: usize,
    theta0: f64,
    priors: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleRecord {
    #[serde(rename = "M")]
    size: usize,
    #[serde(default)]
    theta0: f64,
    #[serde(default)]
    priors: Option<Vec<f64>>,
}

impl TryFrom<EnsembleRecord> for SignalEnsemble {
    type Error = Error;

    fn try_from(r: EnsembleRecord) -> Result<Self> {
        make_signal_set(r.size, r.theta0, r.priors)
    }
}

impl From<SignalEnsemble> for EnsembleRecord {
    fn from(e: SignalEnsemble) -> Self {
        EnsembleRecord {
            size: e.size,
            theta0: e.theta0,
            priors: Some(e.priors),
        }
    }
}

/// Builds the symmetric set of `size` letter states rotated by `theta0`.
///
/// Priors default to uniform `1/M`.
pub fn make_signal_set(size: usize, theta0: f64, priors: Option<Vec<f64>>) -> Result<SignalEnsemble> {
    if size < 2 {
        return Err(Error::InvalidM(format!("need M >= 2, got {size}")));
    }
    if !theta0.is_finite() {
        return Err(Error::InvalidParams(format!("theta0 must be finite, got {theta0}")));
    }
    let priors = match priors {
        None => vec![1.0 / size as f64; size],
        Some(p) => {
            check_priors(&p, size)?;
            p
        }
    };
    Ok(SignalEnsemble { size, theta0, priors })
}

fn check_priors(p: &[f64], size: usize) -> Result<()> {
    if p.len() != size {
        return Err(Error::InvalidPriors(format!(
            "expected {size} entries, got {}",
            p.len()
        )));
    }
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidPriors(format!("entry {x} is not a nonnegative number")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PRIOR_SUM_TOL {
        return Err(Error::InvalidPriors(format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

impl SignalEnsemble {
    /// Number of letters `M`.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Uncanonicalized angle `iπ/M + θ₀` of letter `i`.
    pub fn raw_angle(&self, i: usize) -> f64 {
        i as f64 * PI / self.size as f64 + self.theta0
    }

    pub fn state(&self, i: usize) -> Result<RealQubit> {
        if i >= self.size {
            return Err(Error::IndexOutOfRange { index: i, len: self.size });
        }
        Ok(RealQubit::new(self.raw_angle(i)))
    }

    pub fn states(&self) -> impl Iterator<Item = RealQubit> + '_ {
        (0..self.size).map(move |i| RealQubit::new(self.raw_angle(i)))
    }

    /// Same states with a different prior vector.
    pub fn with_priors(&self, priors: Vec<f64>) -> Result<SignalEnsemble> {
        make_signal_set(self.size, self.theta0, Some(priors))
    }

    /// Same letters and priors, offset angle replaced.
    pub fn with_offset(&self, theta0: f64) -> Result<SignalEnsemble> {
        make_signal_set(self.size, theta0, Some(self.priors.clone()))
    }
}

/// Letter state `i` of the ensemble.
pub fn state_vector(e: &SignalEnsemble, i: usize) -> Result<RealQubit> {
    e.state(i)
}
