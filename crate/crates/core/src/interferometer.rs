//! Polarization Mach–Zehnder detector.
//!
//! Path `a` carries the signal, path `b` starts in vacuum. The interferometer
//! rotates the `(A_V, B_H)` pair by `γ/2`; `B_H` goes to Port 0, while `A_H`
//! and `A_V` are mixed by a half-wave plate at π/8 and a PBS into Ports 1
//! and 2. Port `j` realizes POM element `ω_j`.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::ensemble::{RealQubit, SignalEnsemble};
use crate::error::{Error, Result};
use crate::pom::{gamma, ChannelMatrix};

/// Mixing-plate setting for a given `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MzSetting {
    pub gamma: f64,
    /// Half-wave plate angle; rotating polarization by `γ/2` needs `γ/4`.
    pub hwp1_angle: f64,
}

impl MzSetting {
    pub fn new(gamma: f64) -> Self {
        MzSetting { gamma, hwp1_angle: gamma / 4.0 }
    }

    /// Setting that realizes the three-outcome POM for `(M, m)`.
    pub fn for_design(size: usize, m: i64) -> Result<Self> {
        Ok(MzSetting::new(gamma(size, m)?))
    }
}

/// 4×4 orthogonal map on `(A_H, A_V, B_H, B_V)`.
pub fn mz_unitary(gamma: f64) -> [[f64; 4]; 4] {
    let (s, c) = (gamma / 2.0).sin_cos();
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, s, 0.0],
        [0.0, -s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Max-norm distance of `U Uᵀ` from the identity.
pub fn orthogonality_residual(u: &[[f64; 4]; 4]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let dot: f64 = (0..4).map(|k| u[i][k] * u[j][k]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - want).abs());
        }
    }
    worst
}

fn apply(u: &[[f64; 4]; 4], x: [f64; 4]) -> [f64; 4] {
    let mut y = [0.0; 4];
    for (yi, row) in y.iter_mut().zip(u) {
        *yi = row.iter().zip(&x).map(|(a, b)| a * b).sum();
    }
    y
}

/// Output amplitudes `(b0, b1, b2)` at Ports 0, 1, 2 for a signal in path `a`
/// and vacuum in path `b`.
pub fn port_amplitudes(input: &RealQubit, gamma: f64) -> [f64; 3] {
    let [ah, av] = input.vector();
    let out = apply(&mz_unitary(gamma), [ah, av, 0.0, 0.0]);
    let (ah2, av2, bh2) = (out[0], out[1], out[2]);
    [bh2, FRAC_1_SQRT_2 * (ah2 - av2), FRAC_1_SQRT_2 * (ah2 + av2)]
}

/// Per-photon detection probabilities of a lossless detector.
pub fn ideal_channel(e: &SignalEnsemble, gamma: f64) -> Result<ChannelMatrix> {
    let rows = e
        .states()
        .map(|q| port_amplitudes(&q, gamma).iter().map(|b| b * b).collect())
        .collect();
    ChannelMatrix::from_rows(rows)
}

/// Detector nonidealities. Rates are counts per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImperfectionParams {
    /// Fringe visibility; scales only the interference cross-term.
    pub visibility: f64,
    /// Intensity fraction leaking to the wrong PBS output.
    pub extinction: f64,
    pub dark_rate: f64,
    pub background_rate: f64,
    /// Photons per second entering the interferometer.
    pub flux: f64,
    /// Fiber coupling efficiency in front of each counter.
    pub coupling: f64,
}

impl Default for ImperfectionParams {
    fn default() -> Self {
        ImperfectionParams::nominal()
    }
}

impl ImperfectionParams {
    pub const NOMINAL_FLUX: f64 = 3.0e5;
    pub const NOMINAL_COUPLING: f64 = 0.775;

    /// Bench values: 1:1000 extinction, 0.98 contrast, ~100/s dark plus
    /// ~200/s ambient, 3·10⁵ photons/s, 0.75–0.8 coupling.
    pub fn nominal() -> Self {
        ImperfectionParams {
            visibility: 0.98,
            extinction: 1e-3,
            dark_rate: 100.0,
            background_rate: 200.0,
            flux: Self::NOMINAL_FLUX,
            coupling: Self::NOMINAL_COUPLING,
        }
    }

    /// Perfect optics and counters at the nominal flux and coupling.
    pub fn ideal() -> Self {
        ImperfectionParams {
            visibility: 1.0,
            extinction: 0.0,
            dark_rate: 0.0,
            background_rate: 0.0,
            ..Self::nominal()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} = {x} not in [0, 1]")))
            }
        };
        let nonneg = |name: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} = {x} must be a nonnegative rate")))
            }
        };
        unit("visibility", self.visibility)?;
        unit("extinction", self.extinction)?;
        unit("coupling", self.coupling)?;
        nonneg("dark_rate", self.dark_rate)?;
        nonneg("background_rate", self.background_rate)?;
        nonneg("flux", self.flux)
    }
}

/// Per-photon probabilities at Ports 0, 1, 2 for one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortProbabilities {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PortProbabilities {
    pub fn sum(&self) -> f64 {
        self.p0 + self.p1 + self.p2
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p0, self.p1, self.p2]
    }
}

/// Port probabilities with finite visibility and PBS leakage.
///
/// Path-`a` power is `A_H² + c²A_V²`, path-`b` power is `s²A_V²`
/// (`c = cos γ/2`, `s = sin γ/2`). A fraction `ε` of each crosses to the
/// other output: into Port 0 from path `a`, and split equally over
/// Ports 1 and 2 from path `b`. The total is conserved.
pub fn imperfect_probabilities(input: &RealQubit, gamma: f64, imp: &ImperfectionParams) -> PortProbabilities {
    let [ah, av] = input.vector();
    let (s, c) = (gamma / 2.0).sin_cos();
    let eps = imp.extinction;
    let path_a = ah * ah + c * c * av * av;
    let path_b = s * s * av * av;
    let cross = imp.visibility * ah * c * av;
    PortProbabilities {
        p0: (1.0 - eps) * path_b + eps * path_a,
        p1: (1.0 - eps) * (0.5 * path_a - cross) + 0.5 * eps * path_b,
        p2: (1.0 - eps) * (0.5 * path_a + cross) + 0.5 * eps * path_b,
    }
}

/// Expected count rates (counts/s) per signal and port.
pub fn imperfect_rates(e: &SignalEnsemble, gamma: f64, imp: &ImperfectionParams) -> Result<Vec<[f64; 3]>> {
    imp.validate()?;
    let detected = imp.flux * imp.coupling;
    let floor = imp.dark_rate + imp.background_rate;
    Ok(e.states()
        .map(|q| {
            imperfect_probabilities(&q, gamma, imp)
                .as_array()
                .map(|p| detected * p.max(0.0) + floor)
        })
        .collect())
}

/// Channel matrix from normalized expected rates.
pub fn rates_to_channel(rates: &[[f64; 3]]) -> Result<ChannelMatrix> {
    let rows = rates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let t: f64 = r.iter().sum();
            if t > 0.0 {
                Ok(r.iter().map(|x| x / t).collect())
            } else {
                Err(Error::AllZeroSignal(i))
            }
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    ChannelMatrix::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::make_signal_set;
    use crate::info::{mutual_information, ProbabilityVector};
    use crate::pom::{channel_matrix, davies_pom, gamma_halves};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ens(m: usize) -> SignalEnsemble {
        make_signal_set(m, 0.0, None).unwrap()
    }

    #[test]
    fn unitary_examples() {
        let id = mz_unitary(0.0);
        for (i, row) in id.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                assert_eq!(*x, if i == j { 1.0 } else { 0.0 });
            }
        }
        let u = mz_unitary(PI);
        assert_abs_diff_eq!(u[1][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1][2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(u[2][1], -1.0, epsilon = 1e-15);
        for k in 0..100 {
            let g = -2.0 * PI + 4.0 * PI * k as f64 / 99.0;
            assert!(orthogonality_residual(&mz_unitary(g)) < 1e-12);
        }
    }

    #[test]
    fn setting_ties_plate_to_gamma() {
        let s = MzSetting::for_design(3, 1).unwrap();
        assert_eq!(s.hwp1_angle, s.gamma / 4.0);
        let (c, sn) = gamma_halves(3, 1).unwrap();
        assert_abs_diff_eq!((s.gamma / 2.0).cos(), c, epsilon = 1e-15);
        assert_abs_diff_eq!((s.gamma / 2.0).sin(), sn, epsilon = 1e-15);
    }

    #[test]
    fn horizontal_input_splits_evenly() {
        for g in [0.0, 0.7, -1.9, PI] {
            let b = port_amplitudes(&RealQubit::new(0.0), g);
            assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(b[1], FRAC_1_SQRT_2, epsilon = 1e-15);
            assert_abs_diff_eq!(b[2], FRAC_1_SQRT_2, epsilon = 1e-15);
        }
    }

    #[test]
    fn vertical_input_amplitudes() {
        // cos γ/2 = 1/√3: b1 = −1/√6, b2 = +1/√6, b0² = 2/3
        let g = MzSetting::for_design(3, 1).unwrap().gamma;
        let b = port_amplitudes(&RealQubit::new(PI / 2.0), g);
        assert_abs_diff_eq!(b[1], -1.0 / 6f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b[2], 1.0 / 6f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(b[0] * b[0], 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn trine_second_letter_nulls_port_one() {
        let g = MzSetting::for_design(3, 1).unwrap().gamma;
        let b = port_amplitudes(&RealQubit::new(PI / 3.0), g);
        let sq: Vec<f64> = b.iter().map(|x| x * x).collect();
        assert_abs_diff_eq!(sq[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sq[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sq[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn amplitudes_are_normalized() {
        for k in 0..50 {
            let q = RealQubit::new(k as f64 * 0.13);
            let b = port_amplitudes(&q, -2.0 + k as f64 * 0.08);
            assert_abs_diff_eq!(b.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ideal_channel_matches_pom() {
        for (size, m) in [(3usize, 1i64), (5, 2), (7, 2), (7, 3), (9, 3), (11, 4), (11, 5)] {
            let g = MzSetting::for_design(size, m).unwrap().gamma;
            for theta0 in [0.0, 0.3, -1.1] {
                let e = make_signal_set(size, theta0, None).unwrap();
                let a = ideal_channel(&e, g).unwrap();
                let b = channel_matrix(&e, &davies_pom(size, m).unwrap()).unwrap();
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    assert!((x - y).abs() < 1e-10, "({size}, {m}) at {theta0}");
                }
            }
        }
    }

    #[test]
    fn ideal_params_reduce_to_ideal_channel() {
        let e = ens(5);
        let g = MzSetting::for_design(5, 2).unwrap().gamma;
        let imp = ImperfectionParams::ideal();
        let rates = imperfect_rates(&e, g, &imp).unwrap();
        let ch = ideal_channel(&e, g).unwrap();
        let k = imp.flux * imp.coupling;
        for (i, r) in rates.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                assert_abs_diff_eq!(*x, k * ch.get(i, j), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn nominal_trine_orders_of_magnitude() {
        let g = MzSetting::for_design(3, 1).unwrap().gamma;
        let rates = imperfect_rates(&ens(3), g, &ImperfectionParams::nominal()).unwrap();
        let psi0 = rates[0];
        assert!(psi0[0] > 300.0 && psi0[0] < 3000.0, "null port {}", psi0[0]);
        assert!(psi0[1] > 3e4 && psi0[1] < 3e5, "bright port {}", psi0[1]);
        // interference nulls sit near 10^3 counts/s
        assert!(rates[1][1] > 300.0 && rates[1][1] < 3000.0, "{}", rates[1][1]);
        for r in &rates {
            assert!(r.iter().all(|&x| x >= 100.0));
        }
    }

    #[test]
    fn no_flux_gives_floor() {
        let imp = ImperfectionParams { flux: 0.0, ..ImperfectionParams::nominal() };
        let rates = imperfect_rates(&ens(5), 1.0, &imp).unwrap();
        for r in rates {
            for x in r {
                assert_eq!(x, imp.dark_rate + imp.background_rate);
            }
        }
    }

    #[test]
    fn probabilities_conserved() {
        let imp = ImperfectionParams { visibility: 0.9, extinction: 0.01, ..ImperfectionParams::nominal() };
        for k in 0..40 {
            let p = imperfect_probabilities(&RealQubit::new(k as f64 * 0.17), -1.3 + 0.05 * k as f64, &imp);
            assert!(p.sum() <= 1.0 + 1e-10);
            assert!(p.p0 >= 0.0 && p.p1 >= 0.0 && p.p2 >= 0.0);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = ImperfectionParams { visibility: 1.2, ..ImperfectionParams::nominal() };
        assert!(matches!(imperfect_rates(&ens(3), 0.0, &bad), Err(Error::InvalidParams(_))));
        let bad = ImperfectionParams { dark_rate: -1.0, ..ImperfectionParams::nominal() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn visibility_loss_lowers_information() {
        let g = MzSetting::for_design(3, 1).unwrap().gamma;
        let mut last = f64::INFINITY;
        for k in 0..=20 {
            let v = 1.0 - 0.005 * k as f64;
            let imp = ImperfectionParams { visibility: v, ..ImperfectionParams::nominal() };
            let ch = rates_to_channel(&imperfect_rates(&ens(3), g, &imp).unwrap()).unwrap();
            let mi = mutual_information(&ch, &ProbabilityVector::uniform(3)).unwrap();
            assert!(mi <= last + 1e-15, "V = {v}");
            last = mi;
        }
    }

    #[test]
    fn m3_beats_m2_under_nominal_model() {
        let e = ens(7);
        let imp = ImperfectionParams::nominal();
        let mi = |m| {
            let g = MzSetting::for_design(7, m).unwrap().gamma;
            let ch = rates_to_channel(&imperfect_rates(&e, g, &imp).unwrap()).unwrap();
            mutual_information(&ch, &ProbabilityVector::uniform(7)).unwrap()
        };
        assert!(mi(3) > mi(2));
    }

    #[test]
    fn params_from_toml() {
        let p: ImperfectionParams = toml::from_str("visibility = 0.95\nflux = 1e4").unwrap();
        assert_eq!(p.visibility, 0.95);
        assert_eq!(p.flux, 1e4);
        assert_eq!(p.extinction, 1e-3);
    }
}
