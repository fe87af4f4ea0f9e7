//! Photon-counting simulation of the detector and offset-angle sweeps.
//!
//! Every (signal, port, repeat) cell is an independent Poisson draw of
//! `rate · window` from a ChaCha8 stream. Sweep point `k` uses stream `k`
//! of the run seed, so results do not depend on thread scheduling.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::make_signal_set;
use crate::error::{Error, Result};
use crate::info::{best_von_neumann, mutual_information, ProbabilityVector};
use crate::interferometer::{ideal_channel, imperfect_rates, ImperfectionParams, MzSetting};
use crate::pom::ChannelMatrix;

/// Raw counts of one port during one counting window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub signal_index: usize,
    pub port: usize,
    pub repeat: usize,
    pub counts: u64,
    /// Seconds.
    pub window: f64,
}

fn poisson_draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u64
}

fn check_counting(rates: &[Vec<f64>], window: f64, repeats: usize) -> Result<()> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::InvalidWindow(window));
    }
    if repeats == 0 {
        return Err(Error::InvalidRepeats(repeats));
    }
    if let Some(r) = rates.iter().flatten().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::InvalidParams(format!("rate {r} must be nonnegative")));
    }
    Ok(())
}

fn simulate_stream(rates: &[Vec<f64>], window: f64, repeats: usize, seed: u64, stream: u64) -> Vec<CountRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(rates.len() * repeats * 3);
    // Signal-major, then repeat, then port: the order the bench takes data.
    for (signal_index, ports) in rates.iter().enumerate() {
        for repeat in 0..repeats {
            for (port, &rate) in ports.iter().enumerate() {
                let counts = poisson_draw(&mut rng, rate * window);
                out.push(CountRecord { signal_index, port, repeat, counts, window });
            }
        }
    }
    out
}

/// Draws Poisson counts for every signal, port and repeat.
///
/// `rates[i][j]` is the expected count rate of port `j` for signal `i`.
pub fn simulate_counts(rates: &[Vec<f64>], window: f64, repeats: usize, seed: u64) -> Result<Vec<CountRecord>> {
    check_counting(rates, window, repeats)?;
    Ok(simulate_stream(rates, window, repeats, seed, 0))
}

/// Channel estimate with propagated standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub channel: ChannelMatrix,
    pub std_errors: Vec<Vec<f64>>,
}

/// Ratio-of-counts estimate of `P(y_j|x_i)`.
///
/// Mean rates are taken over repeats; `subtract_background` (counts/s) is
/// removed from each mean and floored at zero. Standard errors use the
/// across-repeat variance (Poisson variance for a single repeat) pushed
/// through the ratio by first-order propagation.
pub fn estimate_channel(records: &[CountRecord], subtract_background: Option<f64>) -> Result<ChannelEstimate> {
    let n_signals = records.iter().map(|r| r.signal_index + 1).max().unwrap_or(0);
    let n_ports = records.iter().map(|r| r.port + 1).max().unwrap_or(0);
    if n_signals == 0 || n_ports == 0 {
        return Err(Error::EmptyCell { signal: 0, port: 0 });
    }
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); n_signals * n_ports];
    for r in records {
        if r.window.is_nan() || r.window <= 0.0 {
            return Err(Error::InvalidWindow(r.window));
        }
        cells[r.signal_index * n_ports + r.port].push(r.counts as f64 / r.window);
    }
    let bg = subtract_background.unwrap_or(0.0);
    let mut means = vec![0.0; n_signals * n_ports];
    let mut var_of_mean = vec![0.0; n_signals * n_ports];
    for (idx, samples) in cells.iter().enumerate() {
        if samples.is_empty() {
            return Err(Error::EmptyCell { signal: idx / n_ports, port: idx % n_ports });
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        means[idx] = (mean - bg).max(0.0);
        var_of_mean[idx] = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n
        } else {
            // single window: Poisson variance of the rate
            let window = records
                .iter()
                .find(|r| r.signal_index * n_ports + r.port == idx)
                .map_or(1.0, |r| r.window);
            mean / window
        };
        if means[idx] == 0.0 {
            var_of_mean[idx] = 0.0;
        }
    }
    let mut rows = Vec::with_capacity(n_signals);
    let mut std_errors = Vec::with_capacity(n_signals);
    for i in 0..n_signals {
        let m = &means[i * n_ports..(i + 1) * n_ports];
        let v = &var_of_mean[i * n_ports..(i + 1) * n_ports];
        let total: f64 = m.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllZeroSignal(i));
        }
        rows.push(m.iter().map(|x| x / total).collect::<Vec<f64>>());
        // ∂(m_j/T)/∂m_k = (δ_jk T − m_j) / T²
        let se = (0..n_ports)
            .map(|j| {
                (0..n_ports)
                    .map(|k| {
                        let d = (if j == k { total } else { 0.0 } - m[j]) / (total * total);
                        d * d * v[k]
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        std_errors.push(se);
    }
    Ok(ChannelEstimate { channel: ChannelMatrix::from_rows(rows)?, std_errors })
}

/// Root-mean-square entrywise difference, in percent.
pub fn rms_deviation(estimated: &ChannelMatrix, ideal: &ChannelMatrix) -> Result<f64> {
    if estimated.shape() != ideal.shape() {
        return Err(Error::ShapeMismatch(estimated.shape(), ideal.shape()));
    }
    rms_deviation_entries(estimated.as_slice(), ideal.as_slice())
}

/// [`rms_deviation`] on flat entry lists of equal length.
pub fn rms_deviation_entries(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch((1, a.len()), (1, b.len())));
    }
    let ms = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(100.0 * ms.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    #[serde(rename = "M")]
    pub letters: usize,
    pub m: i64,
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub imperfections: ImperfectionParams,
    pub window: f64,
    pub repeats: usize,
    pub seed: u64,
    pub subtract_background: Option<f64>,
    /// Skip counting; `mi_mean` is then the exact curve and `mi_std` zero.
    pub ideal_only: bool,
    pub von_neumann_grid: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            letters: 3,
            m: 1,
            start: -PI / 2.0,
            end: PI / 2.0,
            step: PI / 90.0,
            imperfections: ImperfectionParams::nominal(),
            window: 1.0,
            repeats: 5,
            seed: 0,
            subtract_background: None,
            ideal_only: false,
            von_neumann_grid: 180,
        }
    }
}

impl SweepConfig {
    /// Offset angles from `start` in steps of `step`, up to `end`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParams(format!("step must be positive, got {}", self.step)));
        }
        if self.end.is_nan() || self.start.is_nan() || self.end < self.start {
            return Err(Error::InvalidParams(format!("empty range [{}, {}]", self.start, self.end)));
        }
        let n = ((self.end - self.start) / self.step).round() as usize + 1;
        Ok((0..n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub theta0_grid: Vec<f64>,
    pub mi_mean: Vec<f64>,
    pub mi_std: Vec<f64>,
    pub ideal_mi: Vec<f64>,
    pub von_neumann_mi: Vec<f64>,
}

#[derive(Serialize)]
struct SweepRow {
    theta0: f64,
    mi_mean: f64,
    mi_std: f64,
    ideal_mi: f64,
    von_neumann_mi: f64,
}

impl SweepResult {
    pub fn len(&self) -> usize {
        self.theta0_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta0_grid.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for k in 0..self.len() {
            w.serialize(SweepRow {
                theta0: self.theta0_grid[k],
                mi_mean: self.mi_mean[k],
                mi_std: self.mi_std[k],
                ideal_mi: self.ideal_mi[k],
                von_neumann_mi: self.von_neumann_mi[k],
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

struct PointResult {
    mi_mean: f64,
    mi_std: f64,
    ideal: f64,
    von_neumann: f64,
}

fn sweep_point(cfg: &SweepConfig, gamma: f64, k: usize, theta0: f64) -> Result<PointResult> {
    let e = make_signal_set(cfg.letters, theta0, None)?;
    let uniform = ProbabilityVector::uniform(cfg.letters);
    let ideal = mutual_information(&ideal_channel(&e, gamma)?, &uniform)?;
    let von_neumann = best_von_neumann(&e, cfg.von_neumann_grid).bits;
    if cfg.ideal_only {
        return Ok(PointResult { mi_mean: ideal, mi_std: 0.0, ideal, von_neumann });
    }
    let rates: Vec<Vec<f64>> = imperfect_rates(&e, gamma, &cfg.imperfections)?
        .into_iter()
        .map(|r| r.to_vec())
        .collect();
    let records = simulate_stream(&rates, cfg.window, cfg.repeats, cfg.seed, k as u64);
    let mut per_repeat = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let subset: Vec<CountRecord> = records.iter().filter(|c| c.repeat == r).copied().collect();
        let est = estimate_channel(&subset, cfg.subtract_background)?;
        per_repeat.push(mutual_information(&est.channel, &uniform)?);
    }
    let n = per_repeat.len() as f64;
    let mean = per_repeat.iter().sum::<f64>() / n;
    let std = if per_repeat.len() > 1 {
        (per_repeat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(PointResult { mi_mean: mean, mi_std: std, ideal, von_neumann })
}

/// Mutual information against the offset angle for the `(M, m)` detector.
///
/// Each point measures the rotated ensemble with the fixed interferometer,
/// estimates one channel per repeat, and reports the mean and sample
/// standard deviation of the per-repeat mutual information alongside the
/// exact curve and the best projective measurement.
pub fn sweep_offset(cfg: &SweepConfig) -> Result<SweepResult> {
    let gamma = MzSetting::for_design(cfg.letters, cfg.m)?.gamma;
    cfg.imperfections.validate()?;
    if !cfg.ideal_only {
        if !(cfg.window > 0.0 && cfg.window.is_finite()) {
            return Err(Error::InvalidWindow(cfg.window));
        }
        if cfg.repeats == 0 {
            return Err(Error::InvalidRepeats(0));
        }
    }
    let grid = cfg.grid()?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| sweep_point(cfg, gamma, k, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        theta0_grid: grid,
        mi_mean: points.iter().map(|p| p.mi_mean).collect(),
        mi_std: points.iter().map(|p| p.mi_std).collect(),
        ideal_mi: points.iter().map(|p| p.ideal).collect(),
        von_neumann_mi: points.iter().map(|p| p.von_neumann).collect(),
    })
}

pub fn write_records_csv<W: Write>(records: &[CountRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> csv::Result<Vec<CountRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interferometer::rates_to_channel;
    use approx::assert_abs_diff_eq;

    fn trine_channel() -> ChannelMatrix {
        ChannelMatrix::from_rows(vec![
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap()
    }

    fn trine_rates(imp: &ImperfectionParams) -> Vec<Vec<f64>> {
        let e = make_signal_set(3, 0.0, None).unwrap();
        let g = MzSetting::for_design(3, 1).unwrap().gamma;
        imperfect_rates(&e, g, imp).unwrap().into_iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn zero_rate_gives_zero_counts() {
        let recs = simulate_counts(&[vec![0.0, 0.0, 0.0]], 1.0, 50, 3).unwrap();
        assert!(recs.iter().all(|r| r.counts == 0));
        assert_eq!(recs.len(), 150);
    }

    #[test]
    fn poisson_mean_converges() {
        let recs = simulate_counts(&[vec![1e5]], 1.0, 10_000, 11).unwrap();
        let mean = recs.iter().map(|r| r.counts as f64).sum::<f64>() / recs.len() as f64;
        assert!((mean - 1e5).abs() < 1e3, "{mean}");
        let var = recs.iter().map(|r| (r.counts as f64 - mean).powi(2)).sum::<f64>() / (recs.len() - 1) as f64;
        assert!((var / 1e5 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let rates = trine_rates(&ImperfectionParams::nominal());
        let a = simulate_counts(&rates, 1.0, 5, 42).unwrap();
        let b = simulate_counts(&rates, 1.0, 5, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_counts(&rates, 1.0, 5, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn bad_counting_parameters() {
        let rates = vec![vec![1.0, 2.0]];
        assert_eq!(simulate_counts(&rates, 0.0, 1, 0), Err(Error::InvalidWindow(0.0)));
        assert_eq!(simulate_counts(&rates, 1.0, 0, 0), Err(Error::InvalidRepeats(0)));
        assert!(simulate_counts(&[vec![-1.0]], 1.0, 1, 0).is_err());
    }

    #[test]
    fn proportional_counts_recover_table() {
        let mut recs = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                for r in 0..2 {
                    let counts = if i == j { 0 } else { 50_000 };
                    recs.push(CountRecord { signal_index: i, port: j, repeat: r, counts, window: 1.0 });
                }
            }
        }
        let est = estimate_channel(&recs, None).unwrap();
        assert_eq!(est.channel, trine_channel());
        for i in 0..3 {
            assert_eq!(est.std_errors[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(est.std_errors[i][j], 0.0);
            }
        }
    }

    #[test]
    fn poisson_trine_is_close_to_table() {
        let rates = trine_rates(&ImperfectionParams::ideal());
        let recs = simulate_counts(&rates, 1.0, 5, 7).unwrap();
        let est = estimate_channel(&recs, None).unwrap();
        let rms = rms_deviation(&est.channel, &trine_channel()).unwrap();
        assert!(rms < 1.0, "{rms}");
        for i in 0..3 {
            assert_abs_diff_eq!(est.channel.row(i).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_eq!(est.channel.get(i, i), 0.0);
            assert_eq!(est.std_errors[i][i], 0.0);
            assert!(est.std_errors[i][(i + 1) % 3] > 0.0);
        }
    }

    #[test]
    fn background_subtraction_floors_at_zero() {
        let rates = trine_rates(&ImperfectionParams::nominal());
        let recs = simulate_counts(&rates, 1.0, 5, 1).unwrap();
        let raw = estimate_channel(&recs, None).unwrap();
        let sub = estimate_channel(&recs, Some(300.0)).unwrap();
        assert!(sub.channel.get(0, 0) < raw.channel.get(0, 0));
        let all = estimate_channel(&recs, Some(1e9));
        assert_eq!(all, Err(Error::AllZeroSignal(0)));
    }

    #[test]
    fn estimate_errors() {
        let rec = |i, j| CountRecord { signal_index: i, port: j, repeat: 0, counts: 5, window: 1.0 };
        let missing = vec![rec(0, 0), rec(0, 1), rec(1, 0)];
        assert_eq!(estimate_channel(&missing, None), Err(Error::EmptyCell { signal: 1, port: 1 }));
        assert!(estimate_channel(&[], None).is_err());
        let zero = vec![CountRecord { counts: 0, ..rec(0, 0) }, CountRecord { counts: 0, ..rec(0, 1) }];
        assert_eq!(estimate_channel(&zero, None), Err(Error::AllZeroSignal(0)));
    }

    #[test]
    fn std_error_matches_binomial_scale() {
        // two-port channel at p = 0.25 with many counts: se ≈ sqrt(p(1-p)/N_total)
        let rates = vec![vec![2.5e4, 7.5e4]];
        let recs = simulate_counts(&rates, 1.0, 400, 5).unwrap();
        let est = estimate_channel(&recs, None).unwrap();
        let want = (0.25f64 * 0.75 / (1e5 * 400.0)).sqrt();
        assert!((est.std_errors[0][0] / want - 1.0).abs() < 0.2, "{} vs {want}", est.std_errors[0][0]);
    }

    #[test]
    fn rms_examples() {
        assert_eq!(rms_deviation(&trine_channel(), &trine_channel()).unwrap(), 0.0);
        let t = trine_channel();
        let perturbed: Vec<f64> = t
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, x)| x + if k % 2 == 0 { 0.011 } else { -0.011 })
            .collect();
        assert_abs_diff_eq!(rms_deviation_entries(&perturbed, t.as_slice()).unwrap(), 1.1, epsilon = 1e-12);
        let small = ChannelMatrix::identity(2);
        assert!(matches!(rms_deviation(&small, &t), Err(Error::ShapeMismatch(..))));
    }

    #[test]
    fn nominal_rates_channel_rms_is_sub_percent() {
        let est = rates_to_channel(
            &trine_rates(&ImperfectionParams::nominal())
                .iter()
                .map(|r| [r[0], r[1], r[2]])
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let rms = rms_deviation(&est, &trine_channel()).unwrap();
        assert!(rms > 0.1 && rms < 1.0, "{rms}");
    }

    #[test]
    fn grid_counts() {
        let cfg = SweepConfig { step: 0.0349, ..Default::default() };
        assert_eq!(cfg.grid().unwrap().len(), 91);
        assert_eq!(SweepConfig::default().grid().unwrap().len(), 91);
        let bad = SweepConfig { step: 0.0, ..Default::default() };
        assert!(bad.grid().is_err());
    }

    #[test]
    fn ideal_sweep_peaks_at_zero() {
        let cfg = SweepConfig { ideal_only: true, ..Default::default() };
        let r = sweep_offset(&cfg).unwrap();
        let k0 = r.theta0_grid.iter().position(|t| t.abs() < 1e-12).unwrap();
        assert_abs_diff_eq!(r.ideal_mi[k0], 3f64.log2() - 1.0, epsilon = 1e-12);
        let max = r.ideal_mi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(max, r.ideal_mi[k0], epsilon = 1e-12);
        assert!(r.mi_std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn ideal_curve_is_even_and_periodic() {
        for (size, m) in [(3usize, 1i64), (5, 2), (7, 3)] {
            let base = SweepConfig {
                letters: size,
                m,
                ideal_only: true,
                start: -1.2,
                end: 1.2,
                step: 0.1,
                von_neumann_grid: 8,
                ..Default::default()
            };
            let r = sweep_offset(&base).unwrap();
            let n = r.len();
            for k in 0..n {
                assert_abs_diff_eq!(r.ideal_mi[k], r.ideal_mi[n - 1 - k], epsilon = 1e-12);
            }
            let shifted = sweep_offset(&SweepConfig { start: base.start + PI, end: base.end + PI, ..base }).unwrap();
            for k in 0..n {
                assert_abs_diff_eq!(r.ideal_mi[k], shifted.ideal_mi[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let cfg = SweepConfig { start: -0.2, end: 0.2, step: 0.1, seed: 5, ..Default::default() };
        assert_eq!(sweep_offset(&cfg).unwrap(), sweep_offset(&cfg).unwrap());
        let other = sweep_offset(&SweepConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(sweep_offset(&cfg).unwrap().mi_mean, other.mi_mean);
    }

    #[test]
    fn sweep_without_imperfections_hits_ideal() {
        let cfg = SweepConfig {
            imperfections: ImperfectionParams::ideal(),
            start: 0.0,
            end: 0.0,
            ..Default::default()
        };
        let r = sweep_offset(&cfg).unwrap();
        assert!((r.mi_mean[0] - 0.5850).abs() < 3e-3, "{}", r.mi_mean[0]);
    }

    #[test]
    fn csv_outputs() {
        let cfg = SweepConfig { ideal_only: true, start: 0.0, end: 0.1, step: 0.1, ..Default::default() };
        let r = sweep_offset(&cfg).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("theta0,mi_mean,mi_std,ideal_mi,von_neumann_mi\n"));
        assert_eq!(text.lines().count(), 3);

        let recs = simulate_counts(&[vec![10.0, 20.0, 30.0]], 0.5, 2, 0).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("signal_index,port,repeat,counts,window\n"));
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), recs);
    }
}
