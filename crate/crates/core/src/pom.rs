//! Probability operator measures on a real qubit and the channel matrices
//! they induce on a signal set.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::ensemble::{RealQubit, SignalEnsemble};
use crate::error::{Error, Result};

pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const DIAGONAL_TOL: f64 = 1e-12;
pub const DETERMINANT_TOL: f64 = 1e-10;
pub const ROW_SUM_TOL: f64 = 1e-9;
const ENTRY_SLACK: f64 = 1e-12;

/// A 2×2 real symmetric matrix `[[a, b], [b, c]]`.
///
/// Serialized as the triple `[a, b, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct PomElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl From<[f64; 3]> for PomElement {
    fn from([a, b, c]: [f64; 3]) -> Self {
        PomElement { a, b, c }
    }
}

impl From<PomElement> for [f64; 3] {
    fn from(e: PomElement) -> Self {
        [e.a, e.b, e.c]
    }
}

impl PomElement {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        PomElement { a, b, c }
    }

    /// `|v⟩⟨v|` for an unnormalized real vector `v = (x, y)`.
    pub fn outer(x: f64, y: f64) -> Self {
        PomElement { a: x * x, b: x * y, c: y * y }
    }

    /// `weight · |φ⟩⟨φ|` for the unit vector at angle `phi`.
    pub fn rank_one(weight: f64, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        PomElement { a: weight * c * c, b: weight * c * s, c: weight * s * s }
    }

    pub fn identity() -> Self {
        PomElement { a: 1.0, b: 0.0, c: 1.0 }
    }

    pub fn scaled(self, k: f64) -> Self {
        PomElement { a: k * self.a, b: k * self.b, c: k * self.c }
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.a + self.c);
        let half_gap = (0.5 * (self.a - self.c)).hypot(self.b);
        mean - half_gap
    }

    /// `⟨ψ|Π|ψ⟩`, unclamped.
    pub fn expectation(&self, psi: &RealQubit) -> f64 {
        let [x, y] = psi.vector();
        self.a * x * x + 2.0 * self.b * x * y + self.c * y * y
    }

    pub fn is_psd(&self) -> bool {
        self.a >= -DIAGONAL_TOL && self.c >= -DIAGONAL_TOL && self.determinant() >= -DETERMINANT_TOL
    }
}

/// An ordered list of POM elements, one per measurement outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pom {
    elements: Vec<PomElement>,
}

impl Pom {
    /// Wraps elements without validating them; see [`validate_pom`].
    pub fn from_elements(elements: Vec<PomElement>) -> Self {
        Pom { elements }
    }

    pub fn elements(&self) -> &[PomElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn validate(&self) -> ValidationReport {
        validate_pom(self)
    }

    /// Entrywise sum of all elements.
    pub fn sum(&self) -> PomElement {
        self.elements.iter().fold(PomElement::new(0.0, 0.0, 0.0), |acc, e| PomElement {
            a: acc.a + e.a,
            b: acc.b + e.b,
            c: acc.c + e.c,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Smallest eigenvalue of each element; negative values are PSD violations.
    pub psd_residuals: Vec<f64>,
    /// Elements that fail the PSD test.
    pub non_psd: Vec<usize>,
    /// Max-norm distance of the element sum from the identity.
    pub completeness_residual: f64,
    pub passed: bool,
}

pub fn validate_pom(p: &Pom) -> ValidationReport {
    let psd_residuals: Vec<f64> = p.elements.iter().map(PomElement::min_eigenvalue).collect();
    let non_psd: Vec<usize> = p
        .elements
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.is_psd())
        .map(|(i, _)| i)
        .collect();
    let s = p.sum();
    let completeness_residual = (s.a - 1.0).abs().max(s.b.abs()).max((s.c - 1.0).abs());
    let passed = !p.elements.is_empty()
        && non_psd.is_empty()
        && completeness_residual <= COMPLETENESS_TOL
        && completeness_residual.is_finite();
    ValidationReport { psd_residuals, non_psd, completeness_residual, passed }
}

fn check_size(size: usize) -> Result<()> {
    if size < 2 {
        return Err(Error::InvalidM(format!("need M >= 2, got {size}")));
    }
    Ok(())
}

/// The square-root measurement `(2/M)|a_j⟩⟨a_j|` with `a_j` at angle `jπ/M`.
pub fn min_error_pom(size: usize) -> Result<Pom> {
    check_size(size)?;
    let w = 2.0 / size as f64;
    let elements = (0..size)
        .map(|j| PomElement::rank_one(w, j as f64 * PI / size as f64))
        .collect();
    Ok(Pom { elements })
}

/// `1 − 2/M`.
pub fn min_error_probability(size: usize) -> Result<f64> {
    check_size(size)?;
    Ok(1.0 - 2.0 / size as f64)
}

/// `(cos γ/2, sin γ/2)` for the three-outcome POM with parameter `m`.
///
/// Requires odd `M ≥ 3` and an integer `m` with `M/4 < m < M/2`.
pub fn gamma_halves(size: usize, m: i64) -> Result<(f64, f64)> {
    if size < 3 || size.is_multiple_of(2) {
        return Err(Error::InvalidM(format!("need odd M >= 3, got {size}")));
    }
    let big = size as i64;
    if !(4 * m > big && 2 * m < big) {
        return Err(Error::MOutOfRange { big_m: size, m });
    }
    let cot = 1.0 / (m as f64 * PI / size as f64).tan();
    let radicand = 1.0 - cot * cot;
    if !(cot < 1.0 && radicand >= 0.0) {
        return Err(Error::MOutOfRange { big_m: size, m });
    }
    Ok((cot, -radicand.sqrt()))
}

/// Full angle `γ` with the half-angle signs of [`gamma_halves`].
pub fn gamma(size: usize, m: i64) -> Result<f64> {
    let (c, s) = gamma_halves(size, m)?;
    Ok(2.0 * s.atan2(c))
}

/// The three rank-one elements built from
/// `ω₀ = −sin(γ/2)|V⟩`, `ω₁,₂ = (∓|H⟩ + cos(γ/2)|V⟩)/√2`.
pub fn davies_pom(size: usize, m: i64) -> Result<Pom> {
    let (c, s) = gamma_halves(size, m)?;
    let elements = vec![
        PomElement::outer(0.0, -s),
        PomElement::outer(-FRAC_1_SQRT_2, c * FRAC_1_SQRT_2),
        PomElement::outer(FRAC_1_SQRT_2, c * FRAC_1_SQRT_2),
    ];
    Ok(Pom { elements })
}

/// Orthogonal projectors at `phi` and `phi + π/2`.
pub fn projective_pom(phi: f64) -> Pom {
    Pom {
        elements: vec![PomElement::rank_one(1.0, phi), PomElement::rank_one(1.0, phi + PI / 2.0)],
    }
}

/// Row-stochastic matrix of `P(y_j | x_i)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ChannelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for ChannelMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        ChannelMatrix::from_rows(rows)
    }
}

impl From<ChannelMatrix> for Vec<Vec<f64>> {
    fn from(ch: ChannelMatrix) -> Self {
        ch.to_rows()
    }
}

impl ChannelMatrix {
    /// Validates and clamps entries to `[0, 1]`; rows must sum to one.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 {
            return Err(Error::InvalidChannel("no rows".into()));
        }
        let n_cols = rows[0].len();
        if n_cols == 0 {
            return Err(Error::InvalidChannel("no columns".into()));
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch { expected: n_cols, got: row.len() });
            }
            for (j, &x) in row.iter().enumerate() {
                if !(-ENTRY_SLACK..=1.0 + ENTRY_SLACK).contains(&x) {
                    return Err(Error::InvalidChannel(format!("entry ({i}, {j}) = {x} not in [0, 1]")));
                }
                data.push(x.clamp(0.0, 1.0));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidChannel(format!("row {i} sums to {sum}")));
            }
        }
        Ok(ChannelMatrix { rows: n_rows, cols: n_cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        ChannelMatrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose_rows(&self) -> Vec<Vec<f64>> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).collect())
            .collect()
    }

    /// Writes the matrix as headerless CSV, one signal per line.
    pub fn write_csv<W: std::io::Write>(&self, out: W, precision: usize) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in self.data.chunks(self.cols) {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.precision$}")).collect();
            w.write_record(&cells)?;
        }
        w.flush()
    }

    /// Parses row-major CSV. A first line that is not numeric is treated as a header.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(input);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidChannel(e.to_string()))?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::InvalidChannel(format!("line {}: {e}", line + 1))),
            }
        }
        ChannelMatrix::from_rows(rows)
    }
}

/// `⟨ψ_i|Π_j|ψ_i⟩` before clamping.
pub fn raw_channel(e: &SignalEnsemble, p: &Pom) -> Vec<Vec<f64>> {
    e.states()
        .map(|psi| p.elements.iter().map(|el| el.expectation(&psi)).collect())
        .collect()
}

/// Channel matrix induced by measuring the ensemble with `p`.
pub fn channel_matrix(e: &SignalEnsemble, p: &Pom) -> Result<ChannelMatrix> {
    let report = validate_pom(p);
    if !report.passed {
        return Err(Error::InvalidPom(format!(
            "completeness residual {:e}, non-PSD elements {:?}",
            report.completeness_residual, report.non_psd
        )));
    }
    ChannelMatrix::from_rows(raw_channel(e, p))
}
