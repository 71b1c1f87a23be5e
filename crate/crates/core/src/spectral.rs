//! Discrete Fourier transforms of coefficient series at the fundamental
//! frequencies and the periodogram quantities derived from them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::hilbert::{tensor, ComplexCoefVector, ComplexOperatorMatrix};
use crate::model::CoefSeries;

/// Fundamental frequencies `ω_j = 2πj/n`, `j = 1..=q`, `q = ⌊(n-1)/2⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub n: usize,
    pub q: usize,
    pub omegas: Vec<f64>,
}

impl FrequencyGrid {
    /// Frequency `ω_j` for a one-based index.
    pub fn omega(&self, j: usize) -> f64 {
        self.omegas[j - 1]
    }
}

/// DFT values at the fundamental frequencies; `rows[j-1]` holds `𝓧_n(ω_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftTable {
    pub grid: FrequencyGrid,
    pub rows: Vec<ComplexCoefVector>,
}

impl DftTable {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.dim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxResult {
    pub value: f64,
    /// One-based frequency index of the maximum.
    pub argmax_j: usize,
    pub implied_period: f64,
}

pub fn fundamental_frequencies(n: usize) -> Result<FrequencyGrid> {
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let q = (n - 1) / 2;
    let omegas = (1..=q).map(|j| 2.0 * PI * j as f64 / n as f64).collect();
    Ok(FrequencyGrid { n, q, omegas })
}

/// Per-coordinate transform over all `n` frequencies `2πj/n`, `j = 0..n`,
/// with the `n^{-1/2}` normalization and time indexed from 1.
/// With `demean`, each coordinate's mean is removed first. That leaves every
/// nonzero frequency unchanged mathematically, and constants then cancel
/// exactly instead of up to rounding proportional to their level.
fn transform_columns(series: &CoefSeries, keep: usize, demean: bool) -> Vec<ComplexCoefVector> {
    let n = series.n();
    let p = series.p();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let norm = (n as f64).sqrt().recip();
    // Time starts at t = 1, so every frequency picks up a phase e^{-iω_j}.
    let phases: Vec<Complex64> = (0..keep)
        .map(|j| Complex64::from_polar(norm, -2.0 * PI * j as f64 / n as f64))
        .collect();

    let mut rows = vec![ComplexCoefVector::zeros(p); keep];
    let mut buffer = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..p {
        let column = series.matrix().column(k);
        let shift = if demean { column.mean() } else { 0.0 };
        for (slot, &x) in buffer.iter_mut().zip(column.iter()) {
            *slot = Complex64::new(x - shift, 0.0);
        }
        fft.process(&mut buffer);
        for (j, row) in rows.iter_mut().enumerate() {
            row.0[k] = buffer[j] * phases[j];
        }
    }
    rows
}

/// DFT `𝓧_n(ω_j) = n^{-1/2} Σ_t X_t e^{-itω_j}` at the fundamental frequencies.
pub fn dft(series: &CoefSeries) -> Result<DftTable> {
    let grid = fundamental_frequencies(series.n())?;
    let mut rows = transform_columns(series, grid.q + 1, true);
    rows.remove(0);
    Ok(DftTable { grid, rows })
}

/// The same transform evaluated at all `n` frequencies `2πj/n`, `j = 0..n`.
/// Exposed for energy-identity checks.
pub fn full_transform(series: &CoefSeries) -> Vec<ComplexCoefVector> {
    transform_columns(series, series.n(), false)
}

/// `‖𝓧_n(ω_j)‖²` for each fundamental frequency; equals the Hilbert-Schmidt
/// norm of the periodogram operator.
pub fn periodogram_norms(table: &DftTable) -> Vec<f64> {
    table.rows.iter().map(|r| r.norm_sqr()).collect()
}

/// Periodogram operator `𝓧_n(ω_j) ⊗ 𝓧_n(ω_j)` for a one-based index `j`.
pub fn periodogram_operator(table: &DftTable, j: usize) -> Result<ComplexOperatorMatrix> {
    if j == 0 || j > table.grid.q {
        return Err(Error::OutOfRange {
            index: j,
            max: table.grid.q,
        });
    }
    let row = &table.rows[j - 1];
    tensor(row, row)
}

/// Maximum with ties broken towards the smallest index.
pub fn max_norm(norms: &[f64], n: usize) -> Result<MaxResult> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, &v) in norms.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((idx, v)),
        }
    }
    let (idx, value) = best.ok_or_else(|| Error::InvalidArgument("empty norm sequence".into()))?;
    let argmax_j = idx + 1;
    Ok(MaxResult {
        value,
        argmax_j,
        implied_period: n as f64 / argmax_j as f64,
    })
}

/// Replaces row `j` by `filters[j] · row j`.
pub fn filter_dft(table: &DftTable, filters: &[ComplexOperatorMatrix]) -> Result<DftTable> {
    if filters.len() != table.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: table.rows.len(),
            found: filters.len(),
        });
    }
    let rows = table
        .rows
        .iter()
        .zip(filters)
        .map(|(row, f)| {
            if f.dim() != row.dim() {
                return Err(Error::DimensionMismatch {
                    expected: row.dim(),
                    found: f.dim(),
                });
            }
            f.apply(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DftTable {
        grid: table.grid.clone(),
        rows,
    })
}
