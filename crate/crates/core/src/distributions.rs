//! Gumbel limit law, centering sequences, and the hypoexponential
//! distribution of `‖𝓧_n(ω_j)‖²` for Gaussian data in finite dimension.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

/// Gaps `1 - λ_j/λ_1` below this are treated as ties.
pub const GAP_TOL: f64 = 1e-8;

/// Standard Gumbel cdf `exp(-e^{-x})`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-(-x).exp()).exp()
}

/// Upper tail `1 - exp(-e^{-x})`, accurate for large `x`.
pub fn gumbel_sf(x: f64) -> f64 {
    -(-(-x).exp()).exp_m1()
}

pub fn gumbel_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Gumbel quantile level {p} outside (0, 1)"
        )));
    }
    Ok(-(-p.ln()).ln())
}

fn validate_eigenvalues(eigenvalues: &[f64], d: usize) -> Result<()> {
    if d == 0 || d > eigenvalues.len() {
        return Err(Error::InvalidArgument(format!(
            "truncation {d} outside 1..={}",
            eigenvalues.len()
        )));
    }
    let lead = eigenvalues[0];
    if !(lead > 0.0) {
        return Err(Error::DegenerateEigenvalues(format!(
            "largest eigenvalue {lead} is not positive"
        )));
    }
    for j in 1..d {
        let (prev, cur) = (eigenvalues[j - 1], eigenvalues[j]);
        if cur < 0.0 || !cur.is_finite() {
            return Err(Error::DegenerateEigenvalues(format!(
                "eigenvalue {} = {cur} is negative",
                j + 1
            )));
        }
        // trailing zeros may repeat; positive values must strictly decrease
        if cur > 0.0 && cur >= prev {
            return Err(Error::DegenerateEigenvalues(format!(
                "eigenvalues not strictly decreasing at index {}",
                j + 1
            )));
        }
        if 1.0 - cur / lead < GAP_TOL {
            return Err(Error::DegenerateEigenvalues(format!(
                "eigenvalue {} is tied with the largest",
                j + 1
            )));
        }
    }
    Ok(())
}

/// `b_q^d = λ₁ log(q α_{1,d})` with `α_{1,d} = Π_{j=2}^d (1 - λ_j/λ₁)^{-1}`.
pub fn centering_b(q: usize, eigenvalues: &[f64], d: usize) -> Result<f64> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    validate_eigenvalues(eigenvalues, d)?;
    let lead = eigenvalues[0];
    let correction: f64 = eigenvalues[1..d]
        .iter()
        .map(|&l| -(-l / lead).ln_1p())
        .sum();
    Ok(lead * ((q as f64).ln() + correction))
}

/// Limit centering `b_q = lim_d b_q^d`, evaluated over the whole supplied
/// list. The last eigenvalue's contribution to the centering must not exceed
/// `tail_tol`, otherwise the list is considered too short to resolve the limit.
pub fn centering_b_limit(q: usize, eigenvalues: &[f64], tail_tol: f64) -> Result<f64> {
    let d = eigenvalues.len();
    validate_eigenvalues(eigenvalues, d)?;
    let lead = eigenvalues[0];
    let last = eigenvalues[d - 1];
    let tail = if d > 1 { -lead * (-last / lead).ln_1p() } else { 0.0 };
    if tail > tail_tol {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue tail contribution {tail:e} exceeds tolerance {tail_tol:e}"
        )));
    }
    centering_b(q, eigenvalues, d)
}

/// `c_q = log q + (d-1) log log q - log (d-1)!`, the centering for a
/// whitened `d`-dimensional maximum.
pub fn centering_c(q: usize, d: usize) -> Result<f64> {
    if q < 3 {
        return Err(Error::InvalidArgument(format!(
            "centering_c needs q >= 3, got {q}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let lq = (q as f64).ln();
    let log_fact: f64 = (1..d).map(|k| (k as f64).ln()).sum();
    Ok(lq + (d as f64 - 1.0) * lq.ln() - log_fact)
}

/// Law of `Σ_k λ_k E_k` with independent standard exponentials `E_k`, i.e.
/// a hypoexponential with rates `λ_k^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypoExp {
    means: Vec<f64>,
    alphas: Vec<f64>,
}

impl HypoExp {
    /// `means` must be positive and strictly decreasing.
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidArgument("no component means".into()));
        }
        if means.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidArgument(
                "component means must be positive".into(),
            ));
        }
        if means.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::DegenerateEigenvalues(
                "component means must be strictly decreasing".into(),
            ));
        }
        let alphas = mixture_weights(&means);
        Ok(HypoExp { means, alphas })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Weights `α_{k,d} = Π_{j≠k} (1 - λ_j/λ_k)^{-1}`; they sum to one.
    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn mean(&self) -> f64 {
        self.means.iter().sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .alphas
            .iter()
            .zip(&self.means)
            .map(|(a, l)| -a * (-x / l).exp_m1())
            .sum();
        s.clamp(0.0, 1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.means
            .iter()
            .map(|l| {
                let e: f64 = rng.sample(Exp1);
                l * e
            })
            .sum()
    }

    /// `b_q^d` for this spectrum.
    pub fn centering(&self, q: usize) -> Result<f64> {
        centering_b(q, &self.means, self.means.len())
    }
}

/// Products are accumulated as log-magnitude plus sign to stay finite for
/// long, tightly spaced spectra.
fn mixture_weights(means: &[f64]) -> Vec<f64> {
    (0..means.len())
        .map(|k| {
            let mut log_mag = 0.0;
            let mut negative = false;
            for (j, &lj) in means.iter().enumerate() {
                if j == k {
                    continue;
                }
                let factor = 1.0 - lj / means[k];
                log_mag -= factor.abs().ln();
                negative ^= factor < 0.0;
            }
            let mag = log_mag.exp();
            if negative {
                -mag
            } else {
                mag
            }
        })
        .collect()
}

/// One draw of `λ₁^{-1}(max of q iid hypoexponentials - b_q^d)`.
pub fn max_hypoexp_standardized<R: Rng + ?Sized>(
    spec: &HypoExp,
    q: usize,
    rng: &mut R,
) -> Result<f64> {
    let b = spec.centering(q)?;
    let m = (0..q)
        .map(|_| spec.sample(rng))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((m - b) / spec.means[0])
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and a continuous cdf. Sorts `samples` in place.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
