//! Coefficient series, FAR(1) estimation with a principal-component
//! regularized inverse, residual covariance, and frequency-domain transfer
//! operators of linear processes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{sym_eigen, CoefVector, ComplexOperatorMatrix, EigenSystem, OperatorMatrix};
use crate::spectral::FrequencyGrid;

/// Time-ordered curves in coefficient form: an `n × p` matrix whose row `t`
/// holds `X_{t+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefSeries {
    data: DMatrix<f64>,
}

impl CoefSeries {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidArgument("coefficient dimension is zero".into()));
        }
        Ok(CoefSeries { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::TooShort { needed: 1, got: 0 });
        }
        let p = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |t, k| rows[t][k]))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Zero-based row access.
    pub fn row(&self, t: usize) -> CoefVector {
        CoefVector(self.data.row(t).transpose())
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn mean(&self) -> CoefVector {
        CoefVector(self.data.row_mean().transpose())
    }

    /// Subtracts `mean` from every observation.
    pub fn centered(&self, mean: &CoefVector) -> Result<CoefSeries> {
        if mean.dim() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: mean.dim(),
            });
        }
        let mut data = self.data.clone();
        for mut row in data.row_iter_mut() {
            row -= mean.0.transpose();
        }
        Ok(CoefSeries { data })
    }

    pub fn scaled(&self, c: f64) -> CoefSeries {
        CoefSeries {
            data: &self.data * c,
        }
    }
}

/// Number of principal components retained by [`estimate_far1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentRule {
    /// Smallest `k` whose cumulative eigenvalue share reaches the threshold.
    VarianceThreshold(f64),
    Fixed(usize),
}

impl Default for ComponentRule {
    fn default() -> Self {
        ComponentRule::VarianceThreshold(0.99)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarModel {
    pub rho_hat: OperatorMatrix,
    pub k_used: usize,
    pub mean: CoefVector,
    /// Share of the lag-0 covariance trace captured by the retained components.
    pub explained_variance: f64,
    /// Operator norm of `rho_hat`.
    pub rho_norm: f64,
    /// Set when `rho_norm >= 1`.
    pub nonstationary: bool,
}

impl FarModel {
    /// The model with `ρ̂ = 0`, used when the noise is assumed iid.
    pub fn white_noise(mean: CoefVector) -> Self {
        let p = mean.dim();
        FarModel {
            rho_hat: OperatorMatrix::zeros(p),
            k_used: 0,
            mean,
            explained_variance: 0.0,
            rho_norm: 0.0,
            nonstationary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnovationCov {
    pub sigma_hat: OperatorMatrix,
    pub eigen: EigenSystem,
}

/// Empirical lag-`h` autocovariance
/// `Ĉ_h = (n-h)^{-1} Σ_t (X_{t+h} - X̄) ⊗ (X_t - X̄)`.
pub fn lag_autocov(series: &CoefSeries, h: usize) -> Result<OperatorMatrix> {
    let n = series.n();
    if n <= h + 1 {
        return Err(Error::TooShort {
            needed: h + 2,
            got: n,
        });
    }
    let centered = series.centered(&series.mean())?;
    let x = centered.matrix();
    let lead = x.rows(h, n - h);
    let lagged = x.rows(0, n - h);
    let c = lead.transpose() * lagged / (n - h) as f64;
    Ok(OperatorMatrix(c))
}

/// PCA-regularized FAR(1) estimator `ρ̂ = Ĉ₁ P_k Ĉ₀⁺ P_k`, with `Ĉ₀⁺` the
/// inverse of `Ĉ₀` on the span of its top `k` eigenvectors.
pub fn estimate_far1(series: &CoefSeries, rule: ComponentRule) -> Result<FarModel> {
    let n = series.n();
    if n < 3 {
        return Err(Error::TooShort { needed: 3, got: n });
    }
    let p = series.p();
    let c0 = lag_autocov(series, 0)?;
    let c1 = lag_autocov(series, 1)?;
    let eig = sym_eigen(&c0)?;
    let total: f64 = eig.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateEigenvalues(
            "series has zero sample variance".into(),
        ));
    }

    let k = match rule {
        ComponentRule::Fixed(k) => {
            if k == 0 || k > p {
                return Err(Error::InvalidArgument(format!(
                    "component count {k} outside 1..={p}"
                )));
            }
            k
        }
        ComponentRule::VarianceThreshold(share) => {
            if !(share > 0.0 && share <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "variance threshold {share} outside (0, 1]"
                )));
            }
            let mut acc = 0.0;
            let mut k = p;
            for (i, v) in eig.values.iter().enumerate() {
                acc += v;
                if acc / total >= share - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
    };

    let lead = eig.values[0];
    let smallest = eig.values[k - 1];
    if smallest < 1e-12 * lead {
        return Err(Error::RankDeficient {
            value: smallest,
            eps: 1e-12 * lead,
        });
    }
    let explained = eig.values[..k].iter().sum::<f64>() / total;

    let v = eig.vectors.columns(0, k);
    let inv = DVector::from_iterator(k, eig.values[..k].iter().map(|l| l.recip()));
    let pinv = v * DMatrix::from_diagonal(&inv) * v.transpose();
    let rho_hat = OperatorMatrix(&c1.0 * pinv);
    let rho_norm = rho_hat.operator_norm();

    Ok(FarModel {
        rho_hat,
        k_used: k,
        mean: series.mean(),
        explained_variance: explained,
        rho_norm,
        nonstationary: rho_norm >= 1.0,
    })
}

/// `ε̂_k = X_k - ρ̂(X_{k-1})`, `k = 2..=n`, on the series centered by
/// `model.mean`.
pub fn residuals(series: &CoefSeries, model: &FarModel) -> Result<CoefSeries> {
    let n = series.n();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    if model.rho_hat.dim() != series.p() {
        return Err(Error::DimensionMismatch {
            expected: series.p(),
            found: model.rho_hat.dim(),
        });
    }
    let x = series.centered(&model.mean)?;
    let x = x.matrix();
    let current = x.rows(1, n - 1);
    let previous = x.rows(0, n - 1);
    let eps = current - previous * model.rho_hat.0.transpose();
    CoefSeries::new(eps)
}

/// `Σ̂ = (n-1)^{-1} Σ_k ε̂_k ⊗ ε̂_k` over the residual rows, without
/// recentering, and its eigendecomposition.
pub fn innovation_cov(residuals: &CoefSeries) -> Result<InnovationCov> {
    let m = residuals.matrix();
    let count = m.nrows();
    let sigma = m.transpose() * m / count as f64;
    let sigma = OperatorMatrix((&sigma + sigma.transpose()) * 0.5);
    let eigen = sym_eigen(&sigma)?;
    Ok(InnovationCov {
        sigma_hat: sigma,
        eigen,
    })
}

/// Smallest `j ≥ 1` with `-log(1 - λ̂_j/λ̂₁) ≤ threshold`; when no listed
/// eigenvalue qualifies, the count of positive eigenvalues.
pub fn select_a_n(eigen: &EigenSystem, threshold: f64) -> Result<usize> {
    let values = &eigen.values;
    let lead = values.first().copied().unwrap_or(0.0);
    if !(lead > 0.0) {
        return Err(Error::DegenerateEigenvalues(format!(
            "largest eigenvalue {lead} is not positive"
        )));
    }
    for (i, &l) in values.iter().enumerate().skip(1) {
        let ratio = (l / lead).clamp(0.0, 1.0);
        if -(-ratio).ln_1p() <= threshold {
            return Ok(i + 1);
        }
    }
    Ok(values.iter().filter(|&&l| l > 0.0).count().max(1))
}

/// Impulse-response operator `A(ω) = Σ_k a_k e^{-ikω}` over the supplied lags.
pub fn transfer_operator(coeffs: &[(i64, OperatorMatrix)], omega: f64) -> Result<ComplexOperatorMatrix> {
    let p = match coeffs.first() {
        Some((_, a)) => a.dim(),
        None => return Err(Error::InvalidArgument("no lag coefficients".into())),
    };
    let mut acc = DMatrix::from_element(p, p, Complex64::new(0.0, 0.0));
    for (lag, a) in coeffs {
        if a.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: a.dim(),
            });
        }
        let phase = Complex64::from_polar(1.0, -(*lag as f64) * omega);
        acc += a.0.map(|x| phase * x);
    }
    Ok(ComplexOperatorMatrix(acc))
}

/// FAR(1) inverse transfer operators `I - e^{-iω_j} ρ` at every frequency of
/// the grid.
pub fn far1_inverse_filters(rho: &OperatorMatrix, grid: &FrequencyGrid) -> Vec<ComplexOperatorMatrix> {
    let p = rho.dim();
    let identity = DMatrix::<Complex64>::identity(p, p);
    grid.omegas
        .iter()
        .map(|&w| {
            let phase = Complex64::from_polar(1.0, -w);
            ComplexOperatorMatrix(&identity - rho.0.map(|x| phase * x))
        })
        .collect()
}
