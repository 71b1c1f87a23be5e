//! Data-generating processes and the Monte Carlo harness for size and power
//! studies.
//!
//! Each replication derives its own generator from `(seed, replication)`,
//! so results do not depend on scheduling or thread count.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::gumbel_quantile;
use crate::error::{Error, Result};
use crate::hilbert::{CoefVector, OperatorMatrix};
use crate::model::CoefSeries;
use crate::test::{tn_test, TestOptions};

const INNOVATION_STREAM: u64 = 0;
const PERIOD_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodSpec {
    Fixed(usize),
    /// `d = 2 + Poisson(λ)`, drawn per generated series.
    Poisson(f64),
}

/// `s(t) = a cos(2πt/d)` along `direction` (first basis vector by default).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub amplitude: f64,
    pub period: PeriodSpec,
    pub direction: Option<CoefVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnovationSource {
    /// Independent centered Gaussian coordinates with the given variances.
    Gaussian { eigenvalues: Vec<f64> },
    /// Rows resampled uniformly with replacement.
    Bootstrap { pool: CoefSeries },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpSpec {
    pub n: usize,
    pub rho: OperatorMatrix,
    pub innovations: InnovationSource,
    pub signal: Option<SignalSpec>,
    pub seed: u64,
}

impl DgpSpec {
    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        let p = self.dim();
        match &self.innovations {
            InnovationSource::Gaussian { eigenvalues } => {
                if eigenvalues.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: eigenvalues.len(),
                    });
                }
                if eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "innovation eigenvalues must be positive".into(),
                    ));
                }
            }
            InnovationSource::Bootstrap { pool } => {
                if pool.p() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: pool.p(),
                    });
                }
            }
        }
        if let Some(signal) = &self.signal {
            if !(signal.amplitude >= 0.0) {
                return Err(Error::InvalidArgument("amplitude must be nonnegative".into()));
            }
            match signal.period {
                PeriodSpec::Fixed(d) if d < 2 => {
                    return Err(Error::InvalidArgument(format!("period {d} is below 2")))
                }
                PeriodSpec::Poisson(l) if !(l > 0.0) => {
                    return Err(Error::InvalidArgument(format!(
                        "Poisson rate {l} must be positive"
                    )))
                }
                _ => {}
            }
            if let Some(dir) = &signal.direction {
                if dir.dim() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: dir.dim(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub series: CoefSeries,
    /// Period of the injected signal, if any.
    pub period: Option<usize>,
    pub warnings: Vec<String>,
}

/// Period `2 + Poisson(λ)`.
pub fn draw_period<R: Rng + ?Sized>(poisson_lambda: f64, rng: &mut R) -> Result<usize> {
    let dist = Poisson::new(poisson_lambda)
        .map_err(|e| Error::InvalidArgument(format!("Poisson rate {poisson_lambda}: {e}")))?;
    let k: f64 = dist.sample(rng);
    Ok(2 + k as usize)
}

pub fn bootstrap_innovations<R: Rng + ?Sized>(
    pool: &CoefSeries,
    count: usize,
    rng: &mut R,
) -> Result<CoefSeries> {
    let size = pool.n();
    if size == 0 || count == 0 {
        return Err(Error::InvalidArgument("empty bootstrap request".into()));
    }
    let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..size)).collect();
    let src = pool.matrix();
    CoefSeries::new(DMatrix::from_fn(count, pool.p(), |t, k| src[(picks[t], k)]))
}

fn draw_innovations(source: &InnovationSource, count: usize, rng: &mut ChaCha8Rng) -> Result<CoefSeries> {
    match source {
        InnovationSource::Gaussian { eigenvalues } => {
            let sds: Vec<f64> = eigenvalues.iter().map(|l| l.sqrt()).collect();
            let mut m = DMatrix::zeros(count, sds.len());
            for t in 0..count {
                for (k, sd) in sds.iter().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    m[(t, k)] = sd * z;
                }
            }
            CoefSeries::new(m)
        }
        InnovationSource::Bootstrap { pool } => bootstrap_innovations(pool, count, rng),
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates `X_1..X_n` from `X_0 = ε_0`, `X_t = ρ(X_{t-1}) + ε_t`, then adds
/// the signal, if any, as `Y_t = s(t)·direction + X_t`.
///
/// Innovations and the period draw use separate streams of the seed, so the
/// noise path is the same with and without a signal.
pub fn gen_far1(spec: &DgpSpec) -> Result<Simulated> {
    spec.validate()?;
    let mut warnings = Vec::new();
    let norm = spec.rho.operator_norm();
    if norm >= 1.0 {
        warnings.push(format!("autoregression operator norm {norm:.4} >= 1"));
    }
    let p = spec.dim();
    let n = spec.n;

    let mut rng = rng_for(spec.seed, INNOVATION_STREAM);
    let eps = draw_innovations(&spec.innovations, n + 1, &mut rng)?;
    let eps = eps.matrix();
    let rho_t = spec.rho.0.transpose();
    let mut x = DMatrix::zeros(n, p);
    let mut prev = eps.row(0).into_owned();
    for t in 0..n {
        let next = &prev * &rho_t + eps.row(t + 1);
        x.set_row(t, &next);
        prev = next;
    }

    let mut period = None;
    if let Some(signal) = &spec.signal {
        let d = match signal.period {
            PeriodSpec::Fixed(d) => d,
            PeriodSpec::Poisson(l) => draw_period(l, &mut rng_for(spec.seed, PERIOD_STREAM))?,
        };
        period = Some(d);
        if signal.amplitude > 0.0 {
            let dir = signal
                .direction
                .clone()
                .unwrap_or_else(|| CoefVector::unit(p, 0));
            for t in 0..n {
                let s = signal.amplitude * (2.0 * PI * (t + 1) as f64 / d as f64).cos();
                for k in 0..p {
                    x[(t, k)] += s * dir.0[k];
                }
            }
        }
    }

    Ok(Simulated {
        series: CoefSeries::new(x)?,
        period,
        warnings,
    })
}

/// Mean signal energy `d^{-1} Σ_{t=1}^d ‖s(t)‖²` for a unit direction.
pub fn signal_energy(amplitude: f64, period: usize) -> f64 {
    let d = period as f64;
    (1..=period)
        .map(|t| (amplitude * (2.0 * PI * t as f64 / d).cos()).powi(2))
        .sum::<f64>()
        / d
}

/// Stationary covariance `Γ = Σ_k ρ^k Σ (ρ^k)ᵀ` of a FAR(1) process.
pub fn stationary_covariance(rho: &OperatorMatrix, sigma: &OperatorMatrix, tol: f64) -> Result<OperatorMatrix> {
    if rho.operator_norm() >= 1.0 {
        return Err(Error::InvalidArgument(
            "stationary covariance needs an operator norm below 1".into(),
        ));
    }
    let mut gamma = sigma.0.clone();
    let mut term = sigma.0.clone();
    for _ in 0..100_000 {
        term = &rho.0 * term * rho.0.transpose();
        gamma += &term;
        if term.norm() <= tol * gamma.norm() {
            return Ok(OperatorMatrix(gamma));
        }
    }
    Err(Error::InvalidArgument("stationary covariance did not converge".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRate {
    pub alpha: f64,
    pub rate: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub replications: usize,
    pub failures: usize,
    pub per_alpha: Vec<AlphaRate>,
    /// Average injected period over replications that carried a signal.
    pub mean_period: Option<f64>,
}

impl McResult {
    pub fn rate(&self, alpha: f64) -> Option<f64> {
        self.per_alpha
            .iter()
            .find(|a| a.alpha == alpha)
            .map(|a| a.rate)
    }
}

/// Derives an independent per-replication seed.
pub fn child_seed(seed: u64, replication: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(replication))
}

struct Outcome {
    t_n: std::result::Result<f64, String>,
    period: Option<usize>,
}

/// Repeats generate → test over `replications` child seeds and reports the
/// empirical rejection rate at each level.
///
/// More than 1% failed replications abort the run; otherwise failures are
/// excluded from the rates and counted.
pub fn monte_carlo(
    template: &DgpSpec,
    opts: &TestOptions,
    replications: usize,
    alphas: &[f64],
) -> Result<McResult> {
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be positive".into()));
    }
    template.validate()?;
    let criticals = alphas
        .iter()
        .map(|&a| gumbel_quantile(1.0 - a))
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<Outcome> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let spec = DgpSpec {
                seed: child_seed(template.seed, r as u64),
                ..template.clone()
            };
            match gen_far1(&spec) {
                Ok(sim) => Outcome {
                    t_n: tn_test(&sim.series, opts).map(|rep| rep.t_n).map_err(|e| e.to_string()),
                    period: sim.period,
                },
                Err(e) => Outcome {
                    t_n: Err(e.to_string()),
                    period: None,
                },
            }
        })
        .collect();

    let failures = outcomes.iter().filter(|o| o.t_n.is_err()).count();
    if failures * 100 > replications {
        let first = outcomes
            .iter()
            .find_map(|o| o.t_n.as_ref().err().cloned())
            .unwrap_or_default();
        return Err(Error::TooManyFailures {
            failures,
            replications,
            first,
        });
    }
    let stats: Vec<f64> = outcomes.iter().filter_map(|o| o.t_n.as_ref().ok().copied()).collect();
    let done = stats.len() as f64;
    let per_alpha = alphas
        .iter()
        .zip(&criticals)
        .map(|(&alpha, &crit)| {
            let rate = stats.iter().filter(|&&t| t > crit).count() as f64 / done;
            AlphaRate {
                alpha,
                rate,
                standard_error: (rate * (1.0 - rate) / done).sqrt(),
            }
        })
        .collect();
    let periods: Vec<usize> = outcomes.iter().filter_map(|o| o.period).collect();
    let mean_period = if periods.is_empty() {
        None
    } else {
        Some(periods.iter().sum::<usize>() as f64 / periods.len() as f64)
    };
    Ok(McResult {
        replications,
        failures,
        per_alpha,
        mean_period,
    })
}
