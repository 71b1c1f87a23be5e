//! Detection of periodic signals with unknown period in functional and
//! multivariate time series.
//!
//! Curves are represented by their coefficients in a fixed orthonormal basis,
//! so every Hilbert-space quantity (inner products, Hilbert-Schmidt norms,
//! covariance operators) reduces to finite-dimensional linear algebra.
//!
//! The main entry point is [`test::tn_test`], which filters the discrete
//! Fourier transform of the series through an estimated FAR(1) operator and
//! calibrates the maximum periodogram norm against the Gumbel law.

// Negated float comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distributions;
pub mod error;
pub mod hilbert;
pub mod ingest;
pub mod model;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use hilbert::{CoefVector, ComplexCoefVector, ComplexOperatorMatrix, EigenSystem, OperatorMatrix};
pub use model::CoefSeries;
