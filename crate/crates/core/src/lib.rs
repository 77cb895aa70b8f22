//! Series least-squares regression on linear sieves.
//!
//! The crate builds B-spline, boundary-corrected Daubechies wavelet,
//! trigonometric and Legendre (power series) bases on `[0,1]^d`, fits the
//! series least-squares estimator, reports Gram and projection diagnostics
//! (Gram deviation, Lebesgue constants, banded-inverse bounds), performs
//! sieve t-statistic inference for point and nonlinear functionals, evaluates
//! matrix Bernstein tail bounds for independent and beta-mixing sums, and runs
//! the Monte Carlo studies that check convergence rates and coverage.
//!
//! Module map:
//!
//! * [`basis`]: sieve construction and evaluation.
//! * [`gram`]: Gram matrices, deviation norms, Lebesgue constants, banded inverses.
//! * [`estimator`]: the least-squares fit and error functionals.
//! * [`inference`]: Riesz representers, sieve variances, t-statistics.
//! * [`concentration`]: matrix Bernstein tail bounds and empirical tails.
//! * [`simulate`]: data-generating processes and Monte Carlo studies.
//! * [`report`]: CSV/JSON serialisation of results.

pub mod basis;
pub mod concentration;
pub mod density;
pub mod error;
pub mod estimator;
pub mod gram;
pub mod inference;
pub mod linalg;
pub mod quadrature;
pub mod report;
pub mod simulate;
pub mod stats;

pub use basis::{BasisSpec, BasisSystem, Family, Region};
pub use density::{Density, Marginal};
pub use error::{Result, SieveError};
pub use estimator::{fit, Design, FitResult, OracleProjection};
pub use gram::{DmsBound, GramSummary};
pub use inference::{FunctionalReport, FunctionalSpec};
