//! Regressor processes, martingale-difference errors and regression functions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{stream_rng, STREAM_EPS, STREAM_X};
use crate::error::{config_err, Result};
use crate::estimator::Design;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Regressor process on `[0,1]^d`; both variants have uniform marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regressor {
    IidUniform,
    /// `X = Φ(Z)` with `Z` a stationary Gaussian AR(1) per coordinate.
    ArCopula { rho: f64 },
}

impl Regressor {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regressor::ArCopula { rho } if !(rho.abs() < 1.0) => {
                config_err(format!("AR copula coefficient rho must satisfy |rho| < 1, got {rho}"))
            }
            _ => Ok(()),
        }
    }

    fn rho(&self) -> f64 {
        match *self {
            Regressor::IidUniform => 0.0,
            Regressor::ArCopula { rho } => rho,
        }
    }

    /// `n` draws of a `dim`-dimensional process. `rho = 0` reproduces the
    /// i.i.d. sequence from the same generator.
    pub fn sample<R: Rng>(&self, n: usize, dim: usize, rng: &mut R) -> Vec<f64> {
        let rho = self.rho();
        let innov = (1.0 - rho * rho).sqrt();
        let mut z = vec![0.0; dim];
        let mut out = Vec::with_capacity(n * dim);
        for i in 0..n {
            for zl in z.iter_mut() {
                let eta: f64 = StandardNormal.sample(rng);
                *zl = if i == 0 { eta } else { rho * *zl + innov * eta };
                out.push(norm_cdf(*zl));
            }
        }
        out
    }

    /// Envelope `4 ρ^q` for the β-mixing coefficient; zero for i.i.d. draws.
    pub fn beta_envelope(&self, q: usize) -> f64 {
        match *self {
            Regressor::IidUniform => 0.0,
            Regressor::ArCopula { rho } => 4.0 * rho.abs().powi(q as i32),
        }
    }
}

/// Innovation law of heteroskedastic errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Innovation {
    Gaussian,
    StudentT { df: f64 },
}

/// Error distribution; innovations are independent of the past and of `X_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorDist {
    Gaussian { sigma: f64 },
    StudentT { df: f64, scale: f64 },
    /// `σ(x) η` with `σ(x) = base + x₁(1 − x₁)`.
    Heteroskedastic { base: f64, innovation: Innovation },
}

impl ErrorDist {
    pub fn validate(&self) -> Result<()> {
        let df_ok = |df: f64| df > 0.0 && df.is_finite();
        match self {
            ErrorDist::Gaussian { sigma } if !(*sigma >= 0.0) => config_err(format!("sigma must be >= 0, got {sigma}")),
            ErrorDist::StudentT { df, .. } if !df_ok(*df) => config_err(format!("Student t df must be > 0, got {df}")),
            ErrorDist::StudentT { scale, .. } if !(*scale >= 0.0) => {
                config_err(format!("Student t scale must be >= 0, got {scale}"))
            }
            ErrorDist::Heteroskedastic { base, .. } if !(*base > 0.0) => {
                config_err(format!("heteroskedastic base scale must be > 0, got {base}"))
            }
            ErrorDist::Heteroskedastic { innovation: Innovation::StudentT { df }, .. } if !df_ok(*df) => {
                config_err(format!("Student t df must be > 0, got {df}"))
            }
            _ => Ok(()),
        }
    }

    /// Conditional standard deviation scale `σ(x)` (innovation variance aside).
    pub fn scale(&self, x: &[f64]) -> f64 {
        match *self {
            ErrorDist::Gaussian { sigma } => sigma,
            ErrorDist::StudentT { scale, .. } => scale,
            ErrorDist::Heteroskedastic { base, .. } => base + x[0] * (1.0 - x[0]),
        }
    }

    /// `E[ε² | X = x]`.
    pub fn variance(&self, x: &[f64]) -> f64 {
        let t_var = |df: f64| if df > 2.0 { df / (df - 2.0) } else { f64::INFINITY };
        let s = self.scale(x);
        match *self {
            ErrorDist::Gaussian { .. } | ErrorDist::Heteroskedastic { innovation: Innovation::Gaussian, .. } => s * s,
            ErrorDist::StudentT { df, .. } | ErrorDist::Heteroskedastic { innovation: Innovation::StudentT { df }, .. } => {
                s * s * t_var(df)
            }
        }
    }

    fn innovation<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDist::Gaussian { .. } | ErrorDist::Heteroskedastic { innovation: Innovation::Gaussian, .. } => {
                StandardNormal.sample(rng)
            }
            ErrorDist::StudentT { df, .. } | ErrorDist::Heteroskedastic { innovation: Innovation::StudentT { df }, .. } => {
                StudentT::new(df).expect("validated df").sample(rng)
            }
        }
    }
}

/// Regression function; multivariate versions are additive over coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `sin(2πx) + 0.3 cos(5x)`.
    SmoothSine,
    /// `(x − c)^{⌈p⌉−1} |x − c|^{p−⌈p⌉+1}`: Hölder smoothness exactly `p` at `c`.
    Holder { p: f64, center: f64 },
    /// `a + b x₁`.
    Linear { intercept: f64, slope: f64 },
}

impl TestFunction {
    fn eval_1d(&self, t: f64) -> f64 {
        match *self {
            TestFunction::SmoothSine => (2.0 * PI * t).sin() + 0.3 * (5.0 * t).cos(),
            TestFunction::Holder { p, center } => {
                let m = p.ceil();
                let s = t - center;
                s.powi(m as i32 - 1) * s.abs().powf(p - m + 1.0)
            }
            TestFunction::Linear { intercept, slope } => intercept + slope * t,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Linear { .. } => self.eval_1d(x[0]),
            _ => x.iter().map(|&t| self.eval_1d(t)).sum(),
        }
    }

    /// Declared Hölder smoothness (`∞` for analytic functions).
    pub fn smoothness(&self) -> f64 {
        match *self {
            TestFunction::Holder { p, .. } => p,
            _ => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TestFunction::Holder { p, center } if !(p > 0.0) || !(0.0..=1.0).contains(&center) => {
                config_err(format!("Holder test function needs p > 0 and center in [0, 1], got p = {p}, center = {center}"))
            }
            _ => Ok(()),
        }
    }
}

/// `Y_i = h₀(X_i) + ε_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub dim: usize,
    pub regressor: Regressor,
    pub error: ErrorDist,
    pub h0: TestFunction,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return config_err("dgp dimension must be >= 1");
        }
        self.regressor.validate()?;
        self.error.validate()?;
        self.h0.validate()
    }
}

/// Simulated sample with its noiseless regression values.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub design: Design,
    pub y: Vec<f64>,
    pub h0: Vec<f64>,
    pub eps: Vec<f64>,
}

/// Draws replication `rep` of `dgp` with `n` observations under `master` seed.
pub fn gen_sample(dgp: &DgpSpec, n: usize, master: u64, rep: u64) -> Result<Sample> {
    dgp.validate()?;
    if n == 0 {
        return config_err("sample size n must be >= 1");
    }
    let mut rx = stream_rng(master, rep, STREAM_X);
    let mut re = stream_rng(master, rep, STREAM_EPS);
    let design = Design::new(dgp.dim, dgp.regressor.sample(n, dgp.dim, &mut rx))?;
    let mut y = Vec::with_capacity(n);
    let mut h0 = Vec::with_capacity(n);
    let mut eps = Vec::with_capacity(n);
    for x in design.rows() {
        let h = dgp.h0.eval(x);
        let e = dgp.error.scale(x) * dgp.error.innovation(&mut re);
        h0.push(h);
        eps.push(e);
        y.push(h + e);
    }
    Ok(Sample { design, y, h0, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{stream_rng, STREAM_X};
    use crate::stats;

    fn spec(regressor: Regressor, error: ErrorDist) -> DgpSpec {
        DgpSpec { dim: 1, regressor, error, h0: TestFunction::SmoothSine }
    }

    #[test]
    fn rho_zero_matches_iid() {
        let e = ErrorDist::Gaussian { sigma: 1.0 };
        let a = gen_sample(&spec(Regressor::IidUniform, e.clone()), 500, 3, 0).unwrap();
        let b = gen_sample(&spec(Regressor::ArCopula { rho: 0.0 }, e), 500, 3, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_errors() {
        let s = gen_sample(&spec(Regressor::IidUniform, ErrorDist::Gaussian { sigma: 0.0 }), 100, 1, 0).unwrap();
        assert_eq!(s.y, s.h0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(gen_sample(&spec(Regressor::ArCopula { rho: 1.0 }, ErrorDist::Gaussian { sigma: 1.0 }), 5, 0, 0).is_err());
        assert!(gen_sample(&spec(Regressor::IidUniform, ErrorDist::StudentT { df: 0.0, scale: 1.0 }), 5, 0, 0).is_err());
    }

    #[test]
    fn ar_copula_marginals_are_uniform() {
        // the 99% band 1.63/√n, widened for ρ > 0 by the long-run variance
        // factor (1 + ρ)/(1 − ρ) of the latent chain
        let n = 100_000;
        for rho in [0.0, 0.5, 0.9] {
            let s = gen_sample(&spec(Regressor::ArCopula { rho }, ErrorDist::Gaussian { sigma: 1.0 }), n, 8, 0).unwrap();
            let d = stats::ks_uniform(s.design.as_slice());
            let band = 1.63 * ((1.0 + rho) / (1.0 - rho) / n as f64).sqrt();
            assert!(d < band, "rho {rho}: D = {d}, band {band}");
        }
    }

    #[test]
    fn ar_copula_terminal_values_are_uniform() {
        // last draws of independent chains are i.i.d. with the stationary marginal
        let reg = Regressor::ArCopula { rho: 0.9 };
        let last: Vec<f64> = (0..20_000u64)
            .map(|r| *reg.sample(30, 1, &mut stream_rng(12, r, STREAM_X)).last().unwrap())
            .collect();
        assert!(stats::ks_uniform(&last) < 1.63 / (20_000f64).sqrt());
    }

    #[test]
    fn ar_copula_is_dependent() {
        let s = gen_sample(&spec(Regressor::ArCopula { rho: 0.9 }, ErrorDist::Gaussian { sigma: 1.0 }), 20_000, 2, 0).unwrap();
        let x = s.design.as_slice();
        assert!(stats::autocorrelation(x, 1) > 0.8);
    }

    #[test]
    fn student_t_moments() {
        let s = gen_sample(&spec(Regressor::IidUniform, ErrorDist::StudentT { df: 3.0, scale: 0.5 }), 1_000_000, 4, 0).unwrap();
        let n = s.eps.len() as f64;
        let mean = s.eps.iter().sum::<f64>() / n;
        let var = s.eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05 * 0.75f64.sqrt());
        assert!((var / 0.75 - 1.0).abs() < 0.05, "variance {var}");
        // kurtosis of batches grows with batch size since E[ε⁴] = ∞
        let kurt = |b: &[f64]| {
            let m = b.iter().sum::<f64>() / b.len() as f64;
            let v = b.iter().map(|e| (e - m).powi(2)).sum::<f64>() / b.len() as f64;
            b.iter().map(|e| (e - m).powi(4)).sum::<f64>() / b.len() as f64 / (v * v)
        };
        let median_kurt = |size: usize| {
            let mut k: Vec<f64> = s.eps.chunks(size).map(kurt).collect();
            stats::median(&mut k)
        };
        assert!(median_kurt(100_000) > median_kurt(1_000));
    }

    #[test]
    fn errors_are_martingale_differences() {
        let dgp = DgpSpec {
            dim: 1,
            regressor: Regressor::ArCopula { rho: 0.5 },
            error: ErrorDist::Heteroskedastic { base: 0.5, innovation: Innovation::Gaussian },
            h0: TestFunction::SmoothSine,
        };
        let n = 50_000;
        let s = gen_sample(&dgp, n, 6, 0).unwrap();
        let band = 3.0 / (n as f64).sqrt();
        for lag in 1..=5 {
            assert!(stats::autocorrelation(&s.eps, lag).abs() < band);
        }
        let g: Vec<f64> = s.design.as_slice().iter().map(|x| (3.0 * x).cos()).collect();
        assert!(stats::correlation(&s.eps, &g).abs() < band);
    }

    #[test]
    fn holder_family() {
        let h = TestFunction::Holder { p: 2.0, center: 0.5 };
        assert!((h.eval(&[0.7]) - 0.04).abs() < 1e-15);
        assert!((h.eval(&[0.3]) + 0.04).abs() < 1e-15);
        let h = TestFunction::Holder { p: 1.5, center: 0.5 };
        assert!((h.eval(&[0.75]) - 0.25f64.powf(1.5)).abs() < 1e-15);
        assert_eq!(TestFunction::SmoothSine.eval(&[0.0, 0.0]), 0.6);
    }
}
