//! Summary statistics used by the Monte Carlo studies.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

/// Median; sorts `v` in place. NaN for empty input.
pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Ordinary least-squares line `y ≈ a + b x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub r2: f64,
}

pub fn ols_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    LineFit { intercept, slope, slope_se, r2 }
}

/// Kolmogorov–Smirnov distance between the sample and a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_uniform(sample: &[f64]) -> f64 {
    ks_statistic(sample, |x| x.clamp(0.0, 1.0))
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for j in 1..=100 {
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * (j as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// KS test of a sample against `N(0,1)`: `(D, p-value)`.
pub fn ks_normal(sample: &[f64]) -> (f64, f64) {
    let normal = Normal::standard();
    let d = ks_statistic(sample, |x| normal.cdf(x));
    (d, ks_pvalue(d, sample.len()))
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Sample autocorrelation at `lag`.
pub fn autocorrelation(v: &[f64], lag: usize) -> f64 {
    let m = mean(v);
    let den: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    let num: f64 = v.iter().zip(&v[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    num / den
}

/// Binomial standard error of a frequency from `reps` trials.
pub fn binomial_se(freq: f64, reps: usize) -> f64 {
    (freq * (1.0 - freq) / reps as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.4 * v).collect();
        let f = ols_line(&x, &y);
        assert_abs_diff_eq!(f.slope, -0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(f.intercept, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ks_reference_values() {
        // kstwobign survival at (√n + 0.12 + 0.11/√n) d
        let d = 1.36 / 10000f64.sqrt();
        assert_abs_diff_eq!(ks_pvalue(d, 10000), 0.049044243801247, epsilon = 1e-10);
        assert_abs_diff_eq!(ks_uniform(&[0.5]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ks_uniform(&[0.125, 0.375, 0.625, 0.875]), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn correlations() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(correlation(&a, &[2.0, 4.0, 6.0, 8.0]), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(autocorrelation(&[1.0, -1.0, 1.0, -1.0], 1), -0.75, epsilon = 1e-14);
    }
}
