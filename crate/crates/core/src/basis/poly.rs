//! Global bases: trigonometric polynomials and the power series, the latter
//! represented by shifted orthonormal Legendre polynomials (same span as
//! `1, x, ..., x^p`, but numerically stable).

use std::f64::consts::PI;

use super::UnivariateBasis;
use crate::quadrature::QuadRule;

/// `1, √2 cos(2πjx), √2 sin(2πjx)` for `j = 1..=degree`.
#[derive(Clone, Debug)]
pub struct Trig {
    degree: usize,
}

impl Trig {
    pub fn new(degree: usize) -> Self {
        Trig { degree }
    }
}

impl UnivariateBasis for Trig {
    fn len(&self) -> usize {
        2 * self.degree + 1
    }

    fn eval_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.push((0, 1.0));
        let s2 = std::f64::consts::SQRT_2;
        for j in 1..=self.degree {
            let a = 2.0 * PI * j as f64 * x;
            out.push((2 * j - 1, s2 * a.cos()));
            out.push((2 * j, s2 * a.sin()));
        }
    }

    fn deriv_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.push((0, 0.0));
        let s2 = std::f64::consts::SQRT_2;
        for j in 1..=self.degree {
            let w = 2.0 * PI * j as f64;
            let a = w * x;
            out.push((2 * j - 1, -s2 * w * a.sin()));
            out.push((2 * j, s2 * w * a.cos()));
        }
    }

    fn support(&self, _k: usize) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, 1.0]
    }

    fn gram_rule(&self) -> QuadRule {
        QuadRule::uniform_panels(64.max(4 * self.degree))
    }

    fn integration_rule(&self) -> QuadRule {
        QuadRule::uniform_panels(256.max(8 * self.degree))
    }

    fn max_active(&self) -> usize {
        self.len()
    }
}

/// `sqrt(2k+1) P_k(2x - 1)` for `k = 0..=degree`.
#[derive(Clone, Debug)]
pub struct Legendre {
    degree: usize,
}

impl Legendre {
    pub fn new(degree: usize) -> Self {
        Legendre { degree }
    }

    /// Unnormalised `P_k(s)` and `P_k'(s)` for `k = 0..=degree`.
    fn raw(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.degree + 1;
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        p[0] = 1.0;
        if n > 1 {
            p[1] = s;
            dp[1] = 1.0;
        }
        for k in 1..n.saturating_sub(1) {
            let kf = k as f64;
            p[k + 1] = ((2.0 * kf + 1.0) * s * p[k] - kf * p[k - 1]) / (kf + 1.0);
            dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
        }
        (p, dp)
    }
}

impl UnivariateBasis for Legendre {
    fn len(&self) -> usize {
        self.degree + 1
    }

    fn eval_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (p, _) = self.raw(2.0 * x - 1.0);
        out.extend(
            p.into_iter()
                .enumerate()
                .map(|(k, v)| (k, (2.0 * k as f64 + 1.0).sqrt() * v)),
        );
    }

    fn deriv_active(&self, x: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (_, dp) = self.raw(2.0 * x - 1.0);
        out.extend(
            dp.into_iter()
                .enumerate()
                .map(|(k, v)| (k, 2.0 * (2.0 * k as f64 + 1.0).sqrt() * v)),
        );
    }

    fn support(&self, _k: usize) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![0.0, 1.0]
    }

    fn gram_rule(&self) -> QuadRule {
        QuadRule::uniform_panels(64.max(4 * self.degree))
    }

    fn integration_rule(&self) -> QuadRule {
        QuadRule::uniform_panels(256.max(8 * self.degree))
    }

    fn max_active(&self) -> usize {
        self.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gram(b: &dyn UnivariateBasis) -> Vec<Vec<f64>> {
        let k = b.len();
        let mut g = vec![vec![0.0; k]; k];
        let mut out = Vec::new();
        b.gram_rule().for_each(|x, w| {
            b.eval_active(x, &mut out);
            for &(i, vi) in &out {
                for &(j, vj) in &out {
                    g[i][j] += w * vi * vj;
                }
            }
        });
        g
    }

    #[test]
    fn legendre_and_trig_are_orthonormal() {
        for b in [&Legendre::new(9) as &dyn UnivariateBasis, &Trig::new(4)] {
            let g = gram(b);
            for (i, row) in g.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn legendre_endpoint_norm_is_k() {
        let b = Legendre::new(7);
        let mut out = Vec::new();
        b.eval_active(1.0, &mut out);
        let n2: f64 = out.iter().map(|p| p.1 * p.1).sum();
        assert_abs_diff_eq!(n2.sqrt(), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn legendre_derivative_matches_finite_difference() {
        let b = Legendre::new(6);
        let (mut d, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
        let h = 1e-6;
        for &x in &[0.1, 0.37, 0.8] {
            b.deriv_active(x, &mut d);
            b.eval_active(x - h, &mut lo);
            b.eval_active(x + h, &mut hi);
            for k in 0..b.len() {
                let fd = (hi[k].1 - lo[k].1) / (2.0 * h);
                assert!((fd - d[k].1).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }
}
