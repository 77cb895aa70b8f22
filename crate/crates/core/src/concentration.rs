//! Matrix Bernstein tail bounds for sums of independent and β-mixing
//! random matrices, and Monte Carlo tail frequencies to compare them with.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::simulate::dgp::Regressor;
use crate::simulate::{stream_rng, STREAM_X};
use crate::stats::binomial_se;

/// Inputs of the tail bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBoundInput {
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    /// Almost-sure bound `R_n` on `‖Ξ_i‖`.
    pub r: f64,
    /// `σ_n²` for independent summands.
    pub sigma2: f64,
    /// `s_n²` for dependent summands.
    pub s2: f64,
    /// Block length.
    pub q: usize,
    /// `β(q)`.
    pub beta_q: f64,
    pub t: f64,
}

fn bernstein_exponent(t: f64, variance: f64, r: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let denom = variance + r * t / 3.0;
    if denom <= 0.0 {
        return 0.0;
    }
    (-(t * t / 2.0) / denom).exp()
}

/// `(d₁ + d₂) exp(−(t²/2) / (σ² + R t / 3))`, a bound on `P(‖Σ Ξ_i‖ ≥ t)`
/// for independent mean-zero summands.
pub fn tropp_bound(input: &TailBoundInput) -> f64 {
    (input.d1 + input.d2) as f64 * bernstein_exponent(input.t, input.sigma2, input.r)
}

/// `(n/q) β(q) + remainder_tail + 2(d₁ + d₂) exp(−(t²/2) / (n q s² + q R t / 3))`,
/// a bound on `P(‖Σ Ξ_i‖ ≥ 6t)` for β-mixing summands. `remainder_tail` is
/// `P(‖Σ_{i ∈ I_r} Ξ_i‖ ≥ t)` for the incomplete last block; it is zero when
/// `q` divides `n`.
pub fn mixing_bound(input: &TailBoundInput, remainder_tail: f64) -> Result<f64> {
    let TailBoundInput { n, q, .. } = *input;
    if q == 0 || 2 * q > n {
        return config_err(format!("block length q must lie in [1, n/2] = [1, {}], got {q}", n / 2));
    }
    if !(0.0..=1.0).contains(&remainder_tail) {
        return config_err(format!("remainder tail probability must lie in [0, 1], got {remainder_tail}"));
    }
    let qf = q as f64;
    let variance = n as f64 * qf * input.s2;
    Ok(n as f64 / qf * input.beta_q
        + remainder_tail
        + 2.0 * (input.d1 + input.d2) as f64 * bernstein_exponent(input.t, variance, qf * input.r))
}

/// Random-matrix sums with known constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailGenerator {
    /// `Ξ_i = 0` (`dim × dim`).
    Zero { dim: usize },
    /// Scalar `Ξ_i = ±1` with equal probability.
    Rademacher,
    /// `Ξ_i = n^{-1}(b(X_i) b(X_i)' − I)` for the Haar basis of level `level`,
    /// so that `‖Σ Ξ_i‖` is the Gram deviation.
    HaarGramDeviation { level: u32, regressor: Regressor },
}

/// Certified constants `(d, R_n, σ_n², s_n²)` of a generator with `n` summands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorConstants {
    pub dim: usize,
    pub r: f64,
    pub sigma2: f64,
    pub s2: f64,
}

impl TailGenerator {
    pub fn constants(&self, n: usize) -> GeneratorConstants {
        let nf = n as f64;
        match *self {
            TailGenerator::Zero { dim } => GeneratorConstants { dim, r: 0.0, sigma2: 0.0, s2: 0.0 },
            TailGenerator::Rademacher => GeneratorConstants { dim: 1, r: 1.0, sigma2: nf, s2: 1.0 },
            TailGenerator::HaarGramDeviation { level, .. } => {
                // b b' − I has eigenvalues K − 1 and −1; E[(bb' − I)²] = (K − 1) I;
                // cross moments are K² diag(P(k_i = k_j = k)) − I with entries in [−1, K − 1]
                let k = (1usize << level) as f64;
                GeneratorConstants { dim: 1 << level, r: (k - 1.0) / nf, sigma2: (k - 1.0) / nf, s2: (k - 1.0) / (nf * nf) }
            }
        }
    }

    pub fn beta_envelope(&self, q: usize) -> f64 {
        match self {
            TailGenerator::HaarGramDeviation { regressor, .. } => regressor.beta_envelope(q),
            _ => 0.0,
        }
    }

    /// `‖Σ_i Ξ_i‖` for replication `rep`.
    pub fn draw_norm(&self, n: usize, master: u64, rep: u64) -> f64 {
        let mut rng = stream_rng(master, rep, STREAM_X);
        match self {
            TailGenerator::Zero { .. } => 0.0,
            TailGenerator::Rademacher => {
                use rand::Rng;
                (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).sum::<f64>().abs()
            }
            TailGenerator::HaarGramDeviation { level, regressor } => {
                let k = 1usize << level;
                let xs = regressor.sample(n, 1, &mut rng);
                let mut counts = vec![0usize; k];
                for x in xs {
                    counts[((x * k as f64) as usize).min(k - 1)] += 1;
                }
                // the sum is diagonal with entries K c_k / n − 1
                counts
                    .iter()
                    .map(|&c| (k as f64 * c as f64 / n as f64 - 1.0).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// One row of an empirical tail table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailRow {
    pub t: f64,
    /// Level at which the frequency is measured (`t` or `6t`).
    pub threshold: f64,
    pub bound: f64,
    pub freq: f64,
    pub se: f64,
    pub reps: usize,
}

impl TailRow {
    /// `freq ≤ bound + 3 se`.
    pub fn valid(&self) -> bool {
        self.freq <= self.bound + 3.0 * self.se
    }
}

/// Monte Carlo frequency of `‖Σ Ξ_i‖ ≥ multiplier · t` for each `t`.
pub fn empirical_tail(
    generator: &TailGenerator,
    n: usize,
    t_grid: &[f64],
    multiplier: f64,
    reps: usize,
    master: u64,
) -> Vec<(f64, f64, f64)> {
    let norms: Vec<f64> = (0..reps as u64).into_par_iter().map(|r| generator.draw_norm(n, master, r)).collect();
    t_grid
        .iter()
        .map(|&t| {
            let thr = multiplier * t;
            let hits = norms.iter().filter(|&&v| v >= thr).count();
            let freq = hits as f64 / reps as f64;
            (t, freq, binomial_se(freq, reps))
        })
        .collect()
}

/// Tail study of one generator: independent generators are compared with
/// [`tropp_bound`] at `t`, dependent ones with [`mixing_bound`] at `6t`.
pub fn tail_study(
    generator: &TailGenerator,
    n: usize,
    q: usize,
    t_grid: &[f64],
    reps: usize,
    master: u64,
) -> Result<Vec<TailRow>> {
    let c = generator.constants(n);
    let mixing = matches!(
        generator,
        TailGenerator::HaarGramDeviation { regressor: Regressor::ArCopula { .. }, .. }
    );
    if mixing && n % q != 0 {
        return config_err(format!("block length q = {q} must divide n = {n}"));
    }
    let multiplier = if mixing { 6.0 } else { 1.0 };
    let freqs = empirical_tail(generator, n, t_grid, multiplier, reps, master);
    freqs
        .into_iter()
        .map(|(t, freq, se)| {
            let input = TailBoundInput {
                d1: c.dim,
                d2: c.dim,
                n,
                r: c.r,
                sigma2: c.sigma2,
                s2: c.s2,
                q,
                beta_q: generator.beta_envelope(q),
                t,
            };
            let bound = if mixing { mixing_bound(&input, 0.0)? } else { tropp_bound(&input) };
            Ok(TailRow { t, threshold: multiplier * t, bound, freq, se, reps })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn input() -> TailBoundInput {
        TailBoundInput { d1: 1, d2: 1, n: 100, r: 1.0, sigma2: 1.0, s2: 0.01, q: 5, beta_q: 0.001, t: 3.0 }
    }

    #[test]
    fn tropp_values() {
        let mut i = input();
        assert_abs_diff_eq!(tropp_bound(&i), 2.0 * (-2.25f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(tropp_bound(&i), 0.210_798_449_123_728_67, epsilon = 1e-15);
        i.t = 0.0;
        assert_eq!(tropp_bound(&i), 2.0);
        i.t = 1e6;
        assert!(tropp_bound(&i) < 1e-300);
    }

    #[test]
    fn mixing_values() {
        let mut i = input();
        i.t = 10.0;
        assert_abs_diff_eq!(mixing_bound(&i, 0.0).unwrap(), 0.417_962_321_979_433_84, epsilon = 1e-14);
        i.t = 0.0;
        assert_abs_diff_eq!(mixing_bound(&i, 0.1).unwrap(), 20.0 * 0.001 + 0.1 + 4.0, epsilon = 1e-14);
        i.beta_q = 0.0;
        i.t = 2.0;
        let want = 4.0 * (-2.0f64 / (100.0 * 5.0 * 0.01 + 5.0 * 2.0 / 3.0)).exp();
        assert_abs_diff_eq!(mixing_bound(&i, 0.0).unwrap(), want, epsilon = 1e-15);
        i.q = 51;
        assert!(mixing_bound(&i, 0.0).is_err());
        i.q = 0;
        assert!(mixing_bound(&i, 0.0).is_err());
    }

    #[test]
    fn mixing_reduces_to_tropp_exponent() {
        let mut i = input();
        i.q = 1;
        i.beta_q = 0.0;
        for t in [0.5, 2.0, 7.0] {
            i.t = t;
            let mut indep = i;
            indep.sigma2 = i.n as f64 * i.s2;
            assert_abs_diff_eq!(mixing_bound(&i, 0.0).unwrap(), 2.0 * tropp_bound(&indep), epsilon = 1e-15);
        }
    }

    #[test]
    fn monotonicity() {
        let mut prev = f64::INFINITY;
        let mut prev_m = f64::INFINITY;
        for j in 0..100 {
            let mut i = input();
            i.t = j as f64 * 0.3;
            let b = tropp_bound(&i);
            let m = mixing_bound(&i, 0.0).unwrap();
            assert!(b <= prev && m <= prev_m);
            prev = b;
            prev_m = m;
        }
        for s in [0.1, 0.5, 1.0, 2.0] {
            let mut a = input();
            a.sigma2 = s;
            let mut b = a;
            b.sigma2 = s * 1.5;
            assert!(tropp_bound(&a) <= tropp_bound(&b));
            b = a;
            b.r = a.r * 2.0;
            assert!(tropp_bound(&a) <= tropp_bound(&b));
        }
    }

    #[test]
    fn trivial_generators() {
        let grid = [0.0, 0.5, 1.0];
        let z = empirical_tail(&TailGenerator::Zero { dim: 3 }, 10, &grid, 1.0, 200, 1);
        assert_eq!(z[0].1, 1.0);
        assert!(z[1..].iter().all(|r| r.1 == 0.0));
        let r = empirical_tail(&TailGenerator::Rademacher, 100, &grid, 1.0, 200, 1);
        assert_eq!(r[0].1, 1.0);
    }

    #[test]
    fn haar_tails_respect_bounds() {
        let gen = TailGenerator::HaarGramDeviation { level: 3, regressor: Regressor::IidUniform };
        let grid: Vec<f64> = (0..10).map(|j| j as f64 * 0.2).collect();
        let rows = tail_study(&gen, 400, 1, &grid, 500, 3).unwrap();
        assert!(rows.iter().all(TailRow::valid));
    }
}
