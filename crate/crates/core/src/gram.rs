//! Gram matrices, Gram deviation norms, sup-norm constants of the sieve,
//! Lebesgue constants of the theoretical and empirical projections, and the
//! banded-inverse bound used for wavelet Grams.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::BasisSystem;
use crate::density::Density;
use crate::error::{Result, SieveError};
use crate::estimator::Design;
use crate::linalg;

/// Nonzero entries of `b^K_w(X_i)` for every sample point.
#[derive(Clone, Debug)]
pub struct SparseRows {
    pub k: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(basis: &BasisSystem, design: &Design) -> Result<Self> {
        design.check(basis)?;
        let rows = (0..design.len())
            .map(|i| {
                let mut v = Vec::new();
                basis.active(design.row(i), &mut v);
                v
            })
            .collect();
        Ok(SparseRows { k: basis.size(), rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// `B'B` (not divided by `n`).
    pub fn cross_product(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.k, self.k);
        for row in &self.rows {
            for &(i, a) in row {
                for &(j, b) in row {
                    m[(i, j)] += a * b;
                }
            }
        }
        m
    }

    /// `B'v`.
    pub fn transpose_times(&self, v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.k);
        for (row, &y) in self.rows.iter().zip(v) {
            for &(i, a) in row {
                out[i] += a * y;
            }
        }
        out
    }

    /// `B c`.
    pub fn times(&self, c: &DVector<f64>) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(i, a)| a * c[i]).sum()).collect()
    }

    /// Dense `n × K` copy of `B_w`.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n(), self.k);
        for (r, row) in self.rows.iter().enumerate() {
            for &(i, a) in row {
                b[(r, i)] = a;
            }
        }
        b
    }
}

/// One-dimensional Gram `∫ b b' f_l` over the (region-restricted) Gram rule of dimension `l`.
fn gram_1d(basis: &BasisSystem, l: usize, density: &Density) -> DMatrix<f64> {
    let k0 = basis.univariate_size();
    let uni = basis.univariate();
    let marginal = &density.marginals[l];
    let mut g = DMatrix::zeros(k0, k0);
    let mut act = Vec::new();
    basis.gram_rule_1d(l).for_each(|x, w| {
        uni.eval_active(x, &mut act);
        let wf = w * marginal.eval(x);
        for &(i, a) in &act {
            for &(j, b) in &act {
                g[(i, j)] += wf * a * b;
            }
        }
    });
    linalg::symmetrize(&g)
}

fn check_density(basis: &BasisSystem, density: &Density) -> Result<()> {
    if density.dim() != basis.dim() {
        return Err(SieveError::Dimension { expected: basis.dim(), got: density.dim() });
    }
    Ok(())
}

/// Theoretical Gram `E[b^K_w(X) b^K_w(X)']` under a product density, by
/// quadrature aligned with the basis breakpoints. Tensor bases give the
/// Kronecker product of the per-dimension Grams.
pub fn theoretical_gram(basis: &BasisSystem, density: &Density) -> Result<DMatrix<f64>> {
    check_density(basis, density)?;
    let mut g = gram_1d(basis, 0, density);
    for l in 1..basis.dim() {
        g = linalg::kron(&g, &gram_1d(basis, l, density));
    }
    Ok(g)
}

/// Empirical Gram `B_w'B_w / n`.
pub fn empirical_gram(basis: &BasisSystem, design: &Design) -> Result<DMatrix<f64>> {
    let rows = SparseRows::new(basis, design)?;
    Ok(rows.cross_product() / rows.n().max(1) as f64)
}

/// `‖G^{-1/2} G_emp G^{-1/2} − I‖` in spectral norm.
pub fn gram_deviation(g: &DMatrix<f64>, g_emp: &DMatrix<f64>) -> Result<f64> {
    let s = linalg::inv_sqrt_sym(g)?;
    let m = &s * g_emp * &s - DMatrix::identity(g.nrows(), g.ncols());
    Ok(linalg::spectral_norm_sym(&m))
}

/// `sup |n^{-1} Σ b(X_i)² − 1|` over sieve elements with `E[b(X)²] = 1`, which
/// equals the Gram deviation norm.
pub fn identifiability_gap(basis: &BasisSystem, density: &Density, design: &Design) -> Result<f64> {
    let g = theoretical_gram(basis, density)?;
    let g_emp = empirical_gram(basis, design)?;
    gram_deviation(&g, &g_emp)
}

/// `ζ_{K,n} = sup_x ‖b^K_w(x)‖` over the grid. The norm of a tensor-product
/// vector is the product of the univariate norms, so the sup factorises.
pub fn zeta(basis: &BasisSystem) -> f64 {
    let uni = basis.univariate();
    let mut act = Vec::new();
    (0..basis.dim())
        .map(|l| {
            basis
                .grid_1d(l, basis.default_grid_points())
                .into_iter()
                .map(|x| {
                    uni.eval_active(x, &mut act);
                    act.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max)
        })
        .product()
}

/// Serializable Gram diagnostics; matrices are kept alongside but skipped in JSON.
#[derive(Clone, Debug, Serialize)]
pub struct GramSummary {
    #[serde(skip)]
    pub g: DMatrix<f64>,
    #[serde(skip)]
    pub g_emp: DMatrix<f64>,
    pub k: usize,
    pub n: usize,
    pub dev: f64,
    pub zeta: f64,
    /// `λ_{K,n} = λ_min(G)^{-1/2}`; infinite when `G` is singular.
    pub lambda: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub bandwidth: usize,
}

/// Full Gram diagnostics of `basis` on `design` under `density`.
pub fn gram_summary(basis: &BasisSystem, density: &Density, design: &Design) -> Result<GramSummary> {
    let g = theoretical_gram(basis, density)?;
    let g_emp = empirical_gram(basis, design)?;
    let dev = gram_deviation(&g, &g_emp)?;
    let eig = linalg::sym_eigen(&g).0;
    let min = eig[0];
    let max = eig[eig.len() - 1];
    let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(GramSummary {
        k: basis.size(),
        n: design.len(),
        dev,
        zeta: zeta(basis),
        lambda: if min > 0.0 { min.powf(-0.5) } else { f64::INFINITY },
        min_eigenvalue: min,
        max_eigenvalue: max,
        bandwidth: linalg::half_bandwidth(&g, 1e-12 * scale),
        g,
        g_emp,
    })
}

/// Sup over the grid of the univariate Lebesgue function
/// `x ↦ ∫ |b(x)'G^{-1}b(y)| f_l(y) dy`.
fn lebesgue_1d(basis: &BasisSystem, l: usize, density: &Density) -> Result<f64> {
    let uni = basis.univariate();
    let g = gram_1d(basis, l, density);
    let (ginv, rank) = linalg::pinv_sym(&g);
    if rank < g.nrows() {
        return Err(SieveError::SingularGram { min_eigenvalue: linalg::min_eigenvalue(&g) });
    }
    let marginal = &density.marginals[l];
    let mut nodes: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    basis.integration_rule_1d(l).for_each(|y, w| {
        let mut act = Vec::new();
        uni.eval_active(y, &mut act);
        nodes.push((w * marginal.eval(y), act));
    });
    let grid = basis.grid_1d(l, basis.default_grid_points());
    let value = grid
        .par_iter()
        .map(|&x| {
            let mut act = Vec::new();
            uni.eval_active(x, &mut act);
            let mut a = DVector::zeros(ginv.nrows());
            for &(j, v) in &act {
                a.axpy(v, &ginv.column(j), 1.0);
            }
            nodes
                .iter()
                .map(|(wf, row)| wf * row.iter().map(|&(k, v)| a[k] * v).sum::<f64>().abs())
                .sum::<f64>()
        })
        .reduce(|| 0.0, f64::max);
    Ok(value)
}

/// `‖P_K‖_∞` of the theoretical `L²(X)` projection, evaluated on the grid.
/// Under a product density the projection kernel of a tensor basis is the
/// product of univariate kernels, so the constant is the product of the
/// univariate constants.
pub fn lebesgue_constant_theoretical(basis: &BasisSystem, density: &Density) -> Result<f64> {
    check_density(basis, density)?;
    (0..basis.dim()).map(|l| lebesgue_1d(basis, l, density)).product()
}

/// Empirical Lebesgue constant and the rank of `B_w'B_w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmpiricalLebesgue {
    pub value: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// `sup_x Σ_i |b^K_w(x)'(B_w'B_w)^- b^K_w(X_i)|` over the default grid.
pub fn lebesgue_constant_empirical(basis: &BasisSystem, design: &Design) -> Result<EmpiricalLebesgue> {
    let points = basis.sup_grid();
    lebesgue_constant_empirical_on(basis, design, &points)
}

/// As [`lebesgue_constant_empirical`] on caller-supplied evaluation points.
pub fn lebesgue_constant_empirical_on(
    basis: &BasisSystem,
    design: &Design,
    points: &[Vec<f64>],
) -> Result<EmpiricalLebesgue> {
    let rows = SparseRows::new(basis, design)?;
    let (m, rank) = linalg::pinv_sym(&rows.cross_product());
    let value = points
        .par_iter()
        .map(|x| {
            let mut act = Vec::new();
            basis.active(x, &mut act);
            if act.is_empty() {
                return 0.0;
            }
            let mut a = DVector::zeros(m.nrows());
            for &(j, v) in &act {
                a.axpy(v, &m.column(j), 1.0);
            }
            rows.rows
                .iter()
                .map(|row| row.iter().map(|&(k, v)| a[k] * v).sum::<f64>().abs())
                .sum::<f64>()
        })
        .reduce(|| 0.0, f64::max);
    Ok(EmpiricalLebesgue { value, rank, rank_deficient: rank < basis.size() })
}

/// Constants of the exponential-decay bound for inverses of banded SPD matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DmsBound {
    /// Even band parameter `m`: `A_{ij} = 0` for `|i − j| > m/2`.
    pub band: usize,
    pub kappa: f64,
    pub lambda_decay: f64,
    pub c: f64,
    /// Bound on `‖A^{-1}‖_{ℓ∞}`.
    pub bound: f64,
}

impl DmsBound {
    /// Entrywise bound `C λ^{|i−j|}` on `|(A^{-1})_{ij}|`.
    pub fn entry_bound(&self, i: usize, j: usize) -> f64 {
        self.c * self.lambda_decay.powi(i.abs_diff(j) as i32)
    }
}

/// Decay constants for a symmetric positive definite `A` with band parameter
/// `m` (even). Entries outside the band must vanish.
pub fn dms_bound(a: &DMatrix<f64>, m: usize) -> Result<DmsBound> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(SieveError::Numeric("banded-inverse bound needs a nonempty square matrix".into()));
    }
    if m % 2 != 0 {
        return Err(SieveError::Config(format!("band parameter m must be even, got {m}")));
    }
    let half = m / 2;
    let k = a.nrows();
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for i in 0..k {
        for j in 0..k {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(SieveError::Numeric(format!("matrix is not symmetric at ({i}, {j})")));
            }
            if i.abs_diff(j) > half && a[(i, j)] != 0.0 {
                return Err(SieveError::BandViolation { row: i, col: j, value: a[(i, j)], half_band: half });
            }
        }
    }
    let eig = linalg::sym_eigen(a).0;
    let (lmin, lmax) = (eig[0], eig[k - 1]);
    if lmin <= 0.0 {
        return Err(SieveError::NotPositiveDefinite(lmin));
    }
    let kappa = lmax / lmin;
    let sk = kappa.sqrt();
    let ratio = (sk - 1.0) / (sk + 1.0);
    let lambda_decay = if ratio <= 0.0 {
        0.0
    } else if m == 0 {
        0.0
    } else {
        ratio.powf(2.0 / m as f64)
    };
    let c = (1.0 / lmin) * f64::max(1.0, (1.0 + sk).powi(2) / (2.0 * kappa));
    Ok(DmsBound { band: m, kappa, lambda_decay, c, bound: 2.0 * c / (1.0 - lambda_decay) })
}
