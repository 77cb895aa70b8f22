//! The weighted series least-squares estimator, the empirical projection of a
//! known regression function, and sup/L² error functionals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{tensor_points, BasisSystem};
use crate::density::Density;
use crate::error::{Result, SieveError};
use crate::gram::SparseRows;
use crate::linalg;

/// Regressor sample `X_1, …, X_n` in `[0,1]^d`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    dim: usize,
    data: Vec<f64>,
}

impl Design {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(SieveError::Config(format!(
                "design of dimension {dim} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Design { dim, data })
    }

    pub fn from_1d(xs: &[f64]) -> Self {
        Design { dim: 1, data: xs.to_vec() }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(SieveError::Dimension { expected: dim, got: r.len() });
        }
        Design::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Checks dimensions and that every point lies in the unit cube.
    pub fn check(&self, basis: &BasisSystem) -> Result<()> {
        if self.dim != basis.dim() {
            return Err(SieveError::Dimension { expected: basis.dim(), got: self.dim });
        }
        for x in self.rows() {
            basis.check_domain(x)?;
        }
        Ok(())
    }
}

/// Least-squares solution for a fixed design, reusable across responses.
#[derive(Clone, Debug)]
pub struct Solver {
    rows: SparseRows,
    q: DMatrix<f64>,
    /// `V Σ^+ U'` from the SVD of the triangular factor.
    r_pinv: DMatrix<f64>,
    rank: usize,
}

impl Solver {
    pub fn new(basis: &BasisSystem, design: &Design) -> Result<Self> {
        if design.is_empty() {
            return Err(SieveError::Config("least-squares fit needs n >= 1 observations".into()));
        }
        let rows = SparseRows::new(basis, design)?;
        let qr = rows.dense().qr();
        let q = qr.q();
        let r = qr.r();
        let svd = r.svd(true, true);
        let smax = svd.singular_values.max();
        let tol = linalg::rank_tolerance(basis.size(), smax);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol && s > 0.0).count();
        let r_pinv = svd
            .pseudo_inverse(tol.max(f64::MIN_POSITIVE))
            .map_err(|e| SieveError::Numeric(e.to_string()))?;
        Ok(Solver { rows, q, r_pinv, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rows(&self) -> &SparseRows {
        &self.rows
    }

    /// `(B'B)^- B'y` computed from the orthogonal factorization.
    pub fn solve(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.rows.n() {
            return Err(SieveError::Dimension { expected: self.rows.n(), got: y.len() });
        }
        let qty = self.q.tr_mul(&DVector::from_column_slice(y));
        Ok(&self.r_pinv * qty)
    }
}

/// A fitted series regression `ĥ(x) = b^K_w(x)'c`.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub basis: BasisSystem,
    pub coeffs: DVector<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    /// `ĥ(x)`; zero outside the weighting region.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.basis.check_domain(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let mut act = Vec::new();
        self.basis.active(x, &mut act);
        act.iter().map(|&(i, v)| v * self.coeffs[i]).sum()
    }
}

fn fit_with(basis: &BasisSystem, solver: &Solver, y: &[f64]) -> Result<FitResult> {
    let coeffs = solver.solve(y)?;
    let fitted = solver.rows.times(&coeffs);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(FitResult {
        basis: basis.clone(),
        coeffs,
        fitted,
        residuals,
        rank: solver.rank,
        rank_deficient: solver.rank < basis.size(),
    })
}

/// Series least-squares fit `c = (B_w'B_w)^- B_w'Y`.
pub fn fit(basis: &BasisSystem, design: &Design, y: &[f64]) -> Result<FitResult> {
    let solver = Solver::new(basis, design)?;
    fit_with(basis, &solver, y)
}

/// Fit that reuses a precomputed [`Solver`] for the same basis and design.
pub fn fit_solver(basis: &BasisSystem, solver: &Solver, y: &[f64]) -> Result<FitResult> {
    fit_with(basis, solver, y)
}

/// `h̃ = P_{K,w,n} h₀`: least-squares fit of the noiseless values `h₀(X_i)`.
#[derive(Clone, Debug)]
pub struct OracleProjection {
    pub fit: FitResult,
}

impl OracleProjection {
    pub fn coeffs(&self) -> &DVector<f64> {
        &self.fit.coeffs
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.fit.eval(x)
    }
}

pub fn project_oracle(basis: &BasisSystem, design: &Design, h0: impl Fn(&[f64]) -> f64) -> Result<OracleProjection> {
    let y: Vec<f64> = design.rows().map(&h0).collect();
    Ok(OracleProjection { fit: fit(basis, design, &y)? })
}

/// `max |f − g|` over `points`.
pub fn sup_error(f: impl Fn(&[f64]) -> f64, g: impl Fn(&[f64]) -> f64, points: &[Vec<f64>]) -> f64 {
    points.iter().map(|x| (f(x) - g(x)).abs()).fold(0.0, f64::max)
}

/// `‖f − g‖_{L²(X)}` under `density`, using the integration rule of `basis`
/// (region-restricted, tensorised across dimensions).
pub fn l2_error(
    f: impl Fn(&[f64]) -> f64,
    g: impl Fn(&[f64]) -> f64,
    basis: &BasisSystem,
    density: &Density,
) -> Result<f64> {
    if density.dim() != basis.dim() {
        return Err(SieveError::Dimension { expected: basis.dim(), got: density.dim() });
    }
    let axes: Vec<Vec<(f64, f64)>> = (0..basis.dim()).map(|l| basis.integration_rule_1d(l).nodes()).collect();
    let xs: Vec<Vec<f64>> = axes.iter().map(|a| a.iter().map(|p| p.0).collect()).collect();
    let ws: Vec<Vec<f64>> = axes.iter().map(|a| a.iter().map(|p| p.1).collect()).collect();
    let points = tensor_points(&xs);
    let weights = tensor_points(&ws);
    let s: f64 = points
        .iter()
        .zip(&weights)
        .map(|(x, w)| {
            let e = f(x) - g(x);
            w.iter().product::<f64>() * density.eval(x) * e * e
        })
        .sum();
    Ok(s.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisSpec;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn uniform_xs(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn constant_basis_gives_mean() {
        let b = BasisSystem::build(&BasisSpec::power(0)).unwrap();
        let y = [1.0, 4.0, -2.0, 7.5];
        let f = fit(&b, &Design::from_1d(&[0.1, 0.2, 0.5, 0.9]), &y).unwrap();
        assert_abs_diff_eq!(f.eval(&[0.33]).unwrap(), 2.625, epsilon = 1e-12);
    }

    #[test]
    fn balanced_haar_coefficients() {
        let b = BasisSystem::build(&BasisSpec::haar(2)).unwrap();
        let f = fit(&b, &Design::from_1d(&[0.1, 0.3, 0.6, 0.9]), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        for (c, want) in f.coeffs.iter().zip([0.5, 1.0, 1.5, 2.0]) {
            assert_abs_diff_eq!(*c, want, epsilon = 1e-12);
        }
        assert!(!f.rank_deficient);
    }

    #[test]
    fn reproduces_elements_of_the_span() {
        let b = BasisSystem::build(&BasisSpec::bspline(2, 3)).unwrap();
        let xs = uniform_xs(50, 1);
        let y: Vec<f64> = xs.iter().map(|x| 0.7 - 2.0 * x).collect();
        let f = fit(&b, &Design::from_1d(&xs), &y).unwrap();
        for (a, b) in f.fitted.iter().zip(&y) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let p = project_oracle(&b, &Design::from_1d(&xs), |x| 0.7 - 2.0 * x[0]).unwrap();
        assert_abs_diff_eq!(p.eval(&[0.42]).unwrap(), 0.7 - 0.84, epsilon = 1e-10);
    }

    #[test]
    fn residuals_orthogonal_and_refit_idempotent() {
        let b = BasisSystem::build(&BasisSpec::bspline(3, 5)).unwrap();
        let xs = uniform_xs(200, 2);
        let y: Vec<f64> = xs.iter().map(|x| (7.0 * x).sin() + x * x).collect();
        let design = Design::from_1d(&xs);
        let f = fit(&b, &design, &y).unwrap();
        let rows = SparseRows::new(&b, &design).unwrap();
        let ortho = rows.transpose_times(&f.residuals).amax();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(ortho <= 1e-8 * ynorm);
        let refit = fit(&b, &design, &f.fitted).unwrap();
        assert!((&refit.coeffs - &f.coeffs).amax() < 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_flagged() {
        let b = BasisSystem::build(&BasisSpec::haar(2)).unwrap();
        let f = fit(&b, &Design::from_1d(&[0.1, 0.15, 0.6]), &[1.0, 3.0, 5.0]).unwrap();
        assert!(f.rank_deficient);
        assert_eq!(f.rank, 2);
        assert_abs_diff_eq!(f.coeffs[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.coeffs[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn weighting_region_zeroes_fit_outside() {
        let b = BasisSystem::build(&BasisSpec::bspline(3, 4).with_region(vec![0.2], vec![0.7])).unwrap();
        let xs = uniform_xs(300, 3);
        let y: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let f = fit(&b, &Design::from_1d(&xs), &y).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            if !(0.2..=0.7).contains(&x) {
                assert_eq!(f.eval(&[x]).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn error_functionals() {
        let b = BasisSystem::build(&BasisSpec::bspline(3, 6)).unwrap();
        let u = Density::uniform(1);
        let grid = b.sup_grid();
        assert_eq!(sup_error(|x| x[0], |x| x[0], &grid), 0.0);
        assert_abs_diff_eq!(sup_error(|x| x[0] + 0.3, |x| x[0], &grid), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(l2_error(|x| x[0] + 0.3, |x| x[0], &b, &u).unwrap(), 0.3, epsilon = 1e-12);
        let e = l2_error(|x| (2.0 * PI * x[0]).sin(), |_| 0.0, &b, &u).unwrap();
        assert_abs_diff_eq!(e, 0.5f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn design_validation() {
        let b = BasisSystem::build(&BasisSpec::haar(2)).unwrap();
        assert!(matches!(fit(&b, &Design::from_1d(&[1.5]), &[0.0]), Err(SieveError::Domain { .. })));
        assert!(Design::new(2, vec![0.1, 0.2, 0.3]).is_err());
        assert!(fit(&b, &Design::from_1d(&[]), &[]).is_err());
    }
}
