//! Sieve bases on `[0,1]^d`: B-splines, boundary-corrected Daubechies
//! scaling functions, trigonometric and power series, their tensor products,
//! and the box-indicator weighting `w_n`.

mod bspline;
mod poly;
pub mod wavelet;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use bspline::BSpline;
pub use poly::{Legendre, Trig};
pub use wavelet::{daubechies_filter, shared_table, DaubechiesTable, WaveletSystem};

use crate::error::{config_err, Result, SieveError};
use crate::quadrature::QuadRule;

/// Default dyadic tabulation depth for Daubechies generators.
pub const DEFAULT_WAVELET_DEPTH: u32 = 12;

/// One-dimensional building block of a (tensor-product) sieve.
pub trait UnivariateBasis: Send + Sync + std::fmt::Debug {
    /// Number of functions `K0`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Clears `out` and writes the `(index, value)` pairs of the functions whose
    /// support contains `x`.
    fn eval_active(&self, x: f64, out: &mut Vec<(usize, f64)>);

    /// Like [`UnivariateBasis::eval_active`] for first derivatives.
    fn deriv_active(&self, x: f64, out: &mut Vec<(usize, f64)>);

    /// Closed support interval of function `k`.
    fn support(&self, k: usize) -> (f64, f64);

    /// Points where the functions may fail to be smooth (knots, dyadic points).
    fn breakpoints(&self) -> Vec<f64>;

    /// Rule under which the functions' Gram matrix is computed.
    fn gram_rule(&self) -> QuadRule;

    /// Coarser rule for integrals of non-smooth integrands (L² errors,
    /// Lebesgue-function integrals).
    fn integration_rule(&self) -> QuadRule;

    /// Upper bound on the number of simultaneously nonzero functions.
    fn max_active(&self) -> usize;
}

/// Univariate family and its parameters; every dimension uses the same one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// Order `r` (degree `r - 1`) splines with `m` uniform interior knots: `K0 = m + r`.
    BSpline { order: usize, interior_knots: usize },
    /// Daubechies scaling functions with `N` vanishing moments at level `J`: `K0 = 2^J`.
    Wavelet { vanishing_moments: usize, level: u32, depth: u32 },
    /// Trigonometric polynomials of the given degree: `K0 = 2 * degree + 1`.
    Trig { degree: usize },
    /// Polynomials of the given degree: `K0 = degree + 1`.
    Power { degree: usize },
}

impl Family {
    pub fn univariate_size(&self) -> usize {
        match *self {
            Family::BSpline { order, interior_knots } => order + interior_knots,
            Family::Wavelet { level, .. } => 1usize << level,
            Family::Trig { degree } => 2 * degree + 1,
            Family::Power { degree } => degree + 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::BSpline { .. } => "bspline",
            Family::Wavelet { .. } => "wavelet",
            Family::Trig { .. } => "trig",
            Family::Power { .. } => "power",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::BSpline { order, .. } if order == 0 => config_err("spline order r must be >= 1"),
            Family::Wavelet { vanishing_moments: n, .. } if !(1..=3).contains(&n) => {
                config_err(format!("wavelet vanishing moments N must be in 1..=3, got {n}"))
            }
            Family::Wavelet { vanishing_moments: n, level, .. } if n >= 2 && (1usize << level) <= 2 * n => {
                config_err(format!(
                    "wavelet level must satisfy 2^J > 2N: 2^{level} = {} <= {}",
                    1usize << level,
                    2 * n
                ))
            }
            Family::Wavelet { depth, .. } if !(10..=24).contains(&depth) => {
                config_err(format!("wavelet tabulation depth R must be in 10..=24, got {depth}"))
            }
            _ => Ok(()),
        }
    }
}

/// Closed axis-aligned box `D_n` inside `[0,1]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&t, (&a, &b))| t >= a && t <= b)
    }
}

/// A concrete sieve: univariate family, domain dimension and weighting region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: Family,
    pub dim: usize,
    /// `None` means the whole cube (no trimming).
    pub region: Option<Region>,
}

impl BasisSpec {
    pub fn new(family: Family, dim: usize) -> Self {
        BasisSpec { family, dim, region: None }
    }

    pub fn bspline(order: usize, interior_knots: usize) -> Self {
        Self::new(Family::BSpline { order, interior_knots }, 1)
    }

    /// Spline of order `order` with `size` functions (`m = size - order`).
    pub fn bspline_with_size(order: usize, size: usize) -> Result<Self> {
        if size < order {
            return config_err(format!("spline size K0 = {size} is smaller than its order {order}"));
        }
        Ok(Self::bspline(order, size - order))
    }

    pub fn wavelet(vanishing_moments: usize, level: u32) -> Self {
        Self::new(
            Family::Wavelet { vanishing_moments, level, depth: DEFAULT_WAVELET_DEPTH },
            1,
        )
    }

    pub fn haar(level: u32) -> Self {
        Self::wavelet(1, level)
    }

    pub fn trig(degree: usize) -> Self {
        Self::new(Family::Trig { degree }, 1)
    }

    pub fn power(degree: usize) -> Self {
        Self::new(Family::Power { degree }, 1)
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_region(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        self.region = Some(Region { lo, hi });
        self
    }

    pub fn with_depth(mut self, new_depth: u32) -> Self {
        if let Family::Wavelet { depth, .. } = &mut self.family {
            *depth = new_depth;
        }
        self
    }

    /// Total dimension `K = K0^d`.
    pub fn size(&self) -> usize {
        self.family.univariate_size().pow(self.dim as u32)
    }

    /// Ratio of largest to smallest knot spacing; uniform knots give 1.
    pub fn mesh_ratio(&self) -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return config_err("domain dimension d must be >= 1");
        }
        self.family.validate()?;
        if let Some(r) = &self.region {
            if r.lo.len() != self.dim || r.hi.len() != self.dim {
                return config_err(format!(
                    "weighting region needs {} lower and upper bounds",
                    self.dim
                ));
            }
            for (a, b) in r.lo.iter().zip(&r.hi) {
                if !(0.0 <= *a && a < b && *b <= 1.0) {
                    return config_err(format!("weighting region bounds [{a}, {b}] must satisfy 0 <= lo < hi <= 1"));
                }
            }
        }
        Ok(())
    }
}

/// An evaluable sieve. Immutable and cheap to clone; safe to share across threads.
#[derive(Clone, Debug)]
pub struct BasisSystem {
    spec: BasisSpec,
    uni: Arc<dyn UnivariateBasis>,
    k0: usize,
    k: usize,
}

/// Builds the sieve described by `spec`.
pub fn build_basis(spec: &BasisSpec) -> Result<BasisSystem> {
    BasisSystem::build(spec)
}

impl BasisSystem {
    pub fn build(spec: &BasisSpec) -> Result<Self> {
        spec.validate()?;
        let uni: Arc<dyn UnivariateBasis> = match spec.family {
            Family::BSpline { order, interior_knots } => Arc::new(BSpline::new(order, interior_knots)),
            Family::Wavelet { vanishing_moments, level, depth } => {
                let table = shared_table(vanishing_moments, depth)?;
                Arc::new(WaveletSystem::new(table, level)?)
            }
            Family::Trig { degree } => Arc::new(Trig::new(degree)),
            Family::Power { degree } => Arc::new(Legendre::new(degree)),
        };
        Self::from_univariate(spec.clone(), uni)
    }

    /// Wraps an already constructed univariate basis (e.g. a wavelet system
    /// built from a cached table).
    pub fn from_univariate(spec: BasisSpec, uni: Arc<dyn UnivariateBasis>) -> Result<Self> {
        spec.validate()?;
        let k0 = uni.len();
        if k0 != spec.family.univariate_size() {
            return config_err(format!(
                "univariate basis has {k0} functions, spec requires {}",
                spec.family.univariate_size()
            ));
        }
        let k = k0.pow(spec.dim as u32);
        Ok(BasisSystem { spec, uni, k0, k })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    /// Total number of functions `K`.
    pub fn size(&self) -> usize {
        self.k
    }

    pub fn univariate_size(&self) -> usize {
        self.k0
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn univariate(&self) -> &dyn UnivariateBasis {
        self.uni.as_ref()
    }

    pub fn region(&self) -> Option<&Region> {
        self.spec.region.as_ref()
    }

    /// Weighting indicator `w_n(x)`.
    pub fn weight(&self, x: &[f64]) -> bool {
        self.spec.region.as_ref().is_none_or(|r| r.contains(x))
    }

    pub fn check_domain(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.dim {
            return Err(SieveError::Dimension { expected: self.spec.dim, got: x.len() });
        }
        if x.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(SieveError::Domain { point: x.to_vec(), dim: self.spec.dim });
        }
        Ok(())
    }

    /// Nonzero entries of `b^K_w(x)` as `(index, value)` pairs, without a
    /// domain check. Empty outside the weighting region.
    pub fn active(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        if !self.weight(x) {
            return;
        }
        let mut scratch = Vec::new();
        self.uni.eval_active(x[0], out);
        for &t in &x[1..] {
            self.uni.eval_active(t, &mut scratch);
            let prev = std::mem::take(out);
            for &(i, a) in &prev {
                for &(j, b) in &scratch {
                    out.push((i * self.k0 + j, a * b));
                }
            }
        }
    }

    /// Dense `b^K_w(x)` written into `out` (length `K`), without a domain check.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut act = Vec::new();
        self.active(x, &mut act);
        for (i, v) in act {
            out[i] = v;
        }
    }

    /// `b^K_w(x)`; entries outside their support are exactly zero and the whole
    /// vector vanishes outside the weighting region.
    pub fn evaluate(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_domain(x)?;
        let mut v = DVector::zeros(self.k);
        self.evaluate_into(x, v.as_mut_slice());
        Ok(v)
    }

    /// `∇ b^K_w(x)` as a `K × d` matrix.
    pub fn evaluate_gradient(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(x)?;
        let d = self.spec.dim;
        let mut g = DMatrix::zeros(self.k, d);
        if !self.weight(x) {
            return Ok(g);
        }
        let mut vals = Vec::with_capacity(d);
        let mut ders = Vec::with_capacity(d);
        for &t in x {
            let mut v = Vec::new();
            let mut dv = Vec::new();
            self.uni.eval_active(t, &mut v);
            self.uni.deriv_active(t, &mut dv);
            vals.push(v);
            ders.push(dv);
        }
        for col in 0..d {
            // product over dims, using the derivative list in dimension `col`
            let mut acc: Vec<(usize, f64)> = vec![(0, 1.0)];
            for l in 0..d {
                let src = if l == col { &ders[l] } else { &vals[l] };
                let mut next = Vec::with_capacity(acc.len() * src.len());
                for &(i, a) in &acc {
                    for &(j, b) in src {
                        next.push((i * self.k0 + j, a * b));
                    }
                }
                acc = next;
            }
            for (i, v) in acc {
                g[(i, col)] += v;
            }
        }
        Ok(g)
    }

    /// Tensor index → per-dimension indices (first dimension slowest).
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.spec.dim];
        for slot in idx.iter_mut().rev() {
            *slot = k % self.k0;
            k /= self.k0;
        }
        idx
    }

    /// Support box of function `k`, one closed interval per dimension.
    pub fn support(&self, k: usize) -> Vec<(f64, f64)> {
        self.multi_index(k).into_iter().map(|i| self.uni.support(i)).collect()
    }

    fn region_bounds(&self, l: usize) -> (f64, f64) {
        match &self.spec.region {
            Some(r) => (r.lo[l], r.hi[l]),
            None => (0.0, 1.0),
        }
    }

    /// Per-dimension sup-norm grid: `points` uniform points, every breakpoint
    /// and every breakpoint midpoint, clipped to the weighting region.
    pub fn grid_1d(&self, l: usize, points: usize) -> Vec<f64> {
        let (lo, hi) = self.region_bounds(l);
        let bp = self.uni.breakpoints();
        let mut g: Vec<f64> = (0..points)
            .map(|i| i as f64 / (points.max(2) - 1) as f64)
            .chain(bp.iter().copied())
            .chain(bp.windows(2).map(|w| 0.5 * (w[0] + w[1])))
            .filter(|&t| t >= lo && t <= hi)
            .collect();
        g.push(lo);
        g.push(hi);
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.dedup();
        g
    }

    /// Default number of uniform grid points per dimension.
    pub fn default_grid_points(&self) -> usize {
        match self.spec.dim {
            1 => 4096,
            2 => 256,
            _ => 32,
        }
    }

    /// Tensor grid of evaluation points for sup norms (row-major, one point per entry).
    pub fn sup_grid(&self) -> Vec<Vec<f64>> {
        self.sup_grid_with(self.default_grid_points())
    }

    pub fn sup_grid_with(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.spec.dim).map(|l| self.grid_1d(l, points)).collect();
        tensor_points(&axes)
    }

    /// Gram quadrature rule in dimension `l`, restricted to the weighting region.
    pub fn gram_rule_1d(&self, l: usize) -> QuadRule {
        let (lo, hi) = self.region_bounds(l);
        self.uni.gram_rule().restrict(lo, hi)
    }

    /// Integration rule in dimension `l`, restricted to the weighting region.
    pub fn integration_rule_1d(&self, l: usize) -> QuadRule {
        let (lo, hi) = self.region_bounds(l);
        self.uni.integration_rule().restrict(lo, hi)
    }

    /// Same rule over all of [0, 1] (ignores the weighting region).
    pub fn integration_rule_full(&self) -> QuadRule {
        self.uni.integration_rule()
    }
}

pub(crate) fn tensor_points(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(pts.len() * axis.len());
        for p in &pts {
            for &t in axis {
                let mut q = p.clone();
                q.push(t);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Flat key-value form of a [`BasisSpec`], as used in configuration files.
///
/// `family` selects which of the remaining keys are meaningful; supplying a
/// key that does not belong to the family is an error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisBlock {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vanishing_moments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_hi: Option<Vec<f64>>,
}

impl BasisBlock {
    fn forbid(&self, family: &str, allowed: &[&str]) -> Result<()> {
        let present = [
            ("order", self.order.is_some()),
            ("knots", self.knots.is_some()),
            ("size", self.size.is_some()),
            ("vanishing_moments", self.vanishing_moments.is_some()),
            ("level", self.level.is_some()),
            ("depth", self.depth.is_some()),
            ("degree", self.degree.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return config_err(format!("key `{key}` is not valid for basis family `{family}`"));
            }
        }
        Ok(())
    }

    fn require<T: Copy>(v: Option<T>, key: &str, family: &str) -> Result<T> {
        v.ok_or_else(|| SieveError::Config(format!("basis family `{family}` requires key `{key}`")))
    }

    pub fn to_spec(&self) -> Result<BasisSpec> {
        let fam = self.family.as_str();
        let family = match fam {
            "bspline" => {
                self.forbid(fam, &["order", "knots", "size"])?;
                let order = Self::require(self.order, "order", fam)?;
                let interior_knots = match (self.knots, self.size) {
                    (Some(m), None) => m,
                    (None, Some(k)) if k >= order => k - order,
                    (None, Some(k)) => {
                        return config_err(format!("key `size` = {k} is smaller than `order` = {order}"))
                    }
                    (Some(_), Some(_)) => return config_err("keys `knots` and `size` are mutually exclusive"),
                    (None, None) => return config_err("basis family `bspline` requires key `knots` or `size`"),
                };
                Family::BSpline { order, interior_knots }
            }
            "wavelet" | "haar" => {
                self.forbid(fam, &["vanishing_moments", "level", "depth", "size"])?;
                let vanishing_moments = if fam == "haar" {
                    if self.vanishing_moments.is_some_and(|n| n != 1) {
                        return config_err("family `haar` implies `vanishing_moments` = 1");
                    }
                    1
                } else {
                    Self::require(self.vanishing_moments, "vanishing_moments", fam)?
                };
                let level = match (self.level, self.size) {
                    (Some(j), None) => j,
                    (None, Some(k)) if k.is_power_of_two() => k.trailing_zeros(),
                    (None, Some(k)) => return config_err(format!("key `size` = {k} must be a power of two for wavelets")),
                    (Some(_), Some(_)) => return config_err("keys `level` and `size` are mutually exclusive"),
                    (None, None) => return config_err(format!("basis family `{fam}` requires key `level` or `size`")),
                };
                Family::Wavelet {
                    vanishing_moments,
                    level,
                    depth: self.depth.unwrap_or(DEFAULT_WAVELET_DEPTH),
                }
            }
            "trig" => {
                self.forbid(fam, &["degree"])?;
                Family::Trig { degree: Self::require(self.degree, "degree", fam)? }
            }
            "power" => {
                self.forbid(fam, &["degree"])?;
                Family::Power { degree: Self::require(self.degree, "degree", fam)? }
            }
            other => {
                return config_err(format!(
                    "unknown basis family `{other}` (expected bspline, wavelet, haar, trig or power)"
                ))
            }
        };
        let dim = self.dim.unwrap_or(1);
        let region = match (&self.region_lo, &self.region_hi) {
            (Some(lo), Some(hi)) => Some(Region { lo: lo.clone(), hi: hi.clone() }),
            (None, None) => None,
            _ => return config_err("keys `region_lo` and `region_hi` must be given together"),
        };
        let spec = BasisSpec { family, dim, region };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &BasisSpec) -> Self {
        let mut b = BasisBlock {
            family: spec.family.name().to_string(),
            dim: Some(spec.dim),
            ..Default::default()
        };
        match spec.family {
            Family::BSpline { order, interior_knots } => {
                b.order = Some(order);
                b.knots = Some(interior_knots);
            }
            Family::Wavelet { vanishing_moments, level, depth } => {
                b.vanishing_moments = Some(vanishing_moments);
                b.level = Some(level);
                b.depth = Some(depth);
            }
            Family::Trig { degree } | Family::Power { degree } => b.degree = Some(degree),
        }
        if let Some(r) = &spec.region {
            b.region_lo = Some(r.lo.clone());
            b.region_hi = Some(r.hi.clone());
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_follow_family_rules() {
        assert_eq!(BasisSpec::bspline(3, 5).with_dim(2).size(), 64);
        assert_eq!(BasisSpec::wavelet(2, 4).with_dim(2).size(), 256);
        assert_eq!(BasisSpec::trig(3).size(), 7);
        assert_eq!(BasisSpec::power(0).size(), 1);
        assert_eq!(BasisSpec::bspline(2, 2).mesh_ratio(), 1.0);
    }

    #[test]
    fn level_constraint_names_itself() {
        let err = BasisSystem::build(&BasisSpec::wavelet(2, 2)).unwrap_err();
        assert!(err.to_string().contains("2^J > 2N"), "{err}");
    }

    #[test]
    fn domain_errors() {
        let b = BasisSystem::build(&BasisSpec::haar(2)).unwrap();
        assert!(matches!(b.evaluate(&[1.2]), Err(SieveError::Domain { .. })));
        assert!(matches!(b.evaluate(&[0.2, 0.3]), Err(SieveError::Dimension { .. })));
    }

    #[test]
    fn weighting_region_zeroes_everything() {
        let b = BasisSystem::build(&BasisSpec::bspline(3, 4).with_region(vec![0.2], vec![0.8])).unwrap();
        assert!(b.evaluate(&[0.1]).unwrap().iter().all(|&v| v == 0.0));
        assert!(b.evaluate(&[0.5]).unwrap().iter().any(|&v| v != 0.0));
        let g = b.evaluate_gradient(&[0.9]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_round_trip_and_key_checks() {
        let spec = BasisSpec::bspline(3, 9).with_region(vec![0.1], vec![0.9]);
        let block = BasisBlock::from_spec(&spec);
        assert_eq!(block.to_spec().unwrap(), spec);

        let bad = BasisBlock { family: "bspline".into(), order: Some(3), knots: Some(2), level: Some(3), ..Default::default() };
        let msg = bad.to_spec().unwrap_err().to_string();
        assert!(msg.contains("`level`"), "{msg}");

        let sized = BasisBlock { family: "bspline".into(), order: Some(3), size: Some(12), ..Default::default() };
        assert_eq!(sized.to_spec().unwrap().size(), 12);

        let haar = BasisBlock { family: "haar".into(), size: Some(8), ..Default::default() };
        assert_eq!(haar.to_spec().unwrap(), BasisSpec::haar(3));
    }
}
