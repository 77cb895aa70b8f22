//! Monte Carlo studies: convergence rates, confidence-interval coverage,
//! Gram deviation scaling and Lebesgue-constant stability.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{gen_sample, DgpSpec, Regressor, TestFunction};
use super::stream_rng;
use super::STREAM_X;
use crate::basis::{BasisSpec, BasisSystem, DEFAULT_WAVELET_DEPTH};
use crate::density::Density;
use crate::error::{config_err, Result, SieveError};
use crate::estimator::{fit_solver, l2_error, sup_error, Design, Solver};
use crate::gram::{gram_deviation, lebesgue_constant_empirical, theoretical_gram, SparseRows};
use crate::inference::{analyze_rows, FunctionalSpec};
use crate::stats::{self, LineFit};

/// Sieve family whose size is chosen by a [`KRule`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisTemplate {
    Bspline { order: usize },
    Wavelet { vanishing_moments: usize, #[serde(default = "default_depth")] depth: u32 },
    Trig,
    Power,
}

fn default_depth() -> u32 {
    DEFAULT_WAVELET_DEPTH
}

impl BasisTemplate {
    pub fn name(&self) -> String {
        match self {
            BasisTemplate::Bspline { order } => format!("bspline_r{order}"),
            BasisTemplate::Wavelet { vanishing_moments: 1, .. } => "haar".into(),
            BasisTemplate::Wavelet { vanishing_moments, .. } => format!("wavelet_n{vanishing_moments}"),
            BasisTemplate::Trig => "trig".into(),
            BasisTemplate::Power => "power".into(),
        }
    }

    /// Spec whose univariate size is as close to `k0` as the family allows.
    pub fn with_size(&self, k0: usize, dim: usize) -> BasisSpec {
        let spec = match *self {
            BasisTemplate::Bspline { order } => BasisSpec::bspline(order, k0.saturating_sub(order)),
            BasisTemplate::Wavelet { vanishing_moments, depth } => {
                let mut j = (k0.max(1) as f64).log2().round() as u32;
                if vanishing_moments >= 2 {
                    while (1usize << j) <= 2 * vanishing_moments {
                        j += 1;
                    }
                }
                BasisSpec::wavelet(vanishing_moments, j).with_depth(depth)
            }
            BasisTemplate::Trig => BasisSpec::trig(k0.saturating_sub(1) / 2),
            BasisTemplate::Power => BasisSpec::power(k0.max(1) - 1),
        };
        spec.with_dim(dim)
    }
}

/// `K = round(c (n / log n)^exponent)`, split evenly across dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KRule {
    pub constant: f64,
    pub exponent: f64,
}

impl KRule {
    /// Rule `d / (2p + d)` for smoothness `p`.
    pub fn optimal(constant: f64, p: f64, dim: usize) -> Self {
        let d = dim as f64;
        KRule { constant, exponent: d / (2.0 * p + d) }
    }

    pub fn total(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.constant * (nf / nf.ln()).powf(self.exponent)
    }

    /// Per-dimension size `K0`.
    pub fn per_dim(&self, n: usize, dim: usize) -> usize {
        (self.total(n).powf(1.0 / dim as f64).round() as usize).max(1)
    }
}

/// Sieve chosen by `rule` for sample size `n`.
pub fn k_rule(template: &BasisTemplate, rule: &KRule, n: usize, dim: usize) -> BasisSpec {
    template.with_size(rule.per_dim(n, dim), dim)
}

fn check_grid(ns: &[usize], reps: usize) -> Result<()> {
    if ns.is_empty() || ns.iter().any(|&n| n < 2) {
        return config_err("sample-size grid must be nonempty with every n >= 2");
    }
    if reps == 0 {
        return config_err("`reps` must be >= 1");
    }
    Ok(())
}

fn rep_id(n_index: usize, rep: usize) -> u64 {
    ((n_index as u64) << 32) | rep as u64
}

/// Sup-norm and L² convergence-rate study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub dgp: DgpSpec,
    pub basis: BasisTemplate,
    pub k_rule: KRule,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub rep: usize,
    pub k: usize,
    pub sup_error: f64,
    pub l2_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSummary {
    pub n: usize,
    pub k: usize,
    pub median_sup: f64,
    pub median_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub per_n: Vec<RateSummary>,
    /// Fit of `log median sup error` on `log(n / log n)`.
    pub sup_slope: LineFit,
    pub l2_slope: LineFit,
    #[serde(skip)]
    pub rows: Vec<RateRow>,
}

fn summarize_rates(cfg_ns: &[usize], rows: Vec<RateRow>) -> RateReport {
    let per_n: Vec<RateSummary> = cfg_ns
        .iter()
        .map(|&n| {
            let sel: Vec<&RateRow> = rows.iter().filter(|r| r.n == n).collect();
            let mut s: Vec<f64> = sel.iter().map(|r| r.sup_error).collect();
            let mut l: Vec<f64> = sel.iter().map(|r| r.l2_error).collect();
            RateSummary { n, k: sel[0].k, median_sup: stats::median(&mut s), median_l2: stats::median(&mut l) }
        })
        .collect();
    let x: Vec<f64> = per_n.iter().map(|s| (s.n as f64 / (s.n as f64).ln()).ln()).collect();
    let ys: Vec<f64> = per_n.iter().map(|s| s.median_sup.ln()).collect();
    let yl: Vec<f64> = per_n.iter().map(|s| s.median_l2.ln()).collect();
    RateReport { sup_slope: stats::ols_line(&x, &ys), l2_slope: stats::ols_line(&x, &yl), per_n, rows }
}

pub fn rate_study(cfg: &RateConfig) -> Result<RateReport> {
    check_grid(&cfg.n_grid, cfg.reps)?;
    cfg.dgp.validate()?;
    let density = Density::uniform(cfg.dgp.dim);
    let jobs: Vec<(usize, usize)> =
        (0..cfg.n_grid.len()).flat_map(|i| (0..cfg.reps).map(move |r| (i, r))).collect();
    let bases: Vec<BasisSystem> = cfg
        .n_grid
        .iter()
        .map(|&n| BasisSystem::build(&k_rule(&cfg.basis, &cfg.k_rule, n, cfg.dgp.dim)))
        .collect::<Result<_>>()?;
    let grids: Vec<Vec<Vec<f64>>> = bases.iter().map(|b| b.sup_grid()).collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let n = cfg.n_grid[i];
            let basis = &bases[i];
            let sample = gen_sample(&cfg.dgp, n, cfg.seed, rep_id(i, rep))?;
            let solver = Solver::new(basis, &sample.design)?;
            let f = fit_solver(basis, &solver, &sample.y)?;
            let h0 = |x: &[f64]| cfg.dgp.h0.eval(x);
            let fh = |x: &[f64]| f.eval_unchecked(x);
            Ok(RateRow {
                n,
                rep,
                k: basis.size(),
                sup_error: sup_error(fh, h0, &grids[i]),
                l2_error: l2_error(fh, h0, basis, &density)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_rates(&cfg.n_grid, rows))
}

/// Rate study with the estimator replaced by an oracle whose error is exactly
/// `c (n / log n)^{-rate}`; validates the slope fitter and report plumbing.
pub fn rate_study_synthetic(cfg: &RateConfig, c: f64, rate: f64) -> Result<RateReport> {
    check_grid(&cfg.n_grid, cfg.reps)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let e = c * (n as f64 / (n as f64).ln()).powf(-rate);
        let k = k_rule(&cfg.basis, &cfg.k_rule, n, cfg.dgp.dim).size();
        for rep in 0..cfg.reps {
            rows.push(RateRow { n, rep, k, sup_error: e, l2_error: e });
        }
    }
    Ok(summarize_rates(&cfg.n_grid, rows))
}

/// Confidence-interval coverage study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    pub dgp: DgpSpec,
    pub basis: BasisTemplate,
    pub k_rule: KRule,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub level: f64,
    pub functionals: Vec<FunctionalSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageRow {
    pub rep: usize,
    pub functional: usize,
    pub fhat: f64,
    pub vk_hat: f64,
    pub t: f64,
    pub lo: f64,
    pub hi: f64,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub functional: FunctionalSpec,
    pub truth: f64,
    pub coverage: f64,
    pub mean_length: f64,
    pub degenerate: usize,
    pub ks_statistic: f64,
    pub ks_pvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub k: usize,
    pub summaries: Vec<CoverageSummary>,
    #[serde(skip)]
    pub rows: Vec<CoverageRow>,
}

pub fn coverage_study(cfg: &CoverageConfig) -> Result<CoverageReport> {
    check_grid(&[cfg.n], cfg.reps)?;
    cfg.dgp.validate()?;
    if cfg.functionals.is_empty() {
        return config_err("coverage study needs at least one functional");
    }
    let basis = BasisSystem::build(&k_rule(&cfg.basis, &cfg.k_rule, cfg.n, cfg.dgp.dim))?;
    let truths: Vec<f64> = cfg
        .functionals
        .iter()
        .map(|f| f.apply(|x| cfg.dgp.h0.eval(x), &basis))
        .collect::<Result<_>>()?;
    let per_rep: Vec<Vec<Option<CoverageRow>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let sample = gen_sample(&cfg.dgp, cfg.n, cfg.seed, rep as u64)?;
            let solver = Solver::new(&basis, &sample.design)?;
            let f = fit_solver(&basis, &solver, &sample.y)?;
            let rows: &SparseRows = solver.rows();
            cfg.functionals
                .iter()
                .zip(&truths)
                .enumerate()
                .map(|(j, (spec, &truth))| match analyze_rows(&f, rows, spec, cfg.level, Some(truth)) {
                    Ok(r) => Ok(Some(CoverageRow {
                        rep,
                        functional: j,
                        fhat: r.fhat,
                        vk_hat: r.vk_hat,
                        t: r.tstat.unwrap_or(f64::NAN),
                        lo: r.ci.0,
                        hi: r.ci.1,
                        covered: r.covers(truth),
                    })),
                    Err(SieveError::DegenerateVariance(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (j, spec) in cfg.functionals.iter().enumerate() {
        let ok: Vec<CoverageRow> = per_rep.iter().filter_map(|r| r[j].clone()).collect();
        let degenerate = cfg.reps - ok.len();
        let m = ok.len().max(1) as f64;
        let ts: Vec<f64> = ok.iter().map(|r| r.t).collect();
        let (d, p) = if ts.is_empty() { (f64::NAN, f64::NAN) } else { stats::ks_normal(&ts) };
        summaries.push(CoverageSummary {
            functional: spec.clone(),
            truth: truths[j],
            coverage: ok.iter().filter(|r| r.covered).count() as f64 / m,
            mean_length: ok.iter().map(|r| r.hi - r.lo).sum::<f64>() / m,
            degenerate,
            ks_statistic: d,
            ks_pvalue: p,
        });
        rows.extend(ok);
    }
    rows.sort_by_key(|r| (r.rep, r.functional));
    Ok(CoverageReport { k: basis.size(), summaries, rows })
}

/// Gram deviation as a function of `n` at fixed `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevScalingConfig {
    pub basis: BasisSpec,
    pub regressor: Regressor,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DevScalingReport {
    pub k: usize,
    pub median_dev: Vec<(usize, f64)>,
    /// Fit of `log median dev` on `log n`.
    pub slope: LineFit,
    #[serde(skip)]
    pub rows: Vec<(usize, usize, f64)>,
}

pub fn dev_scaling_study(cfg: &DevScalingConfig) -> Result<DevScalingReport> {
    check_grid(&cfg.n_grid, cfg.reps)?;
    cfg.regressor.validate()?;
    let basis = BasisSystem::build(&cfg.basis)?;
    let dim = basis.dim();
    let g = theoretical_gram(&basis, &Density::uniform(dim))?;
    let jobs: Vec<(usize, usize)> =
        (0..cfg.n_grid.len()).flat_map(|i| (0..cfg.reps).map(move |r| (i, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let n = cfg.n_grid[i];
            let mut rng = stream_rng(cfg.seed, rep_id(i, rep), STREAM_X);
            let design = Design::new(dim, cfg.regressor.sample(n, dim, &mut rng))?;
            let g_emp = SparseRows::new(&basis, &design)?.cross_product() / n as f64;
            Ok((n, rep, gram_deviation(&g, &g_emp)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let median_dev: Vec<(usize, f64)> = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = rows.iter().filter(|r| r.0 == n).map(|r| r.2).collect();
            (n, stats::median(&mut v))
        })
        .collect();
    let x: Vec<f64> = median_dev.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = median_dev.iter().map(|p| p.1.ln()).collect();
    Ok(DevScalingReport { k: basis.size(), slope: stats::ols_line(&x, &y), median_dev, rows })
}

/// Gram deviation and empirical Lebesgue constants over a grid of sieves,
/// sample sizes and regressor processes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub bases: Vec<BasisTemplate>,
    pub k_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub regressors: Vec<Regressor>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityRow {
    pub basis: String,
    pub k: usize,
    pub n: usize,
    pub regressor: usize,
    pub rep: usize,
    pub dev: f64,
    pub lebesgue: f64,
    pub rank_deficient: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilitySummary {
    pub basis: String,
    pub k: usize,
    pub n: usize,
    pub regressor: Regressor,
    pub median_dev: f64,
    pub median_lebesgue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub summaries: Vec<StabilitySummary>,
    #[serde(skip)]
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub fn median_lebesgue(&self, basis: &str, k: usize, n: usize, regressor: &Regressor) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.basis == basis && s.k == k && s.n == n && &s.regressor == regressor)
            .map(|s| s.median_lebesgue)
    }
}

pub fn stability_study(cfg: &StabilityConfig) -> Result<StabilityReport> {
    check_grid(&cfg.n_values, cfg.reps)?;
    for r in &cfg.regressors {
        r.validate()?;
    }
    let mut cells = Vec::new();
    for t in &cfg.bases {
        for &k in &cfg.k_values {
            let basis = BasisSystem::build(&t.with_size(k, 1))?;
            let g = theoretical_gram(&basis, &Density::uniform(1))?;
            for &n in &cfg.n_values {
                for (ri, _) in cfg.regressors.iter().enumerate() {
                    cells.push((t.name(), basis.clone(), g.clone(), n, ri));
                }
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.reps).map(move |r| (c, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let (name, basis, g, n, ri) = &cells[c];
            // the same draws are reused across sieves for a given (n, regressor, rep)
            let ni = cfg.n_values.iter().position(|m| m == n).unwrap();
            let mut rng = stream_rng(cfg.seed, rep_id(ni * cfg.regressors.len() + ri, rep), STREAM_X);
            let design = Design::new(1, cfg.regressors[*ri].sample(*n, 1, &mut rng))?;
            let g_emp = SparseRows::new(basis, &design)?.cross_product() / *n as f64;
            let leb = lebesgue_constant_empirical(basis, &design)?;
            Ok(StabilityRow {
                basis: name.clone(),
                k: basis.size(),
                n: *n,
                regressor: *ri,
                rep,
                dev: gram_deviation(g, &g_emp)?,
                lebesgue: leb.value,
                rank_deficient: leb.rank_deficient,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, (name, basis, _, n, ri))| {
            let sel: Vec<&StabilityRow> = rows[c * cfg.reps..(c + 1) * cfg.reps].iter().collect();
            let mut d: Vec<f64> = sel.iter().map(|r| r.dev).collect();
            let mut l: Vec<f64> = sel.iter().map(|r| r.lebesgue).collect();
            StabilitySummary {
                basis: name.clone(),
                k: basis.size(),
                n: *n,
                regressor: cfg.regressors[*ri].clone(),
                median_dev: stats::median(&mut d),
                median_lebesgue: stats::median(&mut l),
            }
        })
        .collect();
    Ok(StabilityReport { summaries, rows })
}

/// Default smooth regression function used by the bundled studies.
pub fn default_h0() -> TestFunction {
    TestFunction::SmoothSine
}
