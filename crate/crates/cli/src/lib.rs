//! `sieve` command-line driver: series LS fits, Monte Carlo studies and Gram
//! diagnostics configured by TOML files.
//!
//! Exit codes: 0 success, 2 config error, 3 threshold failure, 4 numeric error.

pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use sieve_core::basis::BasisSystem;
use sieve_core::concentration::tail_study;
use sieve_core::estimator::{fit, Design};
use sieve_core::gram::{
    dms_bound, gram_summary, lebesgue_constant_empirical, lebesgue_constant_theoretical, DmsBound,
    EmpiricalLebesgue, GramSummary,
};
use sieve_core::inference::{analyze, FunctionalReport, FunctionalSpec};
use sieve_core::report::{fmt_f64, matrix_table, write_json, Detail, Table};
use sieve_core::simulate::study::{
    coverage_study, rate_study, rate_study_synthetic, stability_study, CoverageConfig, RateConfig,
    StabilityConfig,
};
use sieve_core::simulate::stream_rng;
use sieve_core::{Density, SieveError};

use config::{in_range, load};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("threshold failure: {0}")]
    Threshold(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Threshold(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<SieveError> for CliError {
    fn from(e: SieveError) -> Self {
        match e {
            SieveError::Config(_) | SieveError::Domain { .. } | SieveError::Dimension { .. } | SieveError::Io(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sieve", version, about = "Series least squares fits and sieve Monte Carlo studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a series LS regression to a CSV sample.
    Fit(Common),
    /// Sup-norm and L2 convergence-rate study.
    RateStudy {
        #[command(flatten)]
        common: Common,
        /// Replace the estimator by an exact error law `c (n/log n)^{-rate}`.
        #[arg(long)]
        synthetic_oracle: bool,
    },
    /// Confidence-interval coverage study.
    CoverageStudy(Common),
    /// Empirical Lebesgue-constant and Gram-deviation study.
    StabilityStudy(Common),
    /// Tail frequencies of Gram deviations against matrix concentration bounds.
    ConcentrationStudy(Common),
    /// Gram matrices, identifiability and Lebesgue constants for one design.
    GramReport(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sieve: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    let common = match &cmd {
        Command::Fit(c)
        | Command::RateStudy { common: c, .. }
        | Command::CoverageStudy(c)
        | Command::StabilityStudy(c)
        | Command::ConcentrationStudy(c)
        | Command::GramReport(c) => c,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", common.out.display())))?;
    pool.install(|| match &cmd {
        Command::Fit(c) => cmd_fit(c),
        Command::RateStudy { common, synthetic_oracle } => cmd_rate(common, *synthetic_oracle),
        Command::CoverageStudy(c) => cmd_coverage(c),
        Command::StabilityStudy(c) => cmd_stability(c),
        Command::ConcentrationStudy(c) => cmd_concentration(c),
        Command::GramReport(c) => cmd_gram(c),
    })
}

fn seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Config("missing `seed`: set it in the config or pass --seed".into()))
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn write_outputs<T: Serialize + ?Sized>(out: &Path, summary: &T, detail: &Table) -> Result<(), CliError> {
    write_json(&out.join("summary.json"), summary)?;
    detail.write(&out.join("detail.csv"))?;
    Ok(())
}

fn check(failures: Vec<String>) -> Result<(), CliError> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures.join("; ")))
    }
}

/// Reads a headered numeric CSV into columns.
fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read data {}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), i + 2)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    Ok((header, rows))
}

#[derive(Serialize)]
struct FitSummary<'a> {
    basis: &'a sieve_core::BasisSpec,
    k: usize,
    n: usize,
    rank: usize,
    rank_deficient: bool,
    residual_ss: f64,
    functionals: Vec<(&'a FunctionalSpec, FunctionalReport)>,
}

fn cmd_fit(c: &Common) -> Result<(), CliError> {
    let cfg: config::FitFile = load(&c.config)?;
    let spec = cfg.basis.to_spec()?;
    let basis = BasisSystem::build(&spec)?;
    let (header, rows) = read_csv(&relative_to(&c.config, &cfg.data))?;
    let d = basis.dim();
    if header.len() != d + 1 {
        return Err(CliError::Config(format!(
            "data: expected {} regressor columns and one response column, found {} columns",
            d,
            header.len()
        )));
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r[..d].to_vec()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[d]).collect();
    let design = Design::from_rows(&x)?;
    let result = fit(&basis, &design, &y)?;

    let mut functionals = Vec::new();
    for f in &cfg.functionals {
        functionals.push((f, analyze(&result, &design, f, cfg.level, None)?));
    }
    let summary = FitSummary {
        basis: &spec,
        k: basis.size(),
        n: design.len(),
        rank: result.rank,
        rank_deficient: result.rank_deficient,
        residual_ss: result.residuals.iter().map(|r| r * r).sum(),
        functionals,
    };

    let mut coef = Table::new(&["index", "coefficient"]);
    for (i, v) in result.coeffs.iter().enumerate() {
        coef.push(vec![i.to_string(), fmt_f64(*v)]);
    }
    coef.write(&c.out.join("coefficients.csv"))?;

    let mut cols: Vec<&str> = header[..d].iter().map(String::as_str).collect();
    cols.push("fitted");
    let mut curve = Table::new(&cols);
    if d == 1 {
        if cfg.grid < 2 {
            return Err(CliError::Config("grid: must be >= 2".into()));
        }
        for i in 0..cfg.grid {
            let t = i as f64 / (cfg.grid - 1) as f64;
            curve.push(vec![fmt_f64(t), fmt_f64(result.eval(&[t])?)]);
        }
    } else {
        for (row, f) in x.iter().zip(&result.fitted) {
            let mut r: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            r.push(fmt_f64(*f));
            curve.push(r);
        }
    }
    curve.write(&c.out.join("fitted.csv"))?;

    let mut cols: Vec<&str> = header.iter().map(String::as_str).collect();
    cols.extend(["fitted", "residual"]);
    let mut detail = Table::new(&cols);
    for (i, row) in rows.iter().enumerate() {
        let mut r: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        r.push(fmt_f64(result.fitted[i]));
        r.push(fmt_f64(result.residuals[i]));
        detail.push(r);
    }
    write_outputs(&c.out, &summary, &detail)?;

    println!("fit: {} K={} n={} rank={}", spec.family.name(), summary.k, summary.n, summary.rank);
    println!("  residual SS  {:.6}", summary.residual_ss);
    for (f, r) in &summary.functionals {
        println!("  {:<40} {:>12.6}  CI [{:.6}, {:.6}]", format!("{f:?}"), r.fhat, r.ci.0, r.ci.1);
    }
    Ok(())
}

fn cmd_rate(c: &Common, synthetic: bool) -> Result<(), CliError> {
    let file: config::RateFile = load(&c.config)?;
    let cfg = RateConfig {
        dgp: file.dgp,
        basis: file.basis,
        k_rule: file.k_rule,
        n_grid: file.n_grid,
        reps: file.reps,
        seed: seed(c.seed, file.seed)?,
    };
    let report = if synthetic {
        let (cc, rate) = file.synthetic.as_ref().map_or((1.0, 0.4), |s| (s.c, s.rate));
        rate_study_synthetic(&cfg, cc, rate)?
    } else {
        rate_study(&cfg)?
    };
    write_outputs(&c.out, &report, &report.detail())?;

    println!("{:>8} {:>5} {:>14} {:>14}", "n", "K", "median sup", "median L2");
    for s in &report.per_n {
        println!("{:>8} {:>5} {:>14.6e} {:>14.6e}", s.n, s.k, s.median_sup, s.median_l2);
    }
    println!("sup slope {:.4} (se {:.4})", report.sup_slope.slope, report.sup_slope.slope_se);
    println!("L2  slope {:.4} (se {:.4})", report.l2_slope.slope, report.l2_slope.slope_se);

    let mut fails = Vec::new();
    if let Some(r) = &file.thresholds.sup_slope {
        if !in_range(report.sup_slope.slope, r) {
            fails.push(format!("sup slope {} outside {r:?}", report.sup_slope.slope));
        }
    }
    if let Some(r) = &file.thresholds.l2_slope {
        if !in_range(report.l2_slope.slope, r) {
            fails.push(format!("L2 slope {} outside {r:?}", report.l2_slope.slope));
        }
    }
    check(fails)
}

fn cmd_coverage(c: &Common) -> Result<(), CliError> {
    let file: config::CoverageFile = load(&c.config)?;
    let cfg = CoverageConfig {
        dgp: file.dgp,
        basis: file.basis,
        k_rule: file.k_rule,
        n: file.n,
        reps: file.reps,
        seed: seed(c.seed, file.seed)?,
        level: file.level,
        functionals: file.functionals,
    };
    let report = coverage_study(&cfg)?;
    write_outputs(&c.out, &report, &report.detail())?;

    println!("K = {}, n = {}, reps = {}", report.k, cfg.n, cfg.reps);
    println!("{:<44} {:>9} {:>11} {:>10}", "functional", "coverage", "mean len", "KS p");
    let mut fails = Vec::new();
    for s in &report.summaries {
        let name = format!("{:?}", s.functional);
        println!("{name:<44} {:>9.4} {:>11.5} {:>10.4}", s.coverage, s.mean_length, s.ks_pvalue);
        if let Some(r) = &file.thresholds.coverage {
            if !in_range(s.coverage, r) {
                fails.push(format!("{name}: coverage {} outside {r:?}", s.coverage));
            }
        }
        if let Some(p) = file.thresholds.ks_pvalue_min {
            if !(s.ks_pvalue > p) {
                fails.push(format!("{name}: KS p-value {} not above {p}", s.ks_pvalue));
            }
        }
    }
    check(fails)
}

fn cmd_stability(c: &Common) -> Result<(), CliError> {
    let file: config::StabilityFile = load(&c.config)?;
    let cfg = StabilityConfig {
        bases: file.bases,
        k_values: file.k_values,
        n_values: file.n_values,
        regressors: file.regressors,
        reps: file.reps,
        seed: seed(c.seed, file.seed)?,
    };
    let report = stability_study(&cfg)?;
    write_outputs(&c.out, &report, &report.detail())?;

    println!("{:<12} {:>5} {:>7} {:<26} {:>10} {:>10}", "basis", "K", "n", "regressor", "dev", "lebesgue");
    let mut fails = Vec::new();
    for s in &report.summaries {
        let reg = format!("{:?}", s.regressor);
        println!(
            "{:<12} {:>5} {:>7} {reg:<26} {:>10.4} {:>10.4}",
            s.basis, s.k, s.n, s.median_dev, s.median_lebesgue
        );
        if let Some(m) = file.thresholds.max_median_lebesgue {
            if !(s.median_lebesgue <= m) {
                fails.push(format!("{} K={} n={} {reg}: median Lebesgue {} above {m}", s.basis, s.k, s.n, s.median_lebesgue));
            }
        }
    }
    check(fails)
}

fn cmd_concentration(c: &Common) -> Result<(), CliError> {
    let file: config::ConcentrationFile = load(&c.config)?;
    let rows = tail_study(&file.generator, file.n, file.q, &file.t_grid, file.reps, seed(c.seed, file.seed)?)?;
    write_outputs(&c.out, &rows, &rows.detail())?;

    println!("{:>10} {:>10} {:>10} {:>10} {:>6}", "t", "threshold", "bound", "freq", "valid");
    for r in &rows {
        println!("{:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>6}", r.t, r.threshold, r.bound, r.freq, r.valid());
    }
    let fails = if file.thresholds.require_valid {
        rows.iter()
            .filter(|r| !r.valid())
            .map(|r| format!("t={}: frequency {} exceeds bound {} + 3 se", r.t, r.freq, r.bound))
            .collect()
    } else {
        Vec::new()
    };
    check(fails)
}

#[derive(Serialize)]
struct GramReport {
    #[serde(flatten)]
    summary: GramSummary,
    lebesgue_theoretical: f64,
    lebesgue_empirical: EmpiricalLebesgue,
    /// Decay bound for `G^{-1}` with entries beyond the detected band set to zero.
    dms: Option<DmsBound>,
}

fn cmd_gram(c: &Common) -> Result<(), CliError> {
    let file: config::GramFile = load(&c.config)?;
    let spec = file.basis.to_spec()?;
    let basis = BasisSystem::build(&spec)?;
    let d = basis.dim();
    let design = match &file.design {
        config::GramDesign::Csv { path, has_response } => {
            let (header, rows) = read_csv(&relative_to(&c.config, path))?;
            let want = d + usize::from(*has_response);
            if header.len() != want {
                return Err(CliError::Config(format!(
                    "design.path: expected {want} columns, found {}",
                    header.len()
                )));
            }
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r[..d].to_vec()).collect();
            Design::from_rows(&x)?
        }
        config::GramDesign::Simulated { n, regressor, seed: s } => {
            regressor.validate()?;
            if *n == 0 {
                return Err(CliError::Config("design.n: must be >= 1".into()));
            }
            let master = seed(c.seed, *s)?;
            let mut rng = stream_rng(master, 0, sieve_core::simulate::STREAM_X);
            Design::new(d, regressor.sample(*n, d, &mut rng))?
        }
    };
    let density = Density::uniform(d);
    let summary = gram_summary(&basis, &density, &design)?;
    let band = summary.bandwidth;
    let banded = DMatrix::from_fn(summary.k, summary.k, |i, j| {
        if i.abs_diff(j) <= band {
            summary.g[(i, j)]
        } else {
            0.0
        }
    });
    let report = GramReport {
        lebesgue_theoretical: lebesgue_constant_theoretical(&basis, &density)?,
        lebesgue_empirical: lebesgue_constant_empirical(&basis, &design)?,
        dms: dms_bound(&banded, 2 * band).ok(),
        summary,
    };
    matrix_table(&report.summary.g).write(&c.out.join("gram.csv"))?;
    matrix_table(&report.summary.g_emp).write(&c.out.join("gram_empirical.csv"))?;
    let mut detail = Table::new(&["k0", "k1", "gram", "gram_empirical"]);
    for i in 0..report.summary.k {
        for j in 0..report.summary.k {
            detail.push(vec![
                i.to_string(),
                j.to_string(),
                fmt_f64(report.summary.g[(i, j)]),
                fmt_f64(report.summary.g_emp[(i, j)]),
            ]);
        }
    }
    write_outputs(&c.out, &report, &detail)?;

    let s = &report.summary;
    println!("gram-report: {} K={} n={}", spec.family.name(), s.k, s.n);
    println!("  dev            {:.6}", s.dev);
    println!("  zeta           {:.6}", s.zeta);
    println!("  lambda         {:.6}", s.lambda);
    println!("  eig(G)         [{:.6}, {:.6}]", s.min_eigenvalue, s.max_eigenvalue);
    println!("  half-band      {}", s.bandwidth);
    println!("  Lebesgue (G)   {:.6}", report.lebesgue_theoretical);
    println!("  Lebesgue (emp) {:.6}", report.lebesgue_empirical.value);
    if let Some(m) = &report.dms {
        println!("  ||G^-1||_inf <= {:.6}", m.bound);
    }
    let mut fails = Vec::new();
    if let Some(m) = file.thresholds.max_dev {
        if !(s.dev <= m) {
            fails.push(format!("dev {} above {m}", s.dev));
        }
    }
    check(fails)
}
