//! TOML config files, one schema per command. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use sieve_core::basis::BasisBlock;
use sieve_core::concentration::TailGenerator;
use sieve_core::inference::FunctionalSpec;
use sieve_core::simulate::dgp::{DgpSpec, Regressor};
use sieve_core::simulate::study::{BasisTemplate, KRule};

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

/// Closed interval `[lo, hi]` given as a two-element array.
pub type Range = [f64; 2];

pub fn in_range(v: f64, r: &Range) -> bool {
    r[0] <= v && v <= r[1]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    /// Headered CSV, regressor columns first and response last. Relative
    /// paths resolve against the config file's directory.
    pub data: PathBuf,
    pub basis: BasisBlock,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub functionals: Vec<FunctionalSpec>,
}

fn default_grid() -> usize {
    512
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFile {
    pub reps: usize,
    pub seed: Option<u64>,
    pub n_grid: Vec<usize>,
    pub dgp: DgpSpec,
    pub basis: BasisTemplate,
    pub k_rule: KRule,
    pub synthetic: Option<SyntheticOracle>,
    #[serde(default)]
    pub thresholds: RateThresholds,
}

/// Error law `c (n / log n)^{-rate}` used by `--synthetic-oracle`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticOracle {
    pub c: f64,
    pub rate: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateThresholds {
    pub sup_slope: Option<Range>,
    pub l2_slope: Option<Range>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageFile {
    pub reps: usize,
    pub seed: Option<u64>,
    pub n: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    pub dgp: DgpSpec,
    pub basis: BasisTemplate,
    pub k_rule: KRule,
    pub functionals: Vec<FunctionalSpec>,
    #[serde(default)]
    pub thresholds: CoverageThresholds,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageThresholds {
    pub coverage: Option<Range>,
    pub ks_pvalue_min: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityFile {
    pub reps: usize,
    pub seed: Option<u64>,
    pub bases: Vec<BasisTemplate>,
    pub k_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub regressors: Vec<Regressor>,
    #[serde(default)]
    pub thresholds: StabilityThresholds,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityThresholds {
    pub max_median_lebesgue: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationFile {
    pub reps: usize,
    pub seed: Option<u64>,
    pub n: usize,
    /// Blocking length for dependent generators; ignored for independent ones.
    #[serde(default = "default_q")]
    pub q: usize,
    pub t_grid: Vec<f64>,
    pub generator: TailGenerator,
    #[serde(default)]
    pub thresholds: ConcentrationThresholds,
}

fn default_q() -> usize {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationThresholds {
    #[serde(default)]
    pub require_valid: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramFile {
    pub basis: BasisBlock,
    pub design: GramDesign,
    #[serde(default)]
    pub thresholds: GramThresholds,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GramDesign {
    /// Regressor columns of a headered CSV; a trailing response column is
    /// dropped when `has_response` is set.
    Csv {
        path: PathBuf,
        #[serde(default)]
        has_response: bool,
    },
    Simulated {
        n: usize,
        regressor: Regressor,
        seed: Option<u64>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GramThresholds {
    pub max_dev: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_reps_is_named() {
        let err = toml::from_str::<RateFile>(
            r#"
            n_grid = [100]
            [dgp]
            dim = 1
            regressor = { kind = "iid_uniform" }
            error = { kind = "gaussian", sigma = 1.0 }
            h0 = { kind = "smooth_sine" }
            [basis]
            family = "bspline"
            order = 3
            [k_rule]
            constant = 1.0
            exponent = 0.2
            "#,
        )
        .unwrap_err();
        assert!(err.message().contains("reps"), "{}", err.message());
    }

    #[test]
    fn misspelled_nested_key_rejected() {
        let err = toml::from_str::<RateFile>(
            r#"
            reps = 2
            n_grid = [100]
            [dgp]
            dim = 1
            regressor = { kind = "ar_copula", rh = 0.5 }
            error = { kind = "gaussian", sigma = 1.0 }
            h0 = { kind = "smooth_sine" }
            [basis]
            family = "bspline"
            order = 3
            [k_rule]
            constant = 1.0
            exponent = 0.2
            "#,
        )
        .unwrap_err();
        assert!(err.message().contains("rh"), "{}", err.message());
    }

    #[test]
    fn ranges_are_closed() {
        assert!(in_range(1.0, &[1.0, 2.0]));
        assert!(in_range(2.0, &[1.0, 2.0]));
        assert!(!in_range(2.5, &[1.0, 2.0]));
    }
}
