//! Plain CSV and JSON output of study reports and matrices.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::concentration::TailRow;
use crate::error::{Result, SieveError};
use crate::simulate::study::{CoverageReport, DevScalingReport, RateReport, StabilityReport};

/// Shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A header plus rows of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Per-replication detail table of a report.
pub trait Detail {
    fn detail(&self) -> Table;
}

impl Detail for RateReport {
    fn detail(&self) -> Table {
        let mut t = Table::new(&["n", "rep", "k", "sup_error", "l2_error"]);
        for r in &self.rows {
            t.push(vec![r.n.to_string(), r.rep.to_string(), r.k.to_string(), fmt_f64(r.sup_error), fmt_f64(r.l2_error)]);
        }
        t
    }
}

impl Detail for CoverageReport {
    fn detail(&self) -> Table {
        let mut t = Table::new(&["rep", "functional", "fhat", "VK_hat", "t", "lo", "hi", "covered"]);
        for r in &self.rows {
            t.push(vec![
                r.rep.to_string(),
                r.functional.to_string(),
                fmt_f64(r.fhat),
                fmt_f64(r.vk_hat),
                fmt_f64(r.t),
                fmt_f64(r.lo),
                fmt_f64(r.hi),
                r.covered.to_string(),
            ]);
        }
        t
    }
}

impl Detail for StabilityReport {
    fn detail(&self) -> Table {
        let mut t = Table::new(&["basis", "k", "n", "regressor", "rep", "dev", "lebesgue_empirical", "rank_deficient"]);
        for r in &self.rows {
            t.push(vec![
                r.basis.clone(),
                r.k.to_string(),
                r.n.to_string(),
                r.regressor.to_string(),
                r.rep.to_string(),
                fmt_f64(r.dev),
                fmt_f64(r.lebesgue),
                r.rank_deficient.to_string(),
            ]);
        }
        t
    }
}

impl Detail for DevScalingReport {
    fn detail(&self) -> Table {
        let mut t = Table::new(&["n", "rep", "dev"]);
        for r in &self.rows {
            t.push(vec![r.0.to_string(), r.1.to_string(), fmt_f64(r.2)]);
        }
        t
    }
}

impl Detail for [TailRow] {
    fn detail(&self) -> Table {
        let mut t = Table::new(&["t", "threshold", "bound", "freq", "se", "reps"]);
        for r in self {
            t.push(vec![
                fmt_f64(r.t),
                fmt_f64(r.threshold),
                fmt_f64(r.bound),
                fmt_f64(r.freq),
                fmt_f64(r.se),
                r.reps.to_string(),
            ]);
        }
        t
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| SieveError::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Matrix as `k0,k1,value` triplets in row-major order.
pub fn matrix_table(m: &DMatrix<f64>) -> Table {
    let mut t = Table::new(&["k0", "k1", "value"]);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            t.push(vec![i.to_string(), j.to_string(), fmt_f64(m[(i, j)])]);
        }
    }
    t
}
