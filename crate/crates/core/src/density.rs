//! Closed-form product densities on `[0,1]^d`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// A univariate density on [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform,
    /// `1 + amplitude * sin(2πx)`, requires `|amplitude| < 1`.
    Sine { amplitude: f64 },
}

impl Marginal {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Marginal::Uniform => 1.0,
            Marginal::Sine { amplitude } => 1.0 + amplitude * (2.0 * std::f64::consts::PI * t).sin(),
        }
    }

    pub fn inf(&self) -> f64 {
        match *self {
            Marginal::Uniform => 1.0,
            Marginal::Sine { amplitude } => 1.0 - amplitude.abs(),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Marginal::Uniform => 1.0,
            Marginal::Sine { amplitude } => 1.0 + amplitude.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Sine { amplitude } if !(amplitude.abs() < 1.0) => {
                config_err(format!("sine density amplitude must satisfy |a| < 1, got {amplitude}"))
            }
            _ => Ok(()),
        }
    }
}

/// Product density `f(x) = Π_l f_l(x_l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub marginals: Vec<Marginal>,
}

impl Density {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return config_err("density needs at least one marginal");
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Density { marginals })
    }

    pub fn uniform(dim: usize) -> Self {
        Density { marginals: vec![Marginal::Uniform; dim] }
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.marginals.iter().zip(x).map(|(m, &t)| m.eval(t)).product()
    }

    pub fn inf(&self) -> f64 {
        self.marginals.iter().map(Marginal::inf).product()
    }

    pub fn sup(&self) -> f64 {
        self.marginals.iter().map(Marginal::sup).product()
    }
}
