//! JSON system files.
//!
//! ```json
//! {
//!   "dim": 1, "period": 2.0, "delays": [1.0], "real": true,
//!   "coefficients": [
//!     {"kind": "constant", "re": [[0.5]]},
//!     {"kind": "fourier", "terms": [[0, [[0.2]], [[0.0]]], [1, [[0.1]], [[0.05]]]]},
//!     {"kind": "expr", "re": [["0.3 * sin(2 * PI * t / 2)"]]}
//!   ]
//! }
//! ```
//!
//! Expressions use the single variable `t`. Missing `im` parts are zero. An optional
//! `"analysis"` object takes the same keys as a `--config` file and is used when no
//! `--config` is given.

use std::path::Path;
use std::sync::Arc;

use exmex::prelude::*;
use perstab_core::linalg::c64;
use perstab_core::{CMat, DelaySystem, PeriodicMatrixFunction};
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};

pub type RealMatrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub dim: usize,
    pub period: f64,
    pub delays: Vec<f64>,
    pub coefficients: Vec<CoefficientSpec>,
    pub real: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_exponent: Option<f64>,
    /// Replace the period by the smallest multiple exceeding the largest delay.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inflate_period: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        re: RealMatrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<RealMatrix>,
    },
    Fourier {
        terms: Vec<(i64, RealMatrix, RealMatrix)>,
    },
    Expr {
        re: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<String>>>,
    },
}

fn complex_matrix(dim: usize, re: &RealMatrix, im: Option<&RealMatrix>, what: &str) -> CliResult<CMat> {
    check_shape(dim, re, what)?;
    if let Some(im) = im {
        check_shape(dim, im, what)?;
    }
    Ok(CMat::from_fn(dim, dim, |r, c| {
        c64(re[r][c], im.map_or(0.0, |m| m[r][c]))
    }))
}

fn check_shape<T>(dim: usize, m: &[Vec<T>], what: &str) -> CliResult<()> {
    if m.len() != dim || m.iter().any(|row| row.len() != dim) {
        return Err(CliError::input(format!("{what}: expected a {dim}x{dim} matrix")));
    }
    Ok(())
}

/// Scalar expression in one optional variable.
#[derive(Clone)]
pub struct ScalarExpr {
    ex: FlatEx<f64>,
    uses_var: bool,
}

impl ScalarExpr {
    pub fn parse(text: &str, var: &str) -> CliResult<Self> {
        let ex = exmex::parse::<f64>(text).map_err(|e| CliError::input(format!("expression {text:?}: {e}")))?;
        let names = ex.var_names();
        if names.len() > 1 || names.iter().any(|n| n != var) {
            return Err(CliError::input(format!(
                "expression {text:?} may only use the variable {var}, found {names:?}"
            )));
        }
        let uses_var = !names.is_empty();
        let out = Self { ex, uses_var };
        let probe = out.try_eval(0.0)?;
        if !probe.is_finite() {
            return Err(CliError::input(format!(
                "expression {text:?} is not finite at {var} = 0"
            )));
        }
        Ok(out)
    }

    pub fn try_eval(&self, x: f64) -> CliResult<f64> {
        let r = if self.uses_var {
            self.ex.eval(&[x])
        } else {
            self.ex.eval(&[])
        };
        r.map_err(|e| CliError::input(format!("expression evaluation failed: {e}")))
    }

    /// NaN on evaluation failure; callers validate finiteness up front.
    pub fn eval(&self, x: f64) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

fn expr_matrix(dim: usize, m: &[Vec<String>], what: &str) -> CliResult<Vec<ScalarExpr>> {
    check_shape(dim, m, what)?;
    m.iter().flatten().map(|s| ScalarExpr::parse(s, "t")).collect()
}

impl CoefficientSpec {
    pub fn build(&self, dim: usize, period: f64, index: usize) -> CliResult<PeriodicMatrixFunction> {
        let what = format!("coefficient {index}");
        match self {
            Self::Constant { re, im } => {
                let m = complex_matrix(dim, re, im.as_ref(), &what)?;
                Ok(PeriodicMatrixFunction::constant(m, period)?)
            }
            Self::Fourier { terms } => {
                let terms = terms
                    .iter()
                    .map(|(k, re, im)| Ok((*k, complex_matrix(dim, re, Some(im), &what)?)))
                    .collect::<CliResult<Vec<_>>>()?;
                Ok(PeriodicMatrixFunction::trig_polynomial(period, terms)?)
            }
            Self::Expr { re, im } => {
                let re = Arc::new(expr_matrix(dim, re, &what)?);
                let im = match im {
                    Some(m) => Some(Arc::new(expr_matrix(dim, m, &what)?)),
                    None => None,
                };
                for i in 0..16 {
                    let t = period * i as f64 / 16.0;
                    let bad = re
                        .iter()
                        .chain(im.iter().flat_map(|v| v.iter()))
                        .any(|e| !e.eval(t).is_finite());
                    if bad {
                        return Err(CliError::input(format!("{what}: expression is not finite at t = {t}")));
                    }
                }
                let f = move |t: f64| {
                    CMat::from_fn(dim, dim, |r, c| {
                        let i = r * dim + c;
                        c64(re[i].eval(t), im.as_ref().map_or(0.0, |m| m[i].eval(t)))
                    })
                };
                Ok(PeriodicMatrixFunction::from_sampler(dim, period, f)?)
            }
        }
    }
}

impl SystemSpec {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::input(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read system file {}: {e}", path.display())))?;
        let spec: Self =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if let Some(cfg) = &spec.analysis {
            cfg.validate()?;
        }
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Output(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// File form of a system whose coefficients all carry closed-form Fourier data.
    ///
    /// Sampler-only coefficients have no lossless file form, so they give `None`.
    pub fn from_system(system: &DelaySystem) -> Option<Self> {
        let split = |m: &CMat, part: fn(&perstab_core::C64) -> f64| -> RealMatrix {
            (0..m.nrows())
                .map(|r| (0..m.ncols()).map(|c| part(&m[(r, c)])).collect())
                .collect()
        };
        let coefficients = system
            .coefficients()
            .iter()
            .map(|f| {
                let terms = f.exact_fourier()?;
                Some(CoefficientSpec::Fourier {
                    terms: terms
                        .iter()
                        .map(|(k, m)| (*k, split(m, |z| z.re), split(m, |z| z.im)))
                        .collect(),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            dim: system.dim(),
            period: system.period(),
            delays: system.delays().to_vec(),
            coefficients,
            real: system.is_real(),
            holder_exponent: system.coefficients()[0].holder_exponent(),
            inflate_period: false,
            analysis: None,
        })
    }

    /// Builds the system; the second value is the period inflation factor (1 if unchanged).
    pub fn build(&self) -> CliResult<(DelaySystem, usize)> {
        if self.dim == 0 {
            return Err(CliError::input("dim must be positive"));
        }
        if self.coefficients.len() != self.delays.len() {
            return Err(CliError::input(format!(
                "{} delays but {} coefficients",
                self.delays.len(),
                self.coefficients.len()
            )));
        }
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let f = c.build(self.dim, self.period, i)?;
                Ok(match self.holder_exponent {
                    Some(d) => f.with_holder_exponent(d)?,
                    None => f,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        if self.inflate_period {
            Ok(DelaySystem::with_period_inflation(
                self.delays.clone(),
                coefficients,
                self.real,
            )?)
        } else {
            Ok((DelaySystem::new(self.delays.clone(), coefficients, self.real)?, 1))
        }
    }
}
