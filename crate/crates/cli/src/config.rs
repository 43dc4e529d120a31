//! Analysis defaults, optionally overridden by a JSON file and then by command-line flags.

use std::path::Path;

use perstab_core::spectral::ScanOptions;
use perstab_core::stability::{FrozenOptions, ReportOptions};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const THREADS_ENV: &str = "PERSTAB_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Truncation order of `R_K(p)`.
    pub k: usize,
    pub beta: f64,
    /// Grid cells per largest delay (monodromy, decay fits, grid simulation).
    pub m_cells: usize,
    pub m_bound: f64,
    /// Kernel grid points per period.
    pub m_t: usize,
    pub scan_re: usize,
    pub scan_im: usize,
    pub conv_tol: f64,
    pub frozen_times: usize,
    pub monodromy_margin: f64,
    pub decay_tol: f64,
    pub decay_periods: usize,
    pub abscissa_tol: f64,
    /// Required gap between `Re p` and the kernel growth rate.
    pub growth_margin: f64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let r = ReportOptions::default();
        Self {
            k: r.k,
            beta: r.beta,
            m_cells: r.m_cells,
            m_bound: r.scan.m_bound,
            m_t: 64,
            scan_re: r.scan.n_re,
            scan_im: r.scan.n_im,
            conv_tol: r.scan.conv_tol,
            frozen_times: r.frozen.n_t,
            monodromy_margin: r.monodromy_margin,
            decay_tol: r.decay_tol,
            decay_periods: r.decay_periods,
            abscissa_tol: r.abscissa_tol,
            growth_margin: 0.1,
            seed: r.seed,
            threads: None,
        }
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let positive = [
            ("m_bound", self.m_bound),
            ("conv_tol", self.conv_tol),
            ("monodromy_margin", self.monodromy_margin),
            ("decay_tol", self.decay_tol),
            ("abscissa_tol", self.abscissa_tol),
            ("growth_margin", self.growth_margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::input(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k < 1 {
            return Err(CliError::input("k must be at least 1"));
        }
        if !self.beta.is_finite() {
            return Err(CliError::input("beta must be finite"));
        }
        if self.m_t == 0 || self.frozen_times == 0 || self.decay_periods == 0 {
            return Err(CliError::input("m_t, frozen_times and decay_periods must be positive"));
        }
        if self.threads == Some(0) {
            return Err(CliError::input("threads must be positive"));
        }
        Ok(())
    }

    /// Environment variable first, then the config value, then one thread.
    pub fn thread_count(&self) -> CliResult<usize> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(CliError::input(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                ))),
            },
            Err(_) => Ok(self.threads.unwrap_or(1)),
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            n_re: self.scan_re,
            n_im: self.scan_im,
            conv_tol: self.conv_tol,
            m_bound: self.m_bound,
            ..ScanOptions::default()
        }
    }

    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            beta: self.beta,
            k: self.k,
            m_cells: self.m_cells,
            monodromy_margin: self.monodromy_margin,
            decay_tol: self.decay_tol,
            decay_periods: self.decay_periods,
            seed: self.seed,
            frozen: FrozenOptions {
                n_t: self.frozen_times,
                m_bound: self.m_bound,
                ..FrozenOptions::default()
            },
            scan: self.scan_options(),
            abscissa_tol: self.abscissa_tol,
        }
    }
}
