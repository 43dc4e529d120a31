//! Text, JSON and CSV emission.
//!
//! CSV layouts:
//!
//! * `simulate`: `t, y0_re, y0_im, y1_re, ...`
//! * `kernel`: `f, t, k00_re, k00_im, k01_re, ...` (row-major entries of `K_f(t)`)
//! * `scan`: `re, im, sigma_min`
//! * `htf`: `n, m, row, col, re, im, itf_re, itf_im, abs_diff` (the last three only with
//!   `--consistency`, inside the central window)
//! * `stability`: `test, verdict, value, detail`

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use perstab_core::stability::{StabilityReport, Verdict};
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// CSV document with a fixed header; rows may be empty.
pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> CliResult<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(header.iter().map(|s| s.as_ref()))
            .map_err(|e| CliError::Output(e.to_string()))?;
        Ok(Self { writer })
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) -> CliResult<()> {
        self.writer
            .write_record(cells.iter().map(|s| s.as_ref()))
            .map_err(|e| CliError::Output(e.to_string()))
    }

    pub fn finish(self) -> CliResult<String> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }
}

/// Shortest round-tripping representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Stable => "PASS",
        Verdict::Unstable => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

pub fn report_text(r: &StabilityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "period T = {}", r.period);
    let line = |s: &mut String, name: &str, v: Verdict, detail: String| {
        let _ = writeln!(s, "{name:<20} {:<13} {detail}", verdict_word(v));
    };
    line(
        &mut s,
        "pointwise frozen",
        r.pointwise_verdict(),
        match &r.pointwise_frozen {
            Ok(f) => format!(
                "min sigma {:.4e} at t = {:.4}, p = {:.4}{:+.4}i",
                f.min_sigma, f.argmin_t, f.argmin_p.re, f.argmin_p.im
            ),
            Err(e) => format!("error: {e}"),
        },
    );
    match &r.henry_hale {
        Some(h) => line(
            &mut s,
            "henry-hale",
            r.henry_hale_verdict().unwrap_or(Verdict::Inconclusive),
            match h {
                Ok(h) => match h.abscissa {
                    Some(a) => format!("abscissa {a:.4}"),
                    None => format!("no root above {:.4}", h.abscissa_floor),
                },
                Err(e) => format!("error: {e}"),
            },
        ),
        None => {
            let _ = writeln!(s, "{:<20} {:<13} non-constant coefficients", "henry-hale", "n/a");
        }
    }
    line(
        &mut s,
        "generalized",
        r.generalized_verdict(),
        match &r.generalized {
            Ok(g) => {
                let hist: Vec<String> = g.scan.history.iter().map(|(k, v)| format!("K={k}: {v:.4e}")).collect();
                format!("min sigma {}", hist.join(", "))
            }
            Err(e) => format!("error: {e}"),
        },
    );
    line(
        &mut s,
        "monodromy",
        r.monodromy_verdict(),
        match &r.monodromy {
            Ok(m) => format!(
                "rho {:.6} (M = {}), {:.6} (M = {})",
                m.result.rho,
                m.result.m,
                m.result.rho_2m,
                2 * m.result.m
            ),
            Err(e) => format!("error: {e}"),
        },
    );
    line(
        &mut s,
        "decay fit",
        r.decay_verdict(),
        match &r.decay_fit {
            Ok(d) => format!("gamma {:.6}", d.fit.gamma),
            Err(e) => format!("error: {e}"),
        },
    );
    let _ = writeln!(s, "consistency:");
    for f in &r.consistency {
        let _ = writeln!(s, "  {:?} {:?}: {}", f.kind, f.status, f.detail);
    }
    let _ = writeln!(s, "overall: {}", r.overall().as_str());
    s
}

pub fn report_csv(r: &StabilityReport) -> CliResult<String> {
    let mut t = CsvTable::new(&["test", "verdict", "value", "detail"])?;
    let err_row = |t: &mut CsvTable, name: &str, e: &str| t.row(&[name, "inconclusive", "", e]);
    match &r.pointwise_frozen {
        Ok(f) => t.row(&[
            "pointwise_frozen",
            f.verdict.as_str(),
            &num(f.min_sigma),
            "min sigma_min",
        ])?,
        Err(e) => err_row(&mut t, "pointwise_frozen", e)?,
    }
    if let Some(h) = &r.henry_hale {
        match h {
            Ok(h) => t.row(&[
                "henry_hale",
                h.verdict.as_str(),
                &h.abscissa.map(num).unwrap_or_default(),
                "abscissa",
            ])?,
            Err(e) => err_row(&mut t, "henry_hale", e)?,
        }
    }
    match &r.generalized {
        Ok(g) => t.row(&[
            "generalized",
            g.verdict.as_str(),
            &num(g.scan.min_sigma),
            "min sigma_min",
        ])?,
        Err(e) => err_row(&mut t, "generalized", e)?,
    }
    match &r.monodromy {
        Ok(m) => t.row(&["monodromy", m.verdict.as_str(), &num(m.result.rho), "spectral radius"])?,
        Err(e) => err_row(&mut t, "monodromy", e)?,
    }
    match &r.decay_fit {
        Ok(d) => t.row(&["decay_fit", d.verdict.as_str(), &num(d.fit.gamma), "decay rate"])?,
        Err(e) => err_row(&mut t, "decay_fit", e)?,
    }
    for f in &r.consistency {
        let kind = format!("{:?}", f.kind);
        let status = format!("{:?}", f.status);
        t.row(&[kind.as_str(), status.as_str(), "", f.detail.as_str()])?;
    }
    t.row(&["overall", r.overall().as_str(), "", ""])?;
    t.finish()
}
