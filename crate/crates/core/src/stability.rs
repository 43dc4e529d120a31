//! Stability tests and their cross-validation.
//!
//! * frozen-coefficient scan of `sigma_min(I - sum_j exp(-p tau_j) D_j(t))` over `t` (known
//!   to be insufficient for periodic coefficients; kept as a diagnostic),
//! * the constant-coefficient half-plane test with an abscissa estimate,
//! * the generalized test on truncations of `R(p)`,
//! * the spectral radius of the discretized monodromy operator.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, linspace, sigma_min, spectral_radius_complex, CVec, C64};
use crate::simulator::{decay_rate_fit, simulate_homogeneous, DecayFit, Signal, SimOptions, Source, WindowNorm};
use crate::spectral::{
    compass_minimize, grid_minima, neumann_abscissa, scan_halfplane, HalfPlaneScanResult, ScanOptions, ScanPoint,
};
use crate::system_model::DelaySystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Largest `g` such that every delay is an integer multiple of `g` with multiplier at most
/// `max_ratio`, if one exists (relative tolerance `1e-9`).
pub fn commensurate_base(delays: &[f64], max_ratio: u32) -> Option<f64> {
    let t1 = delays[0];
    for q in 1..=max_ratio {
        let g = t1 / q as f64;
        let ok = delays.iter().all(|t| {
            let r = t / g;
            r.round() <= max_ratio as f64 && (r - r.round()).abs() <= 1e-9 * r
        });
        if ok {
            return Some(g);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenOptions {
    /// Number of frozen times `t_i = i T / n_t`.
    pub n_t: usize,
    pub n_re: usize,
    pub n_im: usize,
    pub re_max: Option<f64>,
    /// Imaginary window. `None`: one period `2 pi / g` for commensurate delays with base `g`
    /// (halved for real systems), otherwise `[0, 2 pi / tau_1]`.
    pub im_window: Option<(f64, f64)>,
    pub m_bound: f64,
    pub refine_evals: usize,
}

impl Default for FrozenOptions {
    fn default() -> Self {
        Self {
            n_t: 64,
            n_re: 40,
            n_im: 200,
            re_max: None,
            im_window: None,
            m_bound: 1e6,
            refine_evals: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrozenResult {
    pub beta: f64,
    pub min_sigma: f64,
    pub argmin_t: f64,
    pub argmin_p: C64,
    pub im_window: (f64, f64),
    pub verdict: Verdict,
}

fn frozen_window(system: &DelaySystem, opts: &FrozenOptions) -> (f64, f64) {
    if let Some(w) = opts.im_window {
        return w;
    }
    let span = match commensurate_base(system.delays(), 1000) {
        Some(g) => 2.0 * PI / g,
        None => 2.0 * PI / system.tau_min(),
    };
    if system.is_real() {
        (0.0, 0.5 * span)
    } else {
        (-0.5 * span, 0.5 * span)
    }
}

fn frozen_scan(system: &DelaySystem, beta: f64, times: &[f64], opts: &FrozenOptions) -> Result<FrozenResult> {
    let re_max = match opts.re_max {
        Some(r) => r,
        None => neumann_abscissa(system, 0.5)?.max(beta + 0.5),
    }
    .max(beta);
    let window = frozen_window(system, opts);
    let res = linspace(beta, re_max, opts.n_re.max(1));
    let ims = linspace(window.0, window.1, opts.n_im.max(1));
    let step = (
        if res.len() > 1 { res[1] - res[0] } else { 0.1 },
        if ims.len() > 1 { ims[1] - ims[0] } else { 0.1 },
    );
    let mut candidates: Vec<(f64, ScanPoint)> = Vec::new();
    for &t in times {
        let coeffs: Vec<_> = (0..system.n_delays()).map(|j| system.coefficient(j, t)).collect();
        let frozen = |p: C64| {
            let mut m = crate::linalg::identity(system.dim());
            for (c, tau) in coeffs.iter().zip(system.delays()) {
                m -= c * (-p * *tau).exp();
            }
            sigma_min(&m)
        };
        let mut pts = Vec::with_capacity(res.len() * ims.len());
        for &re in &res {
            for &im in &ims {
                let p = c64(re, im);
                pts.push(ScanPoint {
                    p,
                    sigma_min: frozen(p)?,
                });
            }
        }
        for i in grid_minima(&pts, res.len(), ims.len(), 2) {
            candidates.push((t, pts[i]));
        }
    }
    candidates.sort_by(|a, b| a.1.sigma_min.partial_cmp(&b.1.sigma_min).unwrap());
    candidates.truncate(3);
    let mut best = (0.0, c64(0.0, 0.0), f64::INFINITY);
    for (t, pt) in candidates {
        let f = |p: C64| sigma_min(&system.frozen_matrix(t, p));
        let (p, v) = compass_minimize(f, pt.p, pt.sigma_min, step, (beta, re_max), opts.refine_evals)?;
        if v < best.2 {
            best = (t, p, v);
        }
    }
    Ok(FrozenResult {
        beta,
        min_sigma: best.2,
        argmin_t: best.0,
        argmin_p: best.1,
        im_window: window,
        verdict: if best.2 >= 1.0 / opts.m_bound {
            Verdict::Stable
        } else {
            Verdict::Unstable
        },
    })
}

/// Frozen-coefficient test: `min_{t, Re p >= beta} sigma_min(I - sum_j exp(-p tau_j) D_j(t))`.
///
/// A stable verdict here does not imply stability of the periodic system.
pub fn pointwise_frozen_test(system: &DelaySystem, beta: f64, opts: &FrozenOptions) -> Result<FrozenResult> {
    let n_t = opts.n_t.max(1);
    let times: Vec<f64> = (0..n_t).map(|i| system.period() * i as f64 / n_t as f64).collect();
    frozen_scan(system, beta, &times, opts)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HenryHaleResult {
    pub scan: FrozenResult,
    pub verdict: Verdict,
    /// Pass/fail boundary in `beta`; `None` when every `beta` down to `abscissa_floor` passes.
    pub abscissa: Option<f64>,
    pub abscissa_floor: f64,
}

/// Constant-coefficient test on `det(I - sum_j exp(-p tau_j) D_j) != 0` for `Re p >= beta`,
/// with the abscissa located by bisection (tolerance `tol`) on the pass/fail boundary.
///
/// The bisection explores down to `min(beta, beta_safe) - 4 / tau_1`.
pub fn henry_hale_constant(system: &DelaySystem, beta: f64, opts: &FrozenOptions, tol: f64) -> Result<HenryHaleResult> {
    if !system.is_constant() {
        return Err(Error::NonConstant);
    }
    let times = [0.0];
    let scan = frozen_scan(system, beta, &times, opts)?;
    let passes = |b: f64| -> Result<bool> { Ok(frozen_scan(system, b, &times, opts)?.verdict == Verdict::Stable) };
    let safe = neumann_abscissa(system, 0.5)?;
    let floor = if safe.is_finite() {
        beta.min(safe) - 4.0 / system.tau_min()
    } else {
        beta - 4.0 / system.tau_min()
    };
    let abscissa = if passes(floor)? {
        None
    } else {
        let mut lo = floor;
        let mut hi = if safe.is_finite() { safe.max(floor + tol) } else { beta };
        while !passes(hi)? {
            hi += 1.0 + (hi - lo);
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if passes(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };
    Ok(HenryHaleResult {
        verdict: scan.verdict,
        scan,
        abscissa,
        abscissa_floor: floor,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneralizedResult {
    pub scan: HalfPlaneScanResult,
    pub verdict: Verdict,
    /// Commensurate delays: boundedness of the inverse follows from invertibility, so the
    /// `sigma_min` floor is only a diagnostic.
    pub commensurate: bool,
}

/// Half-plane test on `R_K(p)`: stable when `min sigma_min >= 1 / m_bound` at `K` and the
/// minimum is converged at `2K`; unstable when both truncations drop below the floor.
pub fn generalized_test(system: &DelaySystem, beta: f64, k: usize, opts: &ScanOptions) -> Result<GeneralizedResult> {
    let scan = scan_halfplane(system, beta, k, opts)?;
    let floor = 1.0 / opts.m_bound;
    let verdict = if scan.passes && scan.converged {
        Verdict::Stable
    } else if scan.history.iter().all(|(_, v)| *v < floor) {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    };
    Ok(GeneralizedResult {
        scan,
        verdict,
        commensurate: commensurate_base(system.delays(), 1000).is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonodromyResult {
    pub rho: f64,
    pub rho_2m: f64,
    pub m: usize,
    pub converged: bool,
}

impl MonodromyResult {
    pub fn verdict(&self, margin: f64) -> Verdict {
        if !self.converged {
            Verdict::Inconclusive
        } else if self.rho < 1.0 - margin {
            Verdict::Stable
        } else if self.rho > 1.0 + margin {
            Verdict::Unstable
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Spectral radius of the discretized one-period solution operator with `m` and `2m` cells.
pub fn monodromy_radius(system: &DelaySystem, m: usize) -> Result<MonodromyResult> {
    if m < 8 {
        return Err(Error::InvalidArgument(format!(
            "monodromy needs at least 8 cells, got {m}"
        )));
    }
    let t = system.period();
    let rho = spectral_radius_complex(&crate::simulator::solution_operator_matrix(system, 0.0, t, m)?);
    let rho_2m = spectral_radius_complex(&crate::simulator::solution_operator_matrix(system, 0.0, t, 2 * m)?);
    let scale = rho.max(rho_2m);
    let converged = scale < 1e-12 || (rho - rho_2m).abs() <= 0.02 * scale;
    if !rho.is_finite() || !rho_2m.is_finite() {
        return Err(Error::Numerical(
            "eigenvalue computation produced non-finite values".into(),
        ));
    }
    Ok(MonodromyResult {
        rho,
        rho_2m,
        m,
        converged,
    })
}

/// Random history with independent uniform cell values in `[-1, 1]` (complex for non-real
/// systems), one value per grid cell of width `tau_N / cells`.
pub fn random_history(system: &DelaySystem, cells: usize, seed: u64) -> Result<Source> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = system.tau_max() / cells as f64;
    let d = system.dim();
    let values: Vec<CVec> = (0..cells)
        .map(|_| {
            CVec::from_iterator(
                d,
                (0..d).map(|_| {
                    let re = rng.gen_range(-1.0..1.0);
                    let im = if system.is_real() {
                        0.0
                    } else {
                        rng.gen_range(-1.0..1.0)
                    };
                    c64(re, im)
                }),
            )
        })
        .collect();
    Ok(Source::Samples(Signal::new(-system.tau_max() + 0.5 * h, h, values)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub beta: f64,
    pub k: usize,
    pub m_cells: usize,
    pub monodromy_margin: f64,
    pub decay_tol: f64,
    pub decay_periods: usize,
    pub seed: u64,
    pub frozen: FrozenOptions,
    pub scan: ScanOptions,
    pub abscissa_tol: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            beta: -0.01,
            k: 8,
            m_cells: 64,
            monodromy_margin: 0.05,
            decay_tol: 0.15,
            decay_periods: 20,
            seed: 0x5eed,
            frozen: FrozenOptions::default(),
            scan: ScanOptions::default(),
            abscissa_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FlagKind {
    /// Monodromy and generalized verdicts.
    MonodromyVsGeneralized,
    /// Fitted decay rate against `-ln(rho) / T`.
    DecayVsMonodromy,
    /// Frozen test passes while the monodromy test finds instability.
    FrozenDiscordance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FlagStatus {
    Agree,
    Contradiction,
    Undetermined,
    Raised,
    Clear,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConsistencyFlag {
    pub kind: FlagKind,
    pub status: FlagStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecaySummary {
    pub fit: DecayFit,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonodromySummary {
    pub result: MonodromyResult,
    pub verdict: Verdict,
}

/// One entry of a report: the outcome or the error that replaced it.
pub type Outcome<T> = core::result::Result<T, String>;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityReport {
    pub period: f64,
    pub pointwise_frozen: Outcome<FrozenResult>,
    /// Present for constant-coefficient systems only.
    pub henry_hale: Option<Outcome<HenryHaleResult>>,
    pub generalized: Outcome<GeneralizedResult>,
    pub monodromy: Outcome<MonodromySummary>,
    pub decay_fit: Outcome<DecaySummary>,
    pub consistency: Vec<ConsistencyFlag>,
}

fn verdict_of<T>(o: &Outcome<T>, f: impl Fn(&T) -> Verdict) -> Verdict {
    o.as_ref().map(f).unwrap_or(Verdict::Inconclusive)
}

impl StabilityReport {
    pub fn pointwise_verdict(&self) -> Verdict {
        verdict_of(&self.pointwise_frozen, |r| r.verdict)
    }

    pub fn henry_hale_verdict(&self) -> Option<Verdict> {
        self.henry_hale.as_ref().map(|o| verdict_of(o, |r| r.verdict))
    }

    pub fn generalized_verdict(&self) -> Verdict {
        verdict_of(&self.generalized, |r| r.verdict)
    }

    pub fn monodromy_verdict(&self) -> Verdict {
        verdict_of(&self.monodromy, |r| r.verdict)
    }

    pub fn decay_verdict(&self) -> Verdict {
        verdict_of(&self.decay_fit, |r| r.verdict)
    }

    /// Overall call: monodromy and generalized verdicts when they agree and are decisive,
    /// otherwise inconclusive.
    pub fn overall(&self) -> Verdict {
        match (self.monodromy_verdict(), self.generalized_verdict()) {
            (a, b) if a == b => a,
            (Verdict::Inconclusive, b) => b,
            (a, Verdict::Inconclusive) => a,
            _ => Verdict::Inconclusive,
        }
    }

    /// Builds the report from independently computed parts and fills the consistency flags.
    pub fn assemble(
        system: &DelaySystem,
        opts: &ReportOptions,
        pointwise_frozen: Outcome<FrozenResult>,
        henry_hale: Option<Outcome<HenryHaleResult>>,
        generalized: Outcome<GeneralizedResult>,
        monodromy: Outcome<MonodromyResult>,
        decay_fit: Outcome<DecayFit>,
    ) -> Self {
        let period = system.period();
        let monodromy = monodromy.map(|result| MonodromySummary {
            verdict: result.verdict(opts.monodromy_margin),
            result,
        });
        let decay_fit = decay_fit.map(|fit| DecaySummary {
            verdict: if fit.gamma > 0.0 {
                Verdict::Stable
            } else if fit.gamma < 0.0 {
                Verdict::Unstable
            } else {
                Verdict::Inconclusive
            },
            fit,
        });
        let mut report = Self {
            period,
            pointwise_frozen,
            henry_hale,
            generalized,
            monodromy,
            decay_fit,
            consistency: Vec::new(),
        };
        report.consistency = report.flags(opts);
        report
    }

    fn flags(&self, opts: &ReportOptions) -> Vec<ConsistencyFlag> {
        let mut out = Vec::new();
        let (mv, gv) = (self.monodromy_verdict(), self.generalized_verdict());
        let status = match (mv, gv) {
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => FlagStatus::Undetermined,
            (a, b) if a == b => FlagStatus::Agree,
            _ => FlagStatus::Contradiction,
        };
        out.push(ConsistencyFlag {
            kind: FlagKind::MonodromyVsGeneralized,
            status,
            detail: format!("monodromy {}, generalized {}", mv.as_str(), gv.as_str()),
        });

        let decay = match (&self.monodromy, &self.decay_fit) {
            (Ok(m), Ok(d)) => {
                let rho = m.result.rho;
                let gamma = d.fit.gamma;
                if rho == 0.0 {
                    let st = if gamma == f64::INFINITY {
                        FlagStatus::Agree
                    } else {
                        FlagStatus::Undetermined
                    };
                    (st, format!("rho = 0, fitted gamma = {gamma}"))
                } else {
                    let predicted = -rho.ln() / self.period;
                    if !gamma.is_finite() || predicted == 0.0 {
                        (
                            FlagStatus::Undetermined,
                            format!("fitted gamma = {gamma}, -ln(rho)/T = {predicted}"),
                        )
                    } else {
                        let rel = (gamma - predicted).abs() / predicted.abs();
                        let st = if rel <= opts.decay_tol {
                            FlagStatus::Agree
                        } else {
                            FlagStatus::Contradiction
                        };
                        (
                            st,
                            format!("fitted gamma = {gamma:.6}, -ln(rho)/T = {predicted:.6}, relative gap {rel:.3}"),
                        )
                    }
                }
            }
            _ => (
                FlagStatus::Undetermined,
                String::from("monodromy or decay fit unavailable"),
            ),
        };
        out.push(ConsistencyFlag {
            kind: FlagKind::DecayVsMonodromy,
            status: decay.0,
            detail: decay.1,
        });

        let raised = self.pointwise_verdict() == Verdict::Stable && mv == Verdict::Unstable;
        out.push(ConsistencyFlag {
            kind: FlagKind::FrozenDiscordance,
            status: if raised { FlagStatus::Raised } else { FlagStatus::Clear },
            detail: if raised {
                String::from("frozen-coefficient test passes but the monodromy operator is unstable")
            } else {
                format!(
                    "frozen {}, monodromy {}",
                    self.pointwise_verdict().as_str(),
                    mv.as_str()
                )
            },
        });
        out
    }
}

/// Decay fit from a seeded random history, simulated for `decay_periods` periods.
pub fn random_decay_fit(system: &DelaySystem, opts: &ReportOptions) -> Result<DecayFit> {
    let phi = random_history(system, opts.m_cells, opts.seed)?;
    let sim_opts = SimOptions::grid(system, opts.m_cells);
    let t_end = opts.decay_periods as f64 * system.period();
    let sim = simulate_homogeneous(system, &phi, 0.0, t_end, &sim_opts)?;
    decay_rate_fit(&sim.signal, system.tau_max(), WindowNorm::Sup)
}

/// Runs every applicable test; individual failures are recorded, not propagated.
pub fn stability_report(system: &DelaySystem, opts: &ReportOptions) -> StabilityReport {
    let err = |e: Error| format!("{e}");
    let pointwise = pointwise_frozen_test(system, opts.beta, &opts.frozen).map_err(err);
    let henry_hale = system
        .is_constant()
        .then(|| henry_hale_constant(system, opts.beta, &opts.frozen, opts.abscissa_tol).map_err(err));
    let generalized = generalized_test(system, opts.beta, opts.k, &opts.scan).map_err(err);
    let monodromy = monodromy_radius(system, opts.m_cells).map_err(err);
    let decay = random_decay_fit(system, opts).map_err(err);
    StabilityReport::assemble(system, opts, pointwise, henry_hale, generalized, monodromy, decay)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commensurate_detection() {
        assert!((commensurate_base(&[1.0, 2.0], 1000).unwrap() - 1.0).abs() < 1e-15);
        assert!((commensurate_base(&[1.0, 1.5], 1000).unwrap() - 0.5).abs() < 1e-15);
        assert!(commensurate_base(&[1.0, 2.0f64.sqrt()], 1000).is_none());
    }
}
