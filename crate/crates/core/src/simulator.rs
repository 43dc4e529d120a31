//! Time-domain solution of the homogeneous and forced systems.
//!
//! Two backends:
//!
//! * **grid**: uniform step `h`, delays rounded to `m_j = round(tau_j / h)` cells, outputs at
//!   cell midpoints `s + (n + 1/2) h`. Exact at the midpoints whenever every delay is a
//!   multiple of `h`.
//! * **exact**: recursive descent `y(t) = sum_j D_j(t) y(t - tau_j)` over the delay lattice,
//!   memoized on lattice offsets, reading the history once the argument drops to `s`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::lattice::{build_lattice, DelayLattice, LatticeOptions};
use crate::linalg::{fit_line, CMat, CVec};
use crate::system_model::DelaySystem;

/// Uniformly sampled vector signal; sample `i` sits at `start + i * step`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Signal {
    pub start: f64,
    pub step: f64,
    #[cfg_attr(feature = "serde", serde(with = "vec_serde"))]
    pub values: Vec<CVec>,
}

/// Samples as plain nested lists; nalgebra only serializes heap vectors with `std`.
#[cfg(feature = "serde")]
mod vec_serde {
    use super::*;
    use crate::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[CVec], s: S) -> core::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[C64]> = values.iter().map(|v| v.as_slice()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> core::result::Result<Vec<CVec>, D::Error> {
        let rows = Vec::<Vec<C64>>::deserialize(d)?;
        Ok(rows.into_iter().map(CVec::from_vec).collect())
    }
}

impl Signal {
    pub fn new(start: f64, step: f64, values: Vec<CVec>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "signal step must be positive, got {step}"
            )));
        }
        if values
            .iter()
            .any(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
        {
            return Err(Error::InvalidArgument("signal values must be finite".into()));
        }
        Ok(Self { start, step, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Piecewise-constant reading: sample `i` covers `[t_i - step/2, t_i + step/2)`;
    /// times outside the sampled range take the nearest end value.
    pub fn at(&self, t: f64) -> CVec {
        let x = ((t - self.start) / self.step + 0.5).floor();
        let i = if x <= 0.0 {
            0
        } else {
            (x as usize).min(self.values.len() - 1)
        };
        self.values[i].clone()
    }
}

/// A vector-valued function of time, either closed-form or sampled.
#[derive(Clone)]
pub enum Source {
    Function(Arc<dyn Fn(f64) -> CVec + Send + Sync>),
    Samples(Signal),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Function(_) => f.write_str("Source::Function(..)"),
            Source::Samples(s) => f.debug_tuple("Source::Samples").field(s).finish(),
        }
    }
}

impl Source {
    pub fn function<F>(f: F) -> Self
    where
        F: Fn(f64) -> CVec + Send + Sync + 'static,
    {
        Source::Function(Arc::new(f))
    }

    pub fn zero(dim: usize) -> Self {
        Source::function(move |_| CVec::zeros(dim))
    }

    pub fn eval(&self, t: f64) -> CVec {
        match self {
            Source::Function(f) => f(t),
            Source::Samples(s) => s.at(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Backend {
    Grid,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Output spacing; for the grid backend also the time step.
    pub step: f64,
    pub backend: Backend,
    /// Warning threshold on `|tau_j - m_j h|`; `None` means `h / 100`.
    pub delay_round_tol: Option<f64>,
    /// Any component above this magnitude aborts the run.
    pub blowup: f64,
    /// Cap on lattice points for the exact backend.
    pub lattice_cap: usize,
}

impl SimOptions {
    /// Grid backend with `cells` steps per largest delay.
    pub fn grid(system: &DelaySystem, cells: usize) -> Self {
        Self {
            step: system.tau_max() / cells as f64,
            backend: Backend::Grid,
            delay_round_tol: None,
            blowup: 1e300,
            lattice_cap: 2_000_000,
        }
    }

    pub fn exact(step: f64) -> Self {
        Self {
            step,
            backend: Backend::Exact,
            delay_round_tol: None,
            blowup: 1e300,
            lattice_cap: 2_000_000,
        }
    }
}

/// Simulation output plus the grid diagnostics.
#[derive(Clone, Debug)]
pub struct Simulation {
    /// Samples at `s + (i + 1/2) h`.
    pub signal: Signal,
    /// `max_j |tau_j - m_j h|` (zero for the exact backend).
    pub max_delay_rounding: f64,
    /// Set when the rounding exceeded `delay_round_tol`.
    pub warnings: Vec<String>,
}

/// Delay-to-cell rounding for a grid step.
#[derive(Clone, Debug)]
pub struct GridPlan {
    pub step: f64,
    pub cells: Vec<usize>,
    pub max_rounding: f64,
    pub warnings: Vec<String>,
}

impl GridPlan {
    pub fn new(system: &DelaySystem, step: f64, tol: Option<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
        }
        let tol = tol.unwrap_or(step / 100.0);
        let mut cells = Vec::new();
        let mut max_rounding: f64 = 0.0;
        let mut warnings = Vec::new();
        for &tau in system.delays() {
            let m = (tau / step).round();
            if m < 1.0 {
                return Err(Error::DelayBelowStep { delay: tau, step });
            }
            let err = (tau - m * step).abs();
            if err > tol {
                warnings.push(format!("delay {tau} rounded to {m} cells of {step} (error {err:e})"));
            }
            max_rounding = max_rounding.max(err);
            cells.push(m as usize);
        }
        Ok(Self {
            step,
            cells,
            max_rounding,
            warnings,
        })
    }

    /// Number of history cells (`m_N`).
    pub fn history_len(&self) -> usize {
        *self.cells.iter().max().unwrap()
    }
}

/// Core grid recursion on `d x c` blocks.
///
/// `history[k]` is `y_{k - L}` for `k < L = plan.history_len()`. Calls `sink(n, y_n)` for
/// `n = 0..steps`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_grid<F, S>(
    system: &DelaySystem,
    plan: &GridPlan,
    s: f64,
    steps: usize,
    history: &[CMat],
    forcing: Option<F>,
    blowup: f64,
    mut sink: S,
) -> Result<()>
where
    F: Fn(usize) -> CMat,
    S: FnMut(usize, &CMat),
{
    let l = plan.history_len();
    debug_assert_eq!(history.len(), l);
    let h = plan.step;
    // Ring buffer: slot (n mod l) holds y_n for n in [cur - l, cur).
    let mut ring: Vec<CMat> = history.to_vec();
    let slot = |n: i64| -> usize { n.rem_euclid(l as i64) as usize };
    for n in 0..steps {
        let t = s + (n as f64 + 0.5) * h;
        let mut y = match &forcing {
            Some(f) => f(n),
            None => CMat::zeros(history[0].nrows(), history[0].ncols()),
        };
        for (j, &m) in plan.cells.iter().enumerate() {
            let past = &ring[slot(n as i64 - m as i64)];
            y += system.coefficient(j, t) * past;
        }
        if y.iter().any(|z| !(z.norm() <= blowup)) {
            return Err(Error::BlowUp(t));
        }
        sink(n, &y);
        ring[slot(n as i64)] = y;
    }
    Ok(())
}

fn steps_between(s: f64, t_end: f64, h: f64) -> Result<usize> {
    if !(t_end >= s) {
        return Err(Error::InvalidArgument(format!("t_end {t_end} precedes s {s}")));
    }
    Ok(((t_end - s) / h).round() as usize)
}

fn history_cells(phi: &Source, plan: &GridPlan) -> Vec<CMat> {
    let l = plan.history_len();
    (0..l)
        .map(|k| {
            let theta = (k as f64 - l as f64 + 0.5) * plan.step;
            let v = phi.eval(theta);
            CMat::from_column_slice(v.len(), 1, v.as_slice())
        })
        .collect()
}

/// Solves `y(t) = sum_j D_j(t) y(t - tau_j)` for `t > s` with `y(s + theta) = phi(theta)`,
/// `theta in [-tau_N, 0]`. Output samples at `s + (i + 1/2) h` up to `t_end`.
pub fn simulate_homogeneous(
    system: &DelaySystem,
    phi: &Source,
    s: f64,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Simulation> {
    let h = opts.step;
    let steps = steps_between(s, t_end, h)?;
    match opts.backend {
        Backend::Grid => {
            let plan = GridPlan::new(system, h, opts.delay_round_tol)?;
            let hist = history_cells(phi, &plan);
            let mut values = Vec::with_capacity(steps);
            run_grid(
                system,
                &plan,
                s,
                steps,
                &hist,
                None::<fn(usize) -> CMat>,
                opts.blowup,
                |_, y| values.push(y.column(0).into_owned()),
            )?;
            Ok(Simulation {
                signal: Signal::new(s + 0.5 * h, h, values)?,
                max_delay_rounding: plan.max_rounding,
                warnings: plan.warnings,
            })
        }
        Backend::Exact => {
            let solver = ExactSolver::new(system, s, t_end - s, opts.lattice_cap)?;
            let mut values = Vec::with_capacity(steps);
            for i in 0..steps {
                let t = s + (i as f64 + 0.5) * h;
                let y = solver.homogeneous(phi, t)?;
                check_blowup(&y, t, opts.blowup)?;
                values.push(y);
            }
            Ok(Simulation {
                signal: Signal::new(s + 0.5 * h, h, values)?,
                max_delay_rounding: 0.0,
                warnings: Vec::new(),
            })
        }
    }
}

/// Solves `y(t) = sum_j D_j(t) y(t - tau_j) + u(t)` for `t >= s` with `y = 0` before `s`.
pub fn simulate_forced(system: &DelaySystem, u: &Source, s: f64, t_end: f64, opts: &SimOptions) -> Result<Simulation> {
    let h = opts.step;
    let steps = steps_between(s, t_end, h)?;
    let d = system.dim();
    match opts.backend {
        Backend::Grid => {
            let plan = GridPlan::new(system, h, opts.delay_round_tol)?;
            let hist = alloc::vec![CMat::zeros(d, 1); plan.history_len()];
            let mut values = Vec::with_capacity(steps);
            let forcing = |n: usize| {
                let v = u.eval(s + (n as f64 + 0.5) * h);
                CMat::from_column_slice(d, 1, v.as_slice())
            };
            run_grid(system, &plan, s, steps, &hist, Some(forcing), opts.blowup, |_, y| {
                values.push(y.column(0).into_owned())
            })?;
            Ok(Simulation {
                signal: Signal::new(s + 0.5 * h, h, values)?,
                max_delay_rounding: plan.max_rounding,
                warnings: plan.warnings,
            })
        }
        Backend::Exact => {
            let solver = ExactSolver::new(system, s, t_end - s, opts.lattice_cap)?;
            let mut values = Vec::with_capacity(steps);
            for i in 0..steps {
                let t = s + (i as f64 + 0.5) * h;
                let y = solver.forced(u, t)?;
                check_blowup(&y, t, opts.blowup)?;
                values.push(y);
            }
            Ok(Simulation {
                signal: Signal::new(s + 0.5 * h, h, values)?,
                max_delay_rounding: 0.0,
                warnings: Vec::new(),
            })
        }
    }
}

fn check_blowup(y: &CVec, t: f64, blowup: f64) -> Result<()> {
    if y.iter().any(|z| !(z.norm() <= blowup)) {
        return Err(Error::BlowUp(t));
    }
    Ok(())
}

/// Exact lattice evaluation of solutions at arbitrary times.
#[derive(Clone, Debug)]
pub struct ExactSolver {
    system: DelaySystem,
    s: f64,
    lattice: DelayLattice,
    /// `succ[i][j]`: index of offset `f_i + tau_j`, if inside the horizon.
    succ: Vec<Vec<Option<usize>>>,
}

impl ExactSolver {
    pub fn new(system: &DelaySystem, s: f64, horizon: f64, cap: usize) -> Result<Self> {
        let lattice = build_lattice(
            system.delays(),
            horizon.max(0.0),
            &LatticeOptions { merge_tol: None, cap },
        )?;
        let n = system.n_delays();
        let mut succ = alloc::vec![alloc::vec![None; n]; lattice.len()];
        for q in 0..lattice.len() {
            for &(j, p) in lattice.predecessors(q) {
                succ[p][j] = Some(q);
            }
        }
        Ok(Self {
            system: system.clone(),
            s,
            lattice,
            succ,
        })
    }

    fn tie_tol(&self, t: f64) -> f64 {
        1e-12 * (1.0 + t.abs() + self.s.abs())
    }

    fn check(&self, t: f64) -> Result<()> {
        let need = t - self.s;
        if need > self.lattice.horizon() + self.lattice.merge_tol() {
            return Err(Error::HorizonExceeded {
                have: self.lattice.horizon(),
                need,
            });
        }
        Ok(())
    }

    /// `y(t)` for the homogeneous problem with history `phi`.
    pub fn homogeneous(&self, phi: &Source, t: f64) -> Result<CVec> {
        let tol = self.tie_tol(t);
        if t <= self.s + tol {
            return Ok(phi.eval(t - self.s));
        }
        self.check(t)?;
        let pts = self.lattice.points();
        let count = pts.partition_point(|p| t - p.offset > self.s + tol);
        // Memo indexed by lattice point: y(t - f).
        let mut memo: Vec<CVec> = alloc::vec![CVec::zeros(0); count];
        for i in (0..count).rev() {
            let x = t - pts[i].offset;
            let mut acc = CVec::zeros(self.system.dim());
            for (j, &tau) in self.system.delays().iter().enumerate() {
                let arg = x - tau;
                let prev = match self.succ[i][j] {
                    Some(k) if arg > self.s + tol && k < count => memo[k].clone(),
                    None if arg > self.s + tol => return Err(Error::MissingLatticePoint(pts[i].offset + tau)),
                    _ => phi.eval(arg - self.s),
                };
                acc += self.system.coefficient(j, x) * prev;
            }
            memo[i] = acc;
        }
        Ok(memo.swap_remove(0))
    }

    /// `y(t)` for the forced problem with zero history.
    pub fn forced(&self, u: &Source, t: f64) -> Result<CVec> {
        let d = self.system.dim();
        let tol = self.tie_tol(t);
        if t < self.s - tol {
            return Ok(CVec::zeros(d));
        }
        self.check(t)?;
        let pts = self.lattice.points();
        let count = pts.partition_point(|p| t - p.offset >= self.s - tol);
        let mut memo: Vec<CVec> = alloc::vec![CVec::zeros(0); count];
        for i in (0..count).rev() {
            let x = t - pts[i].offset;
            let mut acc = u.eval(x);
            for (j, &tau) in self.system.delays().iter().enumerate() {
                if x - tau >= self.s - tol {
                    match self.succ[i][j] {
                        Some(k) if k < count => acc += self.system.coefficient(j, x) * &memo[k],
                        Some(_) => {}
                        None => return Err(Error::MissingLatticePoint(pts[i].offset + tau)),
                    }
                }
            }
            memo[i] = acc;
        }
        Ok(memo.swap_remove(0))
    }
}

/// Discretized solution operator `U(t, s)` on `M` piecewise-constant cells of `[-tau_N, 0]`.
///
/// Column `k d + c` is the response to the indicator of cell `k` in component `c`; rows
/// follow the same layout for the state at `t`. Uses the grid backend with `h = tau_N / M`.
pub fn solution_operator_matrix(system: &DelaySystem, s: f64, t: f64, m: usize) -> Result<CMat> {
    if m < 2 {
        return Err(Error::InvalidArgument("at least two state cells are required".into()));
    }
    let d = system.dim();
    let h = system.tau_max() / m as f64;
    let plan = GridPlan::new(system, h, None)?;
    let steps = steps_between(s, t, h)?;
    let l = plan.history_len();
    debug_assert_eq!(l, m);
    let md = m * d;
    let hist: Vec<CMat> = (0..m)
        .map(|k| {
            let mut b = CMat::zeros(d, md);
            for c in 0..d {
                b[(c, k * d + c)] = 1.0.into();
            }
            b
        })
        .collect();
    let mut out = CMat::zeros(md, md);
    // State cell k at time t is y_{steps - m + k}; negative indices are still history.
    for k in 0..m {
        let n = steps as i64 - m as i64 + k as i64;
        if n < 0 {
            let src = &hist[(n + m as i64) as usize];
            out.view_mut((k * d, 0), (d, md)).copy_from(src);
        }
    }
    let first = steps.saturating_sub(m);
    run_grid(
        system,
        &plan,
        s,
        steps,
        &hist,
        None::<fn(usize) -> CMat>,
        f64::INFINITY,
        |n, y| {
            if n >= first {
                let k = n + m - steps;
                out.view_mut((k * d, 0), (d, md)).copy_from(y);
            }
        },
    )?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum WindowNorm {
    Sup,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    /// Decay rate; negative means growth, `+inf` for an identically zero trajectory.
    pub gamma: f64,
    pub k: f64,
    pub windows: usize,
}

/// Fits `||y_t|| ~ K exp(-gamma (t - s))` from window norms of width `window`.
///
/// Windows tile the trajectory from its first cell; the first window is dropped when at
/// least six are available, windows with zero norm are skipped.
pub fn decay_rate_fit(signal: &Signal, window: f64, norm: WindowNorm) -> Result<DecayFit> {
    if !(window > 0.0) {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let origin = signal.start - 0.5 * signal.step;
    let span = signal.len() as f64 * signal.step;
    let count = (span / window * (1.0 + 1e-12)).floor() as usize;
    if count < 5 {
        return Err(Error::InvalidArgument(format!(
            "trajectory covers {count} windows, at least 5 are needed"
        )));
    }
    let mut acc = alloc::vec![0.0f64; count];
    for (i, v) in signal.values.iter().enumerate() {
        let w = ((signal.time(i) - origin) / window).floor() as usize;
        if w >= count {
            break;
        }
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        match norm {
            WindowNorm::Sup => acc[w] = acc[w].max(n2.sqrt()),
            WindowNorm::L2 => acc[w] += n2 * signal.step,
        }
    }
    if norm == WindowNorm::L2 {
        for a in &mut acc {
            *a = a.sqrt();
        }
    }
    let skip = usize::from(count >= 6);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (w, a) in acc.iter().enumerate().skip(skip) {
        if *a > 0.0 && a.is_finite() {
            xs.push((w as f64 + 0.5) * window);
            ys.push(a.ln());
        }
    }
    if xs.is_empty() {
        return Ok(DecayFit {
            gamma: f64::INFINITY,
            k: 0.0,
            windows: count,
        });
    }
    let (slope, intercept) = match fit_line(&xs, &ys) {
        Some(f) => f,
        // A single nonzero window: everything after it vanished.
        None => (f64::NEG_INFINITY, ys[0]),
    };
    Ok(DecayFit {
        gamma: -slope,
        k: intercept.exp(),
        windows: count,
    })
}
