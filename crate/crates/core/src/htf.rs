//! Harmonic transfer function and instantaneous transfer function.
//!
//! With the block layout of [`crate::spectral`], block row `n` of `R_K(p)` carries the
//! frequency `p - i n omega`. The inverse `H(p) = R(p)^-1` and the Fourier coefficients
//! `G_k(p)` of the instantaneous transfer function
//!
//! ```text
//! G(t, p) = sum_f K_f(t) exp(-p f) = sum_k G_k(p) exp(i k omega t)
//! ```
//!
//! are tied by `H(p)[n, m] = G_{m - n}(p - i m omega)`. In particular a pure tone
//! `u(t) = v exp(p t)` produces `y(t) = sum_n H(p)[n, 0] v exp((p - i n omega) t)`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::lattice::{GrowthEnvelope, KernelCoefficients};
use crate::linalg::{c64, expi, max_abs_diff, sigma_min, vec_max_abs, CMat, CVec, C64};
use crate::simulator::{simulate_forced, SimOptions, Source};
use crate::spectral::assemble_r_with;
use crate::stability::monodromy_radius;
use crate::system_model::{DelaySystem, QuadratureOptions, SystemHarmonics};

/// `R_K(p)^-1` in the block layout of [`crate::spectral`].
#[derive(Clone, Debug)]
pub struct HtfMatrix {
    pub p: C64,
    pub k: usize,
    pub d: usize,
    pub data: CMat,
    pub sigma_min: f64,
}

impl HtfMatrix {
    /// Block `(n, m)`, harmonic indices in `-K..=K`.
    pub fn block(&self, n: i64, m: i64) -> CMat {
        let d = self.d;
        let r = (n + self.k as i64) as usize * d;
        let c = (m + self.k as i64) as usize * d;
        self.data.view((r, c), (d, d)).into_owned()
    }
}

/// Default floor on `sigma_min(R_K(p))` below which inversion is refused.
pub const SINGULAR_FLOOR: f64 = 1e-10;

pub fn htf_matrix_with(
    system: &DelaySystem,
    harmonics: &SystemHarmonics,
    p: C64,
    k: usize,
    floor: f64,
) -> Result<HtfMatrix> {
    let r = assemble_r_with(system, harmonics, p, k);
    let s = sigma_min(&r.data)?;
    if !(s > floor) {
        return Err(Error::Singular(s));
    }
    let inv = r.data.clone().lu().try_inverse().ok_or(Error::Singular(s))?;
    Ok(HtfMatrix {
        p,
        k,
        d: system.dim(),
        data: inv,
        sigma_min: s,
    })
}

pub fn htf_matrix(system: &DelaySystem, p: C64, k: usize) -> Result<HtfMatrix> {
    let h = system.harmonics(2 * k, &QuadratureOptions::default())?;
    htf_matrix_with(system, &h, p, k, SINGULAR_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstantaneousTF {
    pub t: f64,
    pub p: C64,
    pub value: CMat,
    pub horizon: f64,
    /// Bound on the neglected lattice terms beyond the horizon.
    pub tail_bound: f64,
}

fn tail_bound(env: &GrowthEnvelope, p: C64, horizon: f64, tau_min: f64) -> f64 {
    let gap = p.re - env.gamma;
    env.k * (-gap * horizon).exp() / (1.0 - (-gap * tau_min).exp())
}

fn check_margin(env: &GrowthEnvelope, p: C64, margin: f64) -> Result<()> {
    if !(p.re > env.gamma + margin) {
        return Err(Error::GrowthMargin {
            re: p.re,
            gamma: env.gamma,
        });
    }
    Ok(())
}

/// `G(t, p)` summed over the lattice up to the kernel horizon, with a tail bound from the
/// fitted growth envelope. Requires `Re p > gamma + margin`.
pub fn instantaneous_tf(
    kernels: &KernelCoefficients,
    env: &GrowthEnvelope,
    t: f64,
    p: C64,
    margin: f64,
) -> Result<InstantaneousTF> {
    check_margin(env, p, margin)?;
    Ok(InstantaneousTF {
        t,
        p,
        value: kernels.itf_at(t, p),
        horizon: kernels.horizon(),
        tail_bound: tail_bound(env, p, kernels.horizon(), kernels.system().tau_min()),
    })
}

/// Fourier coefficients `G_k(p)`, `|k| <= order`, by the trapezoidal rule on the kernel
/// grid (needs at least `2 order + 1` grid points).
pub fn itf_fourier(
    kernels: &KernelCoefficients,
    env: &GrowthEnvelope,
    p: C64,
    order: usize,
    margin: f64,
) -> Result<Vec<CMat>> {
    check_margin(env, p, margin)?;
    let m_t = kernels.grid().len();
    if m_t < 2 * order + 1 {
        return Err(Error::InvalidArgument(alloc::format!(
            "kernel grid of {m_t} points cannot resolve {order} harmonics"
        )));
    }
    let d = kernels.system().dim();
    let omega = kernels.system().omega();
    let mut out = alloc::vec![CMat::zeros(d, d); 2 * order + 1];
    for (i, &t) in kernels.grid().iter().enumerate() {
        let g = kernels.itf_on_grid(i, p);
        for (idx, slot) in out.iter_mut().enumerate() {
            let k = idx as i64 - order as i64;
            *slot += &g * expi(-(k as f64) * omega * t);
        }
    }
    let inv = C64::from(1.0 / m_t as f64);
    for c in &mut out {
        *c *= inv;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HtfConsistency {
    pub residual: f64,
    /// Central window half-width: entries with `|n|, |m| <= window` are compared.
    pub window: usize,
    pub sigma_min: f64,
}

/// Largest entry mismatch between `R_K(p)^-1[n, m]` and `G_{m-n}(p - i m omega)` over
/// the central window `|n|, |m| <= K/2`.
pub fn htf_consistency(kernels: &KernelCoefficients, p: C64, k: usize, margin: f64) -> Result<HtfConsistency> {
    let system = kernels.system();
    let env = kernels.growth_envelope();
    let harmonics = system.harmonics(2 * k, &QuadratureOptions::default())?;
    let h = htf_matrix_with(system, &harmonics, p, k, SINGULAR_FLOOR)?;
    let w = (k / 2) as i64;
    let omega = system.omega();
    let mut residual: f64 = 0.0;
    for m in -w..=w {
        let q = p - c64(0.0, m as f64 * omega);
        let g = itf_fourier(kernels, &env, q, (2 * w) as usize, margin)?;
        for n in -w..=w {
            let gk = &g[(m - n + 2 * w) as usize];
            residual = residual.max(max_abs_diff(&h.block(n, m), gk));
        }
    }
    Ok(HtfConsistency {
        residual,
        window: w as usize,
        sigma_min: h.sigma_min,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyStateOptions {
    /// Grid cells per largest delay for the simulation and the monodromy estimate.
    pub m_cells: usize,
    pub min_periods: usize,
    pub max_periods: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            m_cells: 64,
            min_periods: 5,
            max_periods: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub frequency: f64,
    /// Output carrier coefficients `w_n = H(i nu)[n, 0] v`, `n in -K..=K`.
    pub coefficients: Vec<CVec>,
    pub rho: f64,
    pub periods: usize,
    /// `max |y_sim - y_pred| / max |y_pred|` over the last simulated period.
    pub mismatch: f64,
}

impl SteadyState {
    /// Predicted output `exp(i nu t) sum_n w_n exp(-i n omega t)`.
    pub fn predict(&self, t: f64, omega: f64) -> CVec {
        let k = (self.coefficients.len() / 2) as i64;
        let mut y = CVec::zeros(self.coefficients[0].len());
        for (i, w) in self.coefficients.iter().enumerate() {
            let n = i as i64 - k;
            y += w * expi((self.frequency - n as f64 * omega) * t);
        }
        y
    }
}

/// Predicts the periodic steady state driven by `u(t) = v exp(i nu t)` from the HTF and
/// compares with a forced simulation run for about `20 / (-ln rho)` periods.
pub fn steady_state_response(
    system: &DelaySystem,
    frequency: f64,
    v: &CVec,
    k: usize,
    opts: &SteadyStateOptions,
) -> Result<SteadyState> {
    if v.len() != system.dim() {
        return Err(Error::InvalidArgument("input vector has the wrong dimension".into()));
    }
    let rho = monodromy_radius(system, opts.m_cells)?.rho;
    if !(rho < 1.0) {
        return Err(Error::Unstable(rho));
    }
    let p = c64(0.0, frequency);
    let h = htf_matrix(system, p, k)?;
    let kk = k as i64;
    let coefficients: Vec<CVec> = (-kk..=kk).map(|n| h.block(n, 0) * v).collect();
    let periods = if rho == 0.0 {
        opts.min_periods
    } else {
        ((20.0 / -rho.ln()).ceil() as usize).clamp(opts.min_periods, opts.max_periods)
    };
    let mut out = SteadyState {
        frequency,
        coefficients,
        rho,
        periods,
        mismatch: 0.0,
    };
    let t_end = periods as f64 * system.period();
    let vv = v.clone();
    let u = Source::function(move |t| &vv * expi(frequency * t));
    let sim = simulate_forced(system, &u, 0.0, t_end, &SimOptions::grid(system, opts.m_cells))?;
    let omega = system.omega();
    let t_last = t_end - system.period();
    let (mut err, mut scale): (f64, f64) = (0.0, 0.0);
    for (i, y) in sim.signal.values.iter().enumerate() {
        let t = sim.signal.time(i);
        if t < t_last {
            continue;
        }
        let pred = out.predict(t, omega);
        err = err.max(vec_max_abs(&(y - &pred)));
        scale = scale.max(vec_max_abs(&pred));
    }
    out.mismatch = if scale > 0.0 { err / scale } else { err };
    Ok(out)
}
