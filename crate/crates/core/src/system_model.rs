//! Periodic coefficient functions and delay systems.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{c64, expi, fit_line, max_abs, max_abs_diff, norm2, wrap, CMat, C64};

pub type Sampler = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Options for the trapezoidal Fourier quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Accepted change between `M` and `2M` sample estimates, relative to `max(1, sup |D|)`.
    pub tol: f64,
    pub min_points: usize,
    pub max_points: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            min_points: 64,
            max_points: 1 << 16,
        }
    }
}

/// Fourier coefficients `D^(k)`, `|k| <= order`, plus the quadrature error estimate.
#[derive(Clone, Debug)]
pub struct FourierCoefficients {
    pub order: usize,
    coeffs: Vec<CMat>,
    pub error_estimate: f64,
    pub points: usize,
}

impl FourierCoefficients {
    pub fn get(&self, k: i64) -> Option<&CMat> {
        if k.unsigned_abs() as usize > self.order {
            return None;
        }
        Some(&self.coeffs[(k + self.order as i64) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, &CMat)> {
        let o = self.order as i64;
        self.coeffs.iter().enumerate().map(move |(i, m)| (i as i64 - o, m))
    }

    /// Least-squares exponent `r` in `max(|D^(k)|, |D^(-k)|) ~ C k^-r`, `k >= 1`.
    ///
    /// Harmonics below `1e-12` of the largest one (or below the quadrature error) are
    /// dropped. `None` when fewer than three remain, i.e. the decay is too fast to resolve.
    pub fn decay_exponent(&self) -> Option<f64> {
        let scale = self.coeffs.iter().map(max_abs).fold(0.0, f64::max);
        let floor = (1e-12 * scale).max(10.0 * self.error_estimate);
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in 1..=self.order as i64 {
            let v = max_abs(&self.coeffs[(k + self.order as i64) as usize])
                .max(max_abs(&self.coeffs[(self.order as i64 - k) as usize]));
            if v > floor && v > 0.0 {
                xs.push((k as f64).ln());
                ys.push(v.ln());
            }
        }
        if xs.len() < 3 {
            return None;
        }
        fit_line(&xs, &ys).map(|(slope, _)| -slope)
    }
}

/// A `T`-periodic `d x d` complex matrix function.
///
/// Carries a sampler (used by time-domain code) and, when known in closed form, the
/// exact list of nonzero Fourier coefficients (used by frequency-domain code). Samplers
/// without exact Fourier data are transformed by quadrature on demand.
#[derive(Clone)]
pub struct PeriodicMatrixFunction {
    dim: usize,
    period: f64,
    sampler: Sampler,
    exact_fourier: Option<Vec<(i64, CMat)>>,
    holder_exponent: Option<f64>,
}

impl fmt::Debug for PeriodicMatrixFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicMatrixFunction")
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("exact_fourier", &self.exact_fourier)
            .field("holder_exponent", &self.holder_exponent)
            .finish()
    }
}

impl PeriodicMatrixFunction {
    pub fn constant(m: CMat, period: f64) -> Result<Self> {
        Self::trig_polynomial(period, alloc::vec![(0, m)])
    }

    /// `D(t) = sum_k C_k exp(i k omega t)`, `omega = 2 pi / period`.
    pub fn trig_polynomial(period: f64, terms: Vec<(i64, CMat)>) -> Result<Self> {
        check_period(period)?;
        let dim = match terms.first() {
            Some((_, m)) => m.nrows(),
            None => return Err(Error::InvalidSystem("empty trigonometric polynomial".into())),
        };
        let mut merged: Vec<(i64, CMat)> = Vec::new();
        for (k, m) in terms {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::InvalidSystem(
                    "coefficient blocks must be square of equal size".into(),
                ));
            }
            match merged.iter_mut().find(|(j, _)| *j == k) {
                Some((_, acc)) => *acc += m,
                None => merged.push((k, m)),
            }
        }
        merged.sort_by_key(|(k, _)| *k);
        let omega = 2.0 * PI / period;
        let table = merged.clone();
        let sampler: Sampler = Arc::new(move |t: f64| {
            let t = wrap(t, period);
            let mut out = CMat::zeros(dim, dim);
            for (k, m) in &table {
                if *k == 0 {
                    out += m;
                } else {
                    out += m * expi(*k as f64 * omega * t);
                }
            }
            out
        });
        Ok(Self {
            dim,
            period,
            sampler,
            exact_fourier: Some(merged),
            holder_exponent: None,
        })
    }

    /// Arbitrary sampler; Fourier data will be computed by quadrature.
    ///
    /// The sampler is called with `t` already reduced to `[0, period)`.
    pub fn from_sampler<F>(dim: usize, period: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> CMat + Send + Sync + 'static,
    {
        check_period(period)?;
        if dim == 0 {
            return Err(Error::InvalidSystem("dimension must be positive".into()));
        }
        let probe = f(0.0);
        if probe.nrows() != dim || probe.ncols() != dim {
            return Err(Error::InvalidSystem(format!(
                "sampler returns {}x{}, expected {dim}x{dim}",
                probe.nrows(),
                probe.ncols()
            )));
        }
        let sampler: Sampler = Arc::new(move |t| f(wrap(t, period)));
        Ok(Self {
            dim,
            period,
            sampler,
            exact_fourier: None,
            holder_exponent: None,
        })
    }

    pub fn with_holder_exponent(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("holder exponent {delta} not in (0, 1)")));
        }
        self.holder_exponent = Some(delta);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn holder_exponent(&self) -> Option<f64> {
        self.holder_exponent
    }

    /// Nonzero Fourier terms when the function was built from closed-form Fourier data.
    pub fn exact_fourier(&self) -> Option<&[(i64, CMat)]> {
        self.exact_fourier.as_deref()
    }

    pub fn sampler(&self) -> &Sampler {
        &self.sampler
    }

    #[inline]
    pub fn eval(&self, t: f64) -> CMat {
        (self.sampler)(t)
    }

    /// `Some(M)` when the function is known to be constant.
    pub fn constant_value(&self) -> Option<&CMat> {
        match self.exact_fourier.as_deref() {
            Some(terms) => {
                let mut c = None;
                for (k, m) in terms {
                    if *k == 0 {
                        c = Some(m);
                    } else if max_abs(m) != 0.0 {
                        return None;
                    }
                }
                c
            }
            None => None,
        }
    }

    /// Upper bound (closed-form Fourier data) or dense-sample estimate of `sup_t ||D(t)||_2`.
    pub fn sup_norm(&self) -> Result<f64> {
        if let Some(terms) = &self.exact_fourier {
            let mut s = 0.0;
            for (_, m) in terms {
                s += norm2(m)?;
            }
            return Ok(s);
        }
        let n = 512;
        let mut best: f64 = 0.0;
        for i in 0..n {
            best = best.max(norm2(&self.eval(self.period * i as f64 / n as f64))?);
        }
        Ok(best)
    }

    /// Same function viewed as `k * period`-periodic; harmonic `m` becomes `k m`.
    pub fn inflated(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("inflation factor must be positive".into()));
        }
        let period = self.period * k as f64;
        let inner = self.clone();
        let sampler: Sampler = Arc::new(move |t| inner.eval(t));
        Ok(Self {
            dim: self.dim,
            period,
            sampler,
            exact_fourier: self
                .exact_fourier
                .as_ref()
                .map(|v| v.iter().map(|(m, c)| (m * k as i64, c.clone())).collect()),
            holder_exponent: self.holder_exponent,
        })
    }

    /// `D^(k) = (1/T) int_0^T D(t) exp(-i k omega t) dt` for `|k| <= order`.
    pub fn fourier_coefficients(&self, order: usize, opts: &QuadratureOptions) -> Result<FourierCoefficients> {
        let n = 2 * order + 1;
        if let Some(terms) = &self.exact_fourier {
            let mut coeffs = alloc::vec![CMat::zeros(self.dim, self.dim); n];
            for (k, m) in terms {
                if k.unsigned_abs() as usize <= order {
                    coeffs[(k + order as i64) as usize] = m.clone();
                }
            }
            return Ok(FourierCoefficients {
                order,
                coeffs,
                error_estimate: 0.0,
                points: 0,
            });
        }
        let mut m_q = (4 * (order + 1)).max(opts.min_points).next_power_of_two();
        // Samples on the finest grid reached so far; doubling reuses them.
        let mut samples: Vec<CMat> = (0..m_q)
            .map(|q| self.eval(self.period * q as f64 / m_q as f64))
            .collect();
        let mut prev = dft(&samples, order);
        let scale = samples.iter().map(max_abs).fold(1.0, f64::max);
        loop {
            let m2 = 2 * m_q;
            if m2 > opts.max_points {
                let estimate = estimate_change(&prev, &dft(&samples, order));
                return Err(Error::QuadratureNotConverged { estimate, points: m_q });
            }
            let mut finer = Vec::with_capacity(m2);
            for (q, s) in samples.iter().enumerate() {
                finer.push(s.clone());
                finer.push(self.eval(self.period * (2 * q + 1) as f64 / m2 as f64));
            }
            samples = finer;
            m_q = m2;
            let next = dft(&samples, order);
            let change = estimate_change(&prev, &next);
            prev = next;
            if change <= opts.tol * scale {
                return Ok(FourierCoefficients {
                    order,
                    coeffs: prev,
                    error_estimate: change,
                    points: m_q,
                });
            }
        }
    }
}

fn check_period(period: f64) -> Result<()> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidSystem(format!("period must be positive, got {period}")));
    }
    Ok(())
}

fn estimate_change(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| max_abs_diff(x, y)).fold(0.0, f64::max)
}

/// Trapezoidal rule on uniform samples over one period (spectrally accurate for smooth data).
fn dft(samples: &[CMat], order: usize) -> Vec<CMat> {
    let m = samples.len();
    let d = samples[0].nrows();
    let n = 2 * order + 1;
    let mut out = alloc::vec![CMat::zeros(d, d); n];
    for (q, s) in samples.iter().enumerate() {
        let base = expi(-2.0 * PI * q as f64 / m as f64);
        let base_inv = base.conj();
        // k = 0, then walk outward in both directions.
        out[order] += s;
        let mut wp = c64(1.0, 0.0);
        let mut wm = c64(1.0, 0.0);
        for k in 1..=order {
            wp *= base;
            wm *= base_inv;
            out[order + k] += s * wp;
            out[order - k] += s * wm;
        }
    }
    let inv = 1.0 / m as f64;
    for c in &mut out {
        *c *= C64::from(inv);
    }
    out
}

/// `y(t) = sum_j D_j(t) y(t - tau_j)` with `T`-periodic `D_j`.
#[derive(Clone, Debug)]
pub struct DelaySystem {
    dim: usize,
    period: f64,
    delays: Vec<f64>,
    coefficients: Vec<PeriodicMatrixFunction>,
    real: bool,
}

impl DelaySystem {
    /// Validates `0 < tau_1 < ... < tau_N < T` and matching coefficient shapes.
    ///
    /// `real` asserts the coefficients are real-valued; it is spot-checked on a grid.
    pub fn new(delays: Vec<f64>, coefficients: Vec<PeriodicMatrixFunction>, real: bool) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::InvalidSystem("at least one delay is required".into()));
        }
        if delays.len() != coefficients.len() {
            return Err(Error::InvalidSystem(format!(
                "{} delays but {} coefficients",
                delays.len(),
                coefficients.len()
            )));
        }
        if !(delays[0].is_finite() && delays[0] > 0.0) {
            return Err(Error::InvalidSystem(format!(
                "delays must be positive, got {}",
                delays[0]
            )));
        }
        for w in delays.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidSystem(format!(
                    "delays must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let dim = coefficients[0].dim();
        let period = coefficients[0].period();
        for c in &coefficients {
            if c.dim() != dim {
                return Err(Error::InvalidSystem("coefficients differ in dimension".into()));
            }
            if (c.period() - period).abs() > 1e-12 * period {
                return Err(Error::InvalidSystem("coefficients differ in period".into()));
            }
        }
        let tau_max = *delays.last().unwrap();
        if tau_max >= period {
            return Err(Error::InvalidSystem(format!(
                "largest delay {tau_max} must be below the period {period} (period inflation is opt-in)"
            )));
        }
        if real {
            for c in &coefficients {
                for i in 0..16 {
                    let m = c.eval(period * (i as f64 + 0.37) / 16.0);
                    if m.iter().any(|z| z.im.abs() > 1e-12 * (1.0 + z.re.abs())) {
                        return Err(Error::InvalidSystem(
                            "coefficient declared real has imaginary part".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            period,
            delays,
            coefficients,
            real,
        })
    }

    /// Like [`DelaySystem::new`], but if `tau_N >= T` the period is replaced by the smallest
    /// multiple `kT > tau_N`. Returns the system and the factor `k` used.
    pub fn with_period_inflation(
        delays: Vec<f64>,
        coefficients: Vec<PeriodicMatrixFunction>,
        real: bool,
    ) -> Result<(Self, usize)> {
        let period = coefficients
            .first()
            .map(|c| c.period())
            .ok_or_else(|| Error::InvalidSystem("at least one coefficient is required".into()))?;
        let tau_max = delays.iter().copied().fold(0.0, f64::max);
        let k = if tau_max < period {
            1
        } else {
            (tau_max / period).floor() as usize + 1
        };
        let coefficients = if k == 1 {
            coefficients
        } else {
            coefficients.iter().map(|c| c.inflated(k)).collect::<Result<Vec<_>>>()?
        };
        Ok((Self::new(delays, coefficients, real)?, k))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn n_delays(&self) -> usize {
        self.delays.len()
    }

    pub fn tau_min(&self) -> f64 {
        self.delays[0]
    }

    pub fn tau_max(&self) -> f64 {
        *self.delays.last().unwrap()
    }

    pub fn coefficients(&self) -> &[PeriodicMatrixFunction] {
        &self.coefficients
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    #[inline]
    pub fn coefficient(&self, j: usize, t: f64) -> CMat {
        self.coefficients[j].eval(t)
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.iter().all(|c| c.constant_value().is_some())
    }

    /// `sum_j sup_t ||D_j(t)||_2` (an upper bound when Fourier data is exact).
    pub fn sum_sup_norms(&self) -> Result<f64> {
        let mut s = 0.0;
        for c in &self.coefficients {
            s += c.sup_norm()?;
        }
        Ok(s)
    }

    /// Frozen characteristic matrix `I - sum_j exp(-p tau_j) D_j(t)`.
    pub fn frozen_matrix(&self, t: f64, p: C64) -> CMat {
        let mut m = CMat::identity(self.dim, self.dim);
        for (j, tau) in self.delays.iter().enumerate() {
            m -= self.coefficient(j, t) * (-p * *tau).exp();
        }
        m
    }

    /// Fourier coefficients of every `D_j` up to `order`.
    pub fn harmonics(&self, order: usize, opts: &QuadratureOptions) -> Result<SystemHarmonics> {
        let per_delay = self
            .coefficients
            .iter()
            .map(|c| c.fourier_coefficients(order, opts))
            .collect::<Result<Vec<_>>>()?;
        let error_estimate = per_delay.iter().map(|f| f.error_estimate).fold(0.0, f64::max);
        Ok(SystemHarmonics {
            dim: self.dim,
            order,
            per_delay,
            error_estimate,
        })
    }

    /// Advisory checks on coefficients with a declared Hölder exponent `delta`: warns when
    /// the fitted Fourier decay is visibly slower than `k^-(1+delta)` or the quadrature fails.
    pub fn regularity_warnings(&self, order: usize, opts: &QuadratureOptions) -> Vec<String> {
        let mut out = Vec::new();
        for (j, c) in self.coefficients.iter().enumerate() {
            let Some(delta) = c.holder_exponent() else { continue };
            match c.fourier_coefficients(order, opts) {
                Err(e) => out.push(format!("coefficient {j}: harmonics unavailable ({e})")),
                Ok(f) => {
                    if let Some(r) = f.decay_exponent() {
                        if r + 0.1 < 1.0 + delta {
                            out.push(format!(
                                "coefficient {j}: harmonics decay like k^-{r:.3}, slower than the declared k^-{:.3}",
                                1.0 + delta
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// Checks `max |D_j(t + T) - D_j(t)|` on an `n`-point grid.
    pub fn periodicity_defect(&self, n: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.coefficients {
            for i in 0..n {
                let t = 3.0 * self.period * i as f64 / n as f64 - self.period;
                worst = worst.max(max_abs_diff(&c.eval(t + self.period), &c.eval(t)));
            }
        }
        worst
    }
}

/// Precomputed Fourier coefficients of all delay coefficients to a fixed order.
#[derive(Clone, Debug)]
pub struct SystemHarmonics {
    pub dim: usize,
    pub order: usize,
    per_delay: Vec<FourierCoefficients>,
    pub error_estimate: f64,
}

impl SystemHarmonics {
    /// `D_j^(k)`, or `None` beyond the stored order (treated as zero by callers).
    pub fn get(&self, j: usize, k: i64) -> Option<&CMat> {
        self.per_delay[j].get(k)
    }
}
