//! One-period discrete realization and block impulse operators.
//!
//! State `z_k` is the solution segment on `[kT - tau_N, kT]` in `M_z` cells, input and output
//! segments live on `[kT, (k+1)T)` in `M_u` cells:
//!
//! ```text
//! z_{k+1} = A z_k + B u_k,    y_k = C z_k + D u_k,    z_0 = 0
//! ```
//!
//! All four matrices come from grid simulations with cell-indicator bases, so both grids
//! must share one step: `tau_N / M_z = T / M_u`. Cells are half-open, `[a, b)`.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::htf::htf_matrix;
use crate::lattice::{kernel_coefficients, GrowthEnvelope, KernelCoefficients, LatticeOptions};
use crate::linalg::{c64, expi, max_abs, CMat, CVec, C64};
use crate::simulator::{run_grid, solution_operator_matrix, GridPlan};
use crate::system_model::DelaySystem;

#[derive(Clone, Debug)]
pub struct DiscreteRealization {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: CMat,
    pub m_z: usize,
    pub m_u: usize,
    pub dim: usize,
    pub step: f64,
}

fn basis_block(d: usize, cols: usize, cell: usize) -> CMat {
    let mut b = CMat::zeros(d, cols);
    for c in 0..d {
        b[(c, cell * d + c)] = 1.0.into();
    }
    b
}

pub fn build_realization(system: &DelaySystem, m_z: usize, m_u: usize) -> Result<DiscreteRealization> {
    if m_z < 4 || m_u < 4 {
        return Err(Error::InvalidArgument("M_z and M_u must be at least 4".into()));
    }
    let h = system.tau_max() / m_z as f64;
    let hu = system.period() / m_u as f64;
    if (h - hu).abs() > 1e-12 * h {
        return Err(Error::GridMismatch(format!(
            "state step tau_N/M_z = {h} differs from input step T/M_u = {hu}"
        )));
    }
    let d = system.dim();
    let plan = GridPlan::new(system, h, None)?;
    let (nz, nu) = (m_z * d, m_u * d);

    let a = solution_operator_matrix(system, 0.0, system.period(), m_z)?;

    // Output trace of the free response to each state cell.
    let hist: Vec<CMat> = (0..m_z).map(|k| basis_block(d, nz, k)).collect();
    let mut c = CMat::zeros(nu, nz);
    run_grid(
        system,
        &plan,
        0.0,
        m_u,
        &hist,
        None::<fn(usize) -> CMat>,
        f64::INFINITY,
        |n, y| c.view_mut((n * d, 0), (d, nz)).copy_from(y),
    )?;

    // Forced response to each input cell from rest.
    let zero_hist = alloc::vec![CMat::zeros(d, nu); m_z];
    let mut b = CMat::zeros(nz, nu);
    let mut dd = CMat::zeros(nu, nu);
    let first = m_u - m_z.min(m_u);
    run_grid(
        system,
        &plan,
        0.0,
        m_u,
        &zero_hist,
        Some(|n: usize| basis_block(d, nu, n)),
        f64::INFINITY,
        |n, y| {
            dd.view_mut((n * d, 0), (d, nu)).copy_from(y);
            if n >= first {
                let k = n + m_z - m_u;
                b.view_mut((k * d, 0), (d, nu)).copy_from(y);
            }
        },
    )?;

    Ok(DiscreteRealization {
        a,
        b,
        c,
        d: dd,
        m_z,
        m_u,
        dim: d,
        step: h,
    })
}

impl DiscreteRealization {
    /// Iterates the recursion from `z_0 = 0`; each segment holds `M_u` cells of `d` values.
    pub fn run_discrete(&self, u_segments: &[CVec]) -> Result<Vec<CVec>> {
        let nu = self.m_u * self.dim;
        let mut z = CVec::zeros(self.m_z * self.dim);
        let mut out = Vec::with_capacity(u_segments.len());
        for u in u_segments {
            if u.len() != nu {
                return Err(Error::InvalidArgument(format!(
                    "input segment has {} entries, expected {nu}",
                    u.len()
                )));
            }
            out.push(&self.c * &z + &self.d * u);
            z = &self.a * &z + &self.b * u;
        }
        Ok(out)
    }

    /// `C (zI - A)^-1 B + D`.
    pub fn transfer(&self, z: C64) -> Result<CMat> {
        let n = self.a.nrows();
        let mut m = CMat::identity(n, n) * z;
        m -= &self.a;
        let x = m.lu().solve(&self.b).ok_or(Error::Singular(0.0))?;
        Ok(&self.c * x + &self.d)
    }
}

/// Cell-sampled block impulse operators `H_[k]`, `k = 0..=k_max`.
#[derive(Clone, Debug)]
pub struct BlockImpulseOperators {
    pub blocks: Vec<CMat>,
    pub m_u: usize,
    pub dim: usize,
    pub period: f64,
    pub step: f64,
}

/// Interpolation weights for reading a function sampled at nodes `(i + 1/2) h`,
/// `i in 0..m`, at node coordinate `xi = x / h - 1/2`: exact at nodes, six-point Lagrange
/// (one-sided near the ends) elsewhere.
fn node_weights(xi: f64, m: usize) -> Vec<(usize, f64)> {
    let r = xi.round();
    if (xi - r).abs() <= 1e-9 {
        let i = (r.max(0.0) as usize).min(m - 1);
        return alloc::vec![(i, 1.0)];
    }
    const P: usize = 6;
    let base = (xi.floor() as i64 - (P as i64 / 2 - 1)).clamp(0, m as i64 - P as i64) as usize;
    (0..P)
        .map(|a| {
            let xa = (base + a) as f64;
            let mut w = 1.0;
            for b in 0..P {
                if b != a {
                    let xb = (base + b) as f64;
                    w *= (xi - xb) / (xa - xb);
                }
            }
            (base + a, w)
        })
        .collect()
}

/// Builds `H_[k] v(t) = sum_{f : 0 <= kT + t - f < T} K_f(t) v(kT + t - f)` on `M_u` midpoint
/// samples of `[0, T)`. Grid-aligned arguments read the sample directly; others are
/// interpolated from neighbouring samples.
pub fn build_block_impulse(kernels: &KernelCoefficients, k_max: usize, m_u: usize) -> Result<BlockImpulseOperators> {
    let system = kernels.system();
    let period = system.period();
    let need = (k_max + 1) as f64 * period;
    if kernels.horizon() + kernels.lattice().merge_tol() < need {
        return Err(Error::HorizonExceeded {
            have: kernels.horizon(),
            need,
        });
    }
    if m_u < 6 {
        return Err(Error::InvalidArgument("M_u must be at least 6".into()));
    }
    let d = system.dim();
    let h = period / m_u as f64;
    let nu = m_u * d;
    let mut blocks = alloc::vec![CMat::zeros(nu, nu); k_max + 1];
    let offsets: Vec<f64> = kernels.lattice().offsets().collect();
    for i in 0..m_u {
        let t = (i as f64 + 0.5) * h;
        let ks = kernels.at(t);
        for (kf, &f) in ks.iter().zip(&offsets) {
            // Global output time kT + t; the argument lands in period k when
            // 0 <= kT + t - f < T.
            let shifted = f - t;
            let k_lo = if shifted <= 0.0 {
                0
            } else {
                (shifted / period).ceil() as usize
            };
            for k in [k_lo.saturating_sub(1), k_lo, k_lo + 1] {
                if k > k_max {
                    continue;
                }
                let x = k as f64 * period + t - f;
                if !(x >= 0.0 && x < period) {
                    continue;
                }
                for (node, w) in node_weights(x / h - 0.5, m_u) {
                    let mut blk = blocks[k].view_mut((i * d, node * d), (d, d));
                    blk += kf * C64::from(w);
                }
                break;
            }
        }
    }
    Ok(BlockImpulseOperators {
        blocks,
        m_u,
        dim: d,
        period,
        step: h,
    })
}

impl BlockImpulseOperators {
    fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m_u).map(move |i| (i as f64 + 0.5) * self.step)
    }

    /// `E_{-p} (sum_{k < n_terms} H_[k] exp(-p k T)) E_p`, after checking that the last term
    /// is below `1e-12` relative to the sum.
    pub fn lambda_operator(&self, p: C64, n_terms: usize) -> Result<CMat> {
        if n_terms == 0 || n_terms > self.blocks.len() {
            return Err(Error::InvalidArgument(format!(
                "n_terms must be in 1..={}",
                self.blocks.len()
            )));
        }
        let nu = self.m_u * self.dim;
        let mut s = CMat::zeros(nu, nu);
        for (k, hk) in self.blocks.iter().take(n_terms).enumerate() {
            s += hk * (-p * (k as f64 * self.period)).exp();
        }
        let last = max_abs(&self.blocks[n_terms - 1]) * (-p.re * ((n_terms - 1) as f64 * self.period)).exp();
        let tol = 1e-12;
        if n_terms > 1 && last > tol * max_abs(&s).max(1.0) {
            return Err(Error::TailNotConverged { terms: n_terms, tol });
        }
        let d = self.dim;
        let e: Vec<C64> = self
            .times()
            .collect::<Vec<_>>()
            .iter()
            .map(|t| (p * *t).exp())
            .collect();
        for i in 0..self.m_u {
            for j in 0..self.m_u {
                let f = e[j] / e[i];
                let mut blk = s.view_mut((i * d, j * d), (d, d));
                blk *= f;
            }
        }
        Ok(s)
    }
}

/// Number of periods needed for `K exp((gamma - Re p) k T)` to fall below `tol`.
pub fn terms_for_tail(env: &GrowthEnvelope, p: C64, period: f64, tol: f64) -> Result<usize> {
    let gap = p.re - env.gamma;
    if !(gap > 0.0) {
        return Err(Error::GrowthMargin {
            re: p.re,
            gamma: env.gamma,
        });
    }
    let n = ((env.k.max(1.0) / tol).ln() / (gap * period)).ceil().max(0.0) as usize + 1;
    Ok(n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaCheck {
    pub residual: f64,
    pub window: usize,
    pub n_terms: usize,
}

/// Applies `Lambda(p)` to sampled Fourier modes `exp(i k omega t)`, `|k| <= K/2`, and compares
/// the Fourier coefficients of the results with the matching entries of `R_K(p)^-1`.
///
/// Mode `k` in component `c` corresponds to block column `-k`; output harmonic `l` to block
/// row `-l`. `n_terms = None` picks the count from the kernel growth envelope.
pub fn verify_lambda_equals_htf(
    system: &DelaySystem,
    p: C64,
    k: usize,
    m_u: usize,
    n_terms: Option<usize>,
) -> Result<LambdaCheck> {
    let period = system.period();
    let n_terms = match n_terms {
        Some(n) => n,
        None => {
            let probe = kernel_coefficients(system, 4.0 * period, 32, &LatticeOptions::default())?;
            terms_for_tail(&probe.growth_envelope(), p, period, 1e-13)?
        }
    };
    let kernels = kernel_coefficients(system, n_terms as f64 * period, 1, &LatticeOptions::default())?;
    let ops = build_block_impulse(&kernels, n_terms - 1, m_u)?;
    let lambda = ops.lambda_operator(p, n_terms)?;
    let htf = htf_matrix(system, p, k)?;
    let d = system.dim();
    let w = (k / 2) as i64;
    let omega = system.omega();
    let times: Vec<f64> = ops.times().collect();
    let mut residual: f64 = 0.0;
    for mode in -w..=w {
        for comp in 0..d {
            let mut v = CVec::zeros(m_u * d);
            for (i, t) in times.iter().enumerate() {
                v[i * d + comp] = expi(mode as f64 * omega * t);
            }
            let out = &lambda * v;
            for l in -w..=w {
                let mut b = CVec::zeros(d);
                for (i, t) in times.iter().enumerate() {
                    let ph = expi(-(l as f64) * omega * t);
                    for r in 0..d {
                        b[r] += out[i * d + r] * ph;
                    }
                }
                b /= c64(m_u as f64, 0.0);
                let col = htf.block(-l, -mode);
                for r in 0..d {
                    residual = residual.max((b[r] - col[(r, comp)]).norm());
                }
            }
        }
    }
    Ok(LambdaCheck {
        residual,
        window: w as usize,
        n_terms,
    })
}
