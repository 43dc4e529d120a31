//! Truncated sections of the harmonic operator `R(p)`.
//!
//! Block `(k, l)`, `k, l in -K..=K`, of the truncation is
//!
//! ```text
//! R_K(p)[k, l] = delta_{kl} I - sum_j exp(-(p - i l omega) tau_j) D_j^(l - k)
//! ```
//!
//! Blocks are stored by increasing harmonic index: block row `k` occupies rows
//! `(k + K) d .. (k + K + 1) d`. Row `k` carries the frequency `p - i k omega`, which gives
//! the exact shift structure `R(p + i omega)[k, l] = R(p)[k - 1, l - 1]`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::linalg::{c64, expi, linspace, norm2, sigma_min, CMat, C64};
use crate::system_model::{DelaySystem, QuadratureOptions, SystemHarmonics};

/// A `(2K + 1) d` square section of `R(p)`.
#[derive(Clone, Debug)]
pub struct TruncatedHarmonicMatrix {
    pub p: C64,
    pub k: usize,
    pub d: usize,
    pub data: CMat,
    /// Set when the Fourier data available was shorter than the `2K` needed.
    pub short_harmonics: bool,
}

impl TruncatedHarmonicMatrix {
    /// Block `(k, l)` with harmonic indices in `-K..=K`.
    pub fn block(&self, k: i64, l: i64) -> CMat {
        let d = self.d;
        let r = (k + self.k as i64) as usize * d;
        let c = (l + self.k as i64) as usize * d;
        self.data.view((r, c), (d, d)).into_owned()
    }

    pub fn sigma_min(&self) -> Result<f64> {
        sigma_min(&self.data)
    }

    /// Sum over block diagonals of the largest block norm on that diagonal.
    ///
    /// Diagonals are taken with sign (`l - k` from `-2K` to `2K`), so the value dominates
    /// the spectral norm by the Schur test.
    pub fn wiener_norm(&self) -> Result<f64> {
        let kk = self.k as i64;
        let mut total = 0.0;
        for diag in -2 * kk..=2 * kk {
            let mut best: f64 = 0.0;
            for k in -kk..=kk {
                let l = k + diag;
                if l < -kk || l > kk {
                    continue;
                }
                best = best.max(norm2(&self.block(k, l))?);
            }
            total += best;
        }
        Ok(total)
    }
}

/// Assembles `R_K(p)` from precomputed harmonics (missing orders count as zero).
pub fn assemble_r_with(system: &DelaySystem, harmonics: &SystemHarmonics, p: C64, k: usize) -> TruncatedHarmonicMatrix {
    let d = system.dim();
    let n = 2 * k + 1;
    let kk = k as i64;
    let omega = system.omega();
    let mut data = CMat::identity(n * d, n * d);
    for (j, &tau) in system.delays().iter().enumerate() {
        let base = (-p * tau).exp();
        for l in -kk..=kk {
            // exp(-(p - i l omega) tau)
            let w = base * expi(l as f64 * omega * tau);
            let c0 = (l + kk) as usize * d;
            for row in -kk..=kk {
                let Some(coef) = harmonics.get(j, l - row) else {
                    continue;
                };
                let r0 = (row + kk) as usize * d;
                let mut blk = data.view_mut((r0, c0), (d, d));
                blk -= coef * w;
            }
        }
    }
    TruncatedHarmonicMatrix {
        p,
        k,
        d,
        data,
        short_harmonics: harmonics.order < 2 * k,
    }
}

/// Assembles `R_K(p)`, computing Fourier coefficients to order `2K`.
pub fn assemble_r(system: &DelaySystem, p: C64, k: usize) -> Result<TruncatedHarmonicMatrix> {
    let h = system.harmonics(2 * k, &QuadratureOptions::default())?;
    Ok(assemble_r_with(system, &h, p, k))
}

/// Largest entry difference between `R_K(p + i omega)` on blocks `-K+1..=K` and `R_K(p)`
/// on blocks `-K..=K-1`.
pub fn shift_check(system: &DelaySystem, p: C64, k: usize) -> Result<f64> {
    let h = system.harmonics(2 * k, &QuadratureOptions::default())?;
    let a = assemble_r_with(system, &h, p + c64(0.0, system.omega()), k);
    let b = assemble_r_with(system, &h, p, k);
    let d = system.dim();
    let m = 2 * k * d;
    let va = a.data.view((d, d), (m, m));
    let vb = b.data.view((0, 0), (m, m));
    Ok(va
        .iter()
        .zip(vb.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

/// Smallest `x` with `sum_j ||D_j||_C0 exp(-x tau_j) <= q`, using sup-norm bounds.
///
/// For `Re p >= x`, a Neumann series gives `sigma_min(R(p)) >= 1 - q`.
pub fn neumann_abscissa(system: &DelaySystem, q: f64) -> Result<f64> {
    let norms: Vec<f64> = system
        .coefficients()
        .iter()
        .map(|c| c.sup_norm())
        .collect::<Result<_>>()?;
    let f = |x: f64| -> f64 {
        norms
            .iter()
            .zip(system.delays())
            .map(|(n, tau)| n * (-x * tau).exp())
            .sum()
    };
    if norms.iter().all(|n| *n == 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(hi) > q {
        hi *= 2.0;
    }
    while f(lo) <= q {
        lo *= 2.0;
        if lo < -1e6 {
            return Ok(lo);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub n_re: usize,
    pub n_im: usize,
    /// Upper end of the real range; `None` picks a Neumann-safe value.
    pub re_max: Option<f64>,
    /// Imaginary window; `None` means `[0, omega/2]` for real systems and
    /// `[-omega/2, omega/2]` otherwise.
    pub im_window: Option<(f64, f64)>,
    /// Relative change of the minimum between `K` and `2K` accepted as converged.
    pub conv_tol: f64,
    /// Threshold `M` on `||R^-1||`; the scan passes when `min sigma_min >= 1/M`.
    pub m_bound: f64,
    /// Number of grid minima polished by local search.
    pub refine_candidates: usize,
    pub refine_evals: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n_re: 40,
            n_im: 200,
            re_max: None,
            im_window: None,
            conv_tol: 1e-3,
            m_bound: 1e6,
            refine_candidates: 3,
            refine_evals: 250,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanPoint {
    pub p: C64,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HalfPlaneScanResult {
    pub beta: f64,
    pub re_max: f64,
    pub im_window: (f64, f64),
    pub k: usize,
    /// Grid values at truncation `K`.
    pub points: Vec<ScanPoint>,
    /// Minimum at truncation `K`, including local refinement.
    pub min_sigma: f64,
    pub argmin: C64,
    /// `(truncation order, minimum)` for `K` and `2K`.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
    /// `min_sigma >= 1 / m_bound`.
    pub passes: bool,
}

/// Evaluates `sigma_min(R_K(p))` with cached harmonics.
struct SigmaEval<'a> {
    system: &'a DelaySystem,
    harmonics: &'a SystemHarmonics,
    k: usize,
}

impl SigmaEval<'_> {
    fn at(&self, p: C64) -> Result<f64> {
        assemble_r_with(self.system, self.harmonics, p, self.k).sigma_min()
    }
}

/// Compass search for a local minimum of `f` with `Re p` confined to `[re_lo, re_hi]`.
pub(crate) fn compass_minimize<F>(
    mut f: F,
    start: C64,
    f_start: f64,
    step: (f64, f64),
    re_range: (f64, f64),
    max_evals: usize,
) -> Result<(C64, f64)>
where
    F: FnMut(C64) -> Result<f64>,
{
    let (mut sr, mut si) = step;
    let (mut best_p, mut best) = (start, f_start);
    let mut evals = 0;
    let dirs: [(f64, f64); 8] = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (1.0, 1.0),
        (1.0, -1.0),
        (-1.0, 1.0),
        (-1.0, -1.0),
    ];
    while evals < max_evals && (sr > 1e-13 * (1.0 + best_p.re.abs()) || si > 1e-13 * (1.0 + best_p.im.abs())) {
        let mut improved = false;
        for (dr, di) in dirs {
            if evals >= max_evals {
                break;
            }
            let re = (best_p.re + dr * sr).clamp(re_range.0, re_range.1);
            let q = c64(re, best_p.im + di * si);
            if q == best_p {
                continue;
            }
            let v = f(q)?;
            evals += 1;
            if v < best {
                best = v;
                best_p = q;
                improved = true;
                break;
            }
        }
        if !improved {
            sr *= 0.5;
            si *= 0.5;
        }
        if best == 0.0 {
            break;
        }
    }
    Ok((best_p, best))
}

/// Scans `sigma_min(R_K(p))` over `Re p in [beta, re_max]` and an imaginary window of one
/// period, polishes the smallest grid minima by local search, and repeats the polish at
/// `2K` to judge truncation convergence.
pub fn scan_halfplane(system: &DelaySystem, beta: f64, k: usize, opts: &ScanOptions) -> Result<HalfPlaneScanResult> {
    let harmonics = system.harmonics(4 * k, &QuadratureOptions::default())?;
    scan_halfplane_with(system, &harmonics, beta, k, opts)
}

pub fn scan_halfplane_with(
    system: &DelaySystem,
    harmonics: &SystemHarmonics,
    beta: f64,
    k: usize,
    opts: &ScanOptions,
) -> Result<HalfPlaneScanResult> {
    let omega = system.omega();
    let re_max = match opts.re_max {
        Some(r) => r,
        None => neumann_abscissa(system, 0.5)?.max(beta + 0.5),
    };
    let re_max = re_max.max(beta);
    let im_window = opts.im_window.unwrap_or(if system.is_real() {
        (0.0, 0.5 * omega)
    } else {
        (-0.5 * omega, 0.5 * omega)
    });
    let res = linspace(beta, re_max, opts.n_re.max(1));
    let ims = linspace(im_window.0, im_window.1, opts.n_im.max(1));
    let eval_k = SigmaEval { system, harmonics, k };
    let mut points = Vec::with_capacity(res.len() * ims.len());
    for &re in &res {
        for &im in &ims {
            let p = c64(re, im);
            points.push(ScanPoint {
                p,
                sigma_min: eval_k.at(p)?,
            });
        }
    }
    let step_re = if res.len() > 1 { res[1] - res[0] } else { 0.1 };
    let step_im = if ims.len() > 1 { ims[1] - ims[0] } else { 0.1 * omega };

    let candidates = grid_minima(&points, res.len(), ims.len(), opts.refine_candidates.max(1));
    let mut polished: Vec<(C64, f64)> = Vec::new();
    for &i in &candidates {
        let pt = points[i];
        polished.push(compass_minimize(
            |p| eval_k.at(p),
            pt.p,
            pt.sigma_min,
            (step_re, step_im),
            (beta, re_max),
            opts.refine_evals,
        )?);
    }
    let (argmin, min_sigma) =
        polished
            .iter()
            .copied()
            .fold((c64(0.0, 0.0), f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });

    let eval_2k = SigmaEval {
        system,
        harmonics,
        k: 2 * k,
    };
    let mut min_2k = f64::INFINITY;
    for &(p, _) in &polished {
        let v = eval_2k.at(p)?;
        let (_, v) = compass_minimize(
            |q| eval_2k.at(q),
            p,
            v,
            (step_re, step_im),
            (beta, re_max),
            opts.refine_evals,
        )?;
        min_2k = min_2k.min(v);
    }
    let floor = 1.0 / opts.m_bound;
    let converged =
        (min_sigma - min_2k).abs() <= opts.conv_tol * min_sigma.max(min_2k) || min_sigma.max(min_2k) < floor;
    Ok(HalfPlaneScanResult {
        beta,
        re_max,
        im_window,
        k,
        points,
        min_sigma,
        argmin,
        history: alloc::vec![(k, min_sigma), (2 * k, min_2k)],
        converged,
        passes: min_sigma >= floor,
    })
}

/// Indices of the smallest local minima on an `n_re x n_im` grid (row-major in `re`).
pub(crate) fn grid_minima(points: &[ScanPoint], n_re: usize, n_im: usize, count: usize) -> Vec<usize> {
    let mut mins: Vec<usize> = Vec::new();
    for a in 0..n_re {
        for b in 0..n_im {
            let i = a * n_im + b;
            let v = points[i].sigma_min;
            let mut is_min = true;
            for da in -1i64..=1 {
                for db in -1i64..=1 {
                    if da == 0 && db == 0 {
                        continue;
                    }
                    let (x, y) = (a as i64 + da, b as i64 + db);
                    if x < 0 || y < 0 || x >= n_re as i64 || y >= n_im as i64 {
                        continue;
                    }
                    if points[(x as usize) * n_im + y as usize].sigma_min < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                mins.push(i);
            }
        }
    }
    mins.sort_by(|x, y| points[*x].sigma_min.partial_cmp(&points[*y].sigma_min).unwrap());
    mins.dedup_by(|x, y| points[*x].sigma_min == points[*y].sigma_min && points[*x].p.re == points[*y].p.re);
    mins.truncate(count);
    mins
}
