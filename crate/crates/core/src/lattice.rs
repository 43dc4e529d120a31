//! Delay lattice and kernel coefficients.
//!
//! The lattice is the set of nonnegative integer combinations `sum_j n_j tau_j` up to a
//! horizon. Each lattice point `f` carries a periodic matrix function `K_f(t)` with
//!
//! ```text
//! K_0(t) = I,    K_f(t) = sum_j D_j(t) K_{f - tau_j}(t - tau_j)
//! X(t, s) = sum_{f <= t - s} K_f(t),        y_forced(t) = sum_f K_f(t) u(t - f)
//! ```
//!
//! Evaluation uses the equivalent adjoint recursion anchored at the output time,
//! `K_f(t) = sum_j K_{f - tau_j}(t) D_j(t - f + tau_j)`, which needs one sampler call per
//! (point, delay) and no interpolation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{fit_line, norm2, CMat, CVec, C64};
use crate::system_model::DelaySystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeOptions {
    /// Offsets closer than this are merged; `None` means `1e-9 * tau_1`.
    pub merge_tol: Option<f64>,
    /// Maximum number of enumerated multi-indices.
    pub cap: usize,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self {
            merge_tol: None,
            cap: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub offset: f64,
    /// Multi-indices `(n_1, ..., n_N)` whose weighted sums merged into `offset`.
    pub generators: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct DelayLattice {
    delays: Vec<f64>,
    horizon: f64,
    merge_tol: f64,
    points: Vec<LatticePoint>,
    /// For each point, `(j, index of f - tau_j)` over delays that generate it.
    preds: Vec<Vec<(usize, usize)>>,
}

pub fn build_lattice(delays: &[f64], horizon: f64, opts: &LatticeOptions) -> Result<DelayLattice> {
    if delays.is_empty() || delays.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("delays must be positive and finite".into()));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be nonnegative, got {horizon}"
        )));
    }
    let tau_min = delays.iter().copied().fold(f64::INFINITY, f64::min);
    let merge_tol = opts.merge_tol.unwrap_or(1e-9 * tau_min);
    if !(merge_tol >= 0.0) {
        return Err(Error::InvalidArgument("merge_tol must be nonnegative".into()));
    }
    let n = delays.len();
    let limit = horizon + merge_tol;

    let mut raw: Vec<(f64, Vec<u32>)> = Vec::new();
    let mut idx = alloc::vec![0u32; n];
    enumerate(delays, limit, 0, 0.0, &mut idx, &mut raw, opts.cap, horizon)?;
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));

    let mut points: Vec<LatticePoint> = Vec::new();
    let mut cluster_start = f64::NEG_INFINITY;
    let mut best_weight = u32::MAX;
    for (off, g) in raw {
        let weight: u32 = g.iter().sum();
        if off - cluster_start > merge_tol || points.is_empty() {
            cluster_start = off;
            best_weight = weight;
            points.push(LatticePoint {
                offset: off,
                generators: alloc::vec![g],
            });
        } else {
            let p = points.last_mut().unwrap();
            // The shortest generator carries the least rounding.
            if weight < best_weight {
                best_weight = weight;
                p.offset = off;
            }
            p.generators.push(g);
        }
    }

    let mut by_index: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        for g in &p.generators {
            by_index.insert(g.clone(), i);
        }
    }
    let mut preds = Vec::with_capacity(points.len());
    for p in &points {
        let mut list: Vec<(usize, usize)> = Vec::new();
        for j in 0..n {
            let Some(g) = p.generators.iter().find(|g| g[j] >= 1) else {
                continue;
            };
            let mut h = g.clone();
            h[j] -= 1;
            let target = *by_index
                .get(&h)
                .ok_or(Error::MissingLatticePoint(p.offset - delays[j]))?;
            // Distinct generators of a merged point must agree on the predecessor.
            for g2 in p.generators.iter().filter(|g2| g2[j] >= 1) {
                let mut h2 = g2.clone();
                h2[j] -= 1;
                if by_index.get(&h2) != Some(&target) {
                    return Err(Error::MissingLatticePoint(p.offset - delays[j]));
                }
            }
            list.push((j, target));
        }
        preds.push(list);
    }

    Ok(DelayLattice {
        delays: delays.to_vec(),
        horizon,
        merge_tol,
        points,
        preds,
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    delays: &[f64],
    limit: f64,
    j: usize,
    acc: f64,
    idx: &mut Vec<u32>,
    out: &mut Vec<(f64, Vec<u32>)>,
    cap: usize,
    horizon: f64,
) -> Result<()> {
    if j == delays.len() {
        if out.len() >= cap {
            return Err(Error::LatticeTooLarge { cap, horizon });
        }
        out.push((acc, idx.clone()));
        return Ok(());
    }
    let mut k = 0u32;
    loop {
        let v = acc + k as f64 * delays[j];
        if v > limit {
            break;
        }
        idx[j] = k;
        enumerate(delays, limit, j + 1, v, idx, out, cap, horizon)?;
        k += 1;
    }
    idx[j] = 0;
    Ok(())
}

impl DelayLattice {
    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn merge_tol(&self) -> f64 {
        self.merge_tol
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.offset)
    }

    /// `(delay index, predecessor point index)` pairs of point `i`.
    pub fn predecessors(&self, i: usize) -> &[(usize, usize)] {
        &self.preds[i]
    }

    /// Number of points with offset `<= tau` (within the merge tolerance).
    pub fn count_upto(&self, tau: f64) -> usize {
        self.points.partition_point(|p| p.offset <= tau + self.merge_tol)
    }

    /// Index of the point within `merge_tol` of `offset`.
    pub fn index_of(&self, offset: f64) -> Option<usize> {
        let i = self.points.partition_point(|p| p.offset < offset - self.merge_tol);
        self.points
            .get(i)
            .filter(|p| (p.offset - offset).abs() <= self.merge_tol)
            .map(|_| i)
    }

    /// Upper bound `(1 + horizon / tau_1)^N` on the number of points.
    pub fn cardinality_bound(&self) -> f64 {
        let tau_min = self.delays.iter().copied().fold(f64::INFINITY, f64::min);
        (1.0 + self.horizon / tau_min).powi(self.delays.len() as i32)
    }
}

/// `K_f(t)` for the first `count` lattice points, anchored at output time `t`.
pub fn eval_kernels_at(system: &DelaySystem, lattice: &DelayLattice, t: f64, count: usize) -> Vec<CMat> {
    let d = system.dim();
    let count = count.min(lattice.len());
    let mut out: Vec<CMat> = Vec::with_capacity(count);
    for i in 0..count {
        if i == 0 {
            out.push(CMat::identity(d, d));
            continue;
        }
        let mut acc = CMat::zeros(d, d);
        for &(j, p) in lattice.predecessors(i) {
            let arg = t - lattice.points[p].offset;
            acc += &out[p] * system.coefficient(j, arg);
        }
        out.push(acc);
    }
    out
}

/// Growth envelope `K exp(gamma tau)` dominating the cumulative kernel norms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthEnvelope {
    pub k: f64,
    pub gamma: f64,
}

impl GrowthEnvelope {
    pub fn bound(&self, tau: f64) -> f64 {
        self.k * (self.gamma * tau).exp()
    }
}

/// Kernel coefficients tabulated on a uniform grid `t_i = i T / M_t` over one period.
#[derive(Clone, Debug)]
pub struct KernelCoefficients {
    system: DelaySystem,
    lattice: DelayLattice,
    grid: Vec<f64>,
    table: Vec<Vec<CMat>>,
    /// Running sums of `||K_f(t_i)||_2` over the lattice, per grid point.
    cumulative_norms: Vec<Vec<f64>>,
}

pub fn kernel_coefficients(
    system: &DelaySystem,
    horizon: f64,
    m_t: usize,
    opts: &LatticeOptions,
) -> Result<KernelCoefficients> {
    if m_t == 0 {
        return Err(Error::InvalidArgument("kernel grid needs at least one cell".into()));
    }
    let lattice = build_lattice(system.delays(), horizon, opts)?;
    let period = system.period();
    let grid: Vec<f64> = (0..m_t).map(|i| period * i as f64 / m_t as f64).collect();
    let mut table = Vec::with_capacity(m_t);
    let mut cumulative_norms = Vec::with_capacity(m_t);
    for &t in &grid {
        let row = eval_kernels_at(system, &lattice, t, lattice.len());
        let mut acc = 0.0;
        let mut cum = Vec::with_capacity(row.len());
        for k in &row {
            acc += norm2(k)?;
            cum.push(acc);
        }
        table.push(row);
        cumulative_norms.push(cum);
    }
    Ok(KernelCoefficients {
        system: system.clone(),
        lattice,
        grid,
        table,
        cumulative_norms,
    })
}

impl KernelCoefficients {
    pub fn system(&self) -> &DelaySystem {
        &self.system
    }

    pub fn lattice(&self) -> &DelayLattice {
        &self.lattice
    }

    pub fn horizon(&self) -> f64 {
        self.lattice.horizon()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Tabulated `K_f(t_i)` for every lattice point, grid index `i`.
    pub fn table_row(&self, i: usize) -> &[CMat] {
        &self.table[i]
    }

    /// Exact `K_f(t)` at an arbitrary time (fresh recursion, no interpolation).
    pub fn at(&self, t: f64) -> Vec<CMat> {
        eval_kernels_at(&self.system, &self.lattice, t, self.lattice.len())
    }

    /// `X(t, s) = sum_{f <= t - s} K_f(t)`, zero for `t < s`.
    pub fn fundamental_solution(&self, t: f64, s: f64) -> Result<CMat> {
        let d = self.system.dim();
        if t < s {
            return Ok(CMat::zeros(d, d));
        }
        let tau = t - s;
        self.check_horizon(tau)?;
        let count = self.lattice.count_upto(tau);
        let ks = eval_kernels_at(&self.system, &self.lattice, t, count);
        let mut x = CMat::zeros(d, d);
        for k in &ks {
            x += k;
        }
        Ok(x)
    }

    /// Forced response `sum_{f <= t - s} K_f(t) u(t - f)` with `u = 0` before `s`.
    pub fn forced_response<U>(&self, t: f64, s: f64, u: U) -> Result<CVec>
    where
        U: Fn(f64) -> CVec,
    {
        let d = self.system.dim();
        let mut y = CVec::zeros(d);
        if t < s {
            return Ok(y);
        }
        self.check_horizon(t - s)?;
        let count = self.lattice.count_upto(t - s);
        let ks = eval_kernels_at(&self.system, &self.lattice, t, count);
        for (k, p) in ks.iter().zip(self.lattice.points()) {
            let arg = t - p.offset;
            if arg >= s {
                y += k * u(arg);
            }
        }
        Ok(y)
    }

    /// `max_i sum_{f <= tau} ||K_f(t_i)||_2` over the tabulation grid.
    pub fn growth_norm(&self, tau: f64) -> Result<f64> {
        self.check_horizon(tau)?;
        let count = self.lattice.count_upto(tau);
        if count == 0 {
            return Ok(0.0);
        }
        Ok(self.cumulative_norms.iter().map(|c| c[count - 1]).fold(0.0, f64::max))
    }

    /// Fits `log` of the growth norms at every lattice offset by a line; `gamma` is the
    /// slope clamped to `>= 0` and `K` the smallest constant making `K exp(gamma tau)` an
    /// upper envelope on the sampled offsets.
    pub fn growth_envelope(&self) -> GrowthEnvelope {
        let n = self.lattice.len();
        let taus: Vec<f64> = self.lattice.offsets().collect();
        let vals: Vec<f64> = (0..n)
            .map(|i| self.cumulative_norms.iter().map(|c| c[i]).fold(0.0, f64::max))
            .collect();
        let logs: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
        let gamma = fit_line(&taus, &logs).map(|(s, _)| s.max(0.0)).unwrap_or(0.0);
        let k = taus
            .iter()
            .zip(&vals)
            .map(|(t, v)| v * (-gamma * t).exp())
            .fold(0.0, f64::max);
        GrowthEnvelope { k, gamma }
    }

    /// `sum_{f <= horizon} K_f(t_i) exp(-p f)` from the table.
    pub fn itf_on_grid(&self, i: usize, p: C64) -> CMat {
        let d = self.system.dim();
        let mut g = CMat::zeros(d, d);
        for (k, pt) in self.table[i].iter().zip(self.lattice.points()) {
            g += k * (-p * pt.offset).exp();
        }
        g
    }

    /// Lattice sum of `G(t, p)` at an arbitrary `t`.
    pub fn itf_at(&self, t: f64, p: C64) -> CMat {
        let d = self.system.dim();
        let mut g = CMat::zeros(d, d);
        for (k, pt) in self.at(t).iter().zip(self.lattice.points()) {
            g += k * (-p * pt.offset).exp();
        }
        g
    }

    fn check_horizon(&self, tau: f64) -> Result<()> {
        if tau > self.lattice.horizon() + self.lattice.merge_tol() {
            return Err(Error::HorizonExceeded {
                have: self.lattice.horizon(),
                need: tau,
            });
        }
        Ok(())
    }
}
