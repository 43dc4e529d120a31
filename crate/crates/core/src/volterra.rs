//! Atomic Stieltjes-Volterra kernels on `[a, b]` and their resolvents.
//!
//! A kernel is stored through the atoms of its measure in the second variable: atom
//! `(c, W)` of `kappa(t, .)` sits at `c < t` and
//!
//! ```text
//! kappa(t, beta) = -sum_{c >= beta, c < t} W_c        (left continuous, zero for beta >= t)
//! int_{beta-}^{t-} d kappa(t, tau) g(tau) = sum_{c in [beta, t)} W_c g(c)
//! ```
//!
//! The system kernel on `[s, s + tau_N]` has atoms `(t - tau_j, D_j(t))` whenever
//! `t - tau_j >= s`. Its resolvent solves
//! `rho(t, beta) = -kappa(t, beta) + int_{beta-}^{t-} d kappa(t, tau) rho(tau, beta)`; with atoms
//! this is the finite series `rho = -sum_{n >= 1} kappa^{*n}`, every power pushing the atoms
//! at least one minimal gap further from `t`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{max_abs_diff, CMat, CVec, C64};
use crate::simulator::Source;
use crate::system_model::DelaySystem;

/// Step functions: `LeftOpen` vanishes at 0, `Standard` is 1 there.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Heaviside {
    LeftOpen,
    Standard,
}

impl Heaviside {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Heaviside::LeftOpen => (x > 0.0) as u8 as f64,
            Heaviside::Standard => (x >= 0.0) as u8 as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub at: f64,
    pub weight: CMat,
}

pub trait AtomicKernel {
    fn dim(&self) -> usize;
    fn interval(&self) -> (f64, f64);
    /// Lower bound on `t - c` over all atoms `c` of `kappa(t, .)`.
    fn min_gap(&self) -> f64;
    fn atoms(&self, t: f64) -> Vec<Atom>;

    fn value(&self, t: f64, beta: f64) -> CMat {
        let d = self.dim();
        let mut v = CMat::zeros(d, d);
        for a in self.atoms(t) {
            if a.at >= beta {
                v -= &a.weight;
            }
        }
        v
    }
}

/// Kernel of the delay system restarted at `s`, on `[s, s + tau_N]`.
#[derive(Clone, Copy, Debug)]
pub struct SystemKernel<'a> {
    system: &'a DelaySystem,
    s: f64,
}

pub fn kernel_from_system(system: &DelaySystem, s: f64) -> SystemKernel<'_> {
    SystemKernel { system, s }
}

impl SystemKernel<'_> {
    pub fn system(&self) -> &DelaySystem {
        self.system
    }

    pub fn start(&self) -> f64 {
        self.s
    }
}

impl AtomicKernel for SystemKernel<'_> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn interval(&self) -> (f64, f64) {
        (self.s, self.s + self.system.tau_max())
    }

    fn min_gap(&self) -> f64 {
        self.system.tau_min()
    }

    fn atoms(&self, t: f64) -> Vec<Atom> {
        self.system
            .delays()
            .iter()
            .enumerate()
            .filter(|&(_, &tau)| t - tau >= self.s)
            .map(|(j, &tau)| Atom {
                at: t - tau,
                weight: self.system.coefficient(j, t),
            })
            .collect()
    }
}

fn merge_atoms(mut atoms: Vec<Atom>, scale: f64) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.at.total_cmp(&b.at));
    let tol = 1e-12 * (1.0 + scale.abs());
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if (a.at - last.at).abs() <= tol => last.weight += a.weight,
            _ => out.push(a),
        }
    }
    out
}

/// Resolvent of an atomic kernel, evaluated on demand at any `t`.
#[derive(Clone, Debug)]
pub struct Resolvent<'k, K> {
    kernel: &'k K,
    max_terms: usize,
}

impl<'k, K: AtomicKernel> Resolvent<'k, K> {
    pub fn new(kernel: &'k K) -> Result<Self> {
        let gap = kernel.min_gap();
        if !(gap > 0.0) {
            return Err(Error::AtomsAccumulate(gap));
        }
        let (a, b) = kernel.interval();
        Ok(Self {
            kernel,
            max_terms: ((b - a) / gap).ceil() as usize,
        })
    }

    pub fn kernel(&self) -> &K {
        self.kernel
    }

    /// `ceil((b - a) / gap)`, the most powers that can be nonzero.
    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    /// Atoms of `kappa^{*n}(t, .)` for `n = 1, 2, ...` until the first empty power.
    pub fn powers(&self, t: f64) -> Result<Vec<Vec<Atom>>> {
        let mut levels: Vec<Vec<Atom>> = Vec::new();
        let mut frontier = self.kernel.atoms(t);
        while !frontier.is_empty() {
            if levels.len() == self.max_terms {
                return Err(Error::Numerical(alloc::format!(
                    "Neumann series did not terminate within {} terms",
                    self.max_terms
                )));
            }
            let mut next = Vec::new();
            for a in &frontier {
                for b in self.kernel.atoms(a.at) {
                    next.push(Atom {
                        at: b.at,
                        weight: &a.weight * b.weight,
                    });
                }
            }
            levels.push(merge_atoms(core::mem::replace(&mut frontier, next), t));
        }
        Ok(levels)
    }

    /// Number of nonzero powers at `t`.
    pub fn term_count(&self, t: f64) -> Result<usize> {
        Ok(self.powers(t)?.len())
    }

    pub fn try_atoms(&self, t: f64) -> Result<Vec<Atom>> {
        let all: Vec<Atom> = self
            .powers(t)?
            .into_iter()
            .flatten()
            .map(|a| Atom {
                at: a.at,
                weight: -a.weight,
            })
            .collect();
        Ok(merge_atoms(all, t))
    }

    /// `X~(t, alpha) = H(t - alpha) I + rho(t, alpha)` with the standard Heaviside.
    pub fn fundamental(&self, t: f64, alpha: f64) -> CMat {
        let d = self.kernel.dim();
        CMat::identity(d, d) * C64::from(Heaviside::Standard.eval(t - alpha)) + self.value(t, alpha)
    }

    /// `X~` on a tensor grid, rows indexed by `ts`.
    pub fn fundamental_table(&self, ts: &[f64], alphas: &[f64]) -> Vec<Vec<CMat>> {
        ts.iter()
            .map(|&t| alphas.iter().map(|&a| self.fundamental(t, a)).collect())
            .collect()
    }

    /// `y(t) = g(t) - int_{a-}^{t-} d rho(t, alpha) g(alpha)`.
    pub fn solve(&self, g: &dyn Fn(f64) -> CVec, t: f64) -> CVec {
        let mut y = g(t);
        for a in self.atoms(t) {
            y -= a.weight * g(a.at);
        }
        y
    }
}

impl<K: AtomicKernel> AtomicKernel for Resolvent<'_, K> {
    fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn interval(&self) -> (f64, f64) {
        self.kernel.interval()
    }

    fn min_gap(&self) -> f64 {
        self.kernel.min_gap()
    }

    /// Panics if the series fails to terminate, which [`Resolvent::new`] rules out for
    /// kernels honouring their stated gap.
    fn atoms(&self, t: f64) -> Vec<Atom> {
        self.try_atoms(t).expect("resolvent series terminates")
    }
}

pub fn resolvent<K: AtomicKernel>(kernel: &K) -> Result<Resolvent<'_, K>> {
    Resolvent::new(kernel)
}

/// Largest entry of `rho(t, beta) + kappa(t, beta) - int_{beta-}^{t-} d kappa(t, tau) rho(tau, beta)`
/// over the given pairs, for any candidate `rho`.
pub fn resolvent_residual<K: AtomicKernel, R: AtomicKernel>(kernel: &K, rho: &R, ts: &[f64], betas: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &t in ts {
        let katoms = kernel.atoms(t);
        for &beta in betas {
            let mut rhs = -kernel.value(t, beta);
            for a in katoms.iter().filter(|a| a.at >= beta) {
                rhs += &a.weight * rho.value(a.at, beta);
            }
            worst = worst.max(max_abs_diff(&rho.value(t, beta), &rhs));
        }
    }
    worst
}

/// `f(t) = sum_{tau_l in (t - s, tau_N]} D_l(t) phi(t - s - tau_l)`.
pub fn forcing_from_initial<'a>(system: &'a DelaySystem, phi: &'a Source, s: f64) -> impl Fn(f64) -> CVec + 'a {
    move |t| {
        let mut f = CVec::zeros(system.dim());
        for (j, &tau) in system.delays().iter().enumerate() {
            if tau > t - s {
                f += system.coefficient(j, t) * phi.eval(t - s - tau);
            }
        }
        f
    }
}

/// Total variation `sum |f_i - f_{i-1}|` of a sampled function.
pub fn total_variation(values: &[C64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}
