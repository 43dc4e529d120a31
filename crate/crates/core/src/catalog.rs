//! Small reference systems used by tests, demos and benchmarks.

use alloc::vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::linalg::{c64, CMat};
use crate::system_model::{DelaySystem, PeriodicMatrixFunction};

fn real_mat(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|x| c64(*x, 0.0)))
}

/// `y(t) = c y(t - tau)`, scalar, constant coefficient, period `period`.
pub fn scalar_constant(c: f64, tau: f64, period: f64) -> Result<DelaySystem> {
    let d = PeriodicMatrixFunction::constant(real_mat(1, 1, &[c]), period)?;
    DelaySystem::new(vec![tau], vec![d], true)
}

/// All coefficients zero.
pub fn zero_system(dim: usize, tau: f64, period: f64) -> Result<DelaySystem> {
    let d = PeriodicMatrixFunction::constant(CMat::zeros(dim, dim), period)?;
    DelaySystem::new(vec![tau], vec![d], true)
}

/// Constant nilpotent `2 x 2` coefficient `[[0, 1], [0, 0]]`.
pub fn nilpotent(tau: f64, period: f64) -> Result<DelaySystem> {
    let d = PeriodicMatrixFunction::constant(real_mat(2, 2, &[0.0, 1.0, 0.0, 0.0]), period)?;
    DelaySystem::new(vec![tau], vec![d], true)
}

/// `D_1(t) = [[1/2, a cos^2 t], [a sin^2 t, 1/2]]`, `tau = pi/2`, `T = 2 pi`.
///
/// Frozen eigenvalues `(1 +- a |sin 2t|)/2` stay inside the unit disk for `a < 1`, yet the
/// two-step product at `t = 0` has eigenvalue `(1 + 2a^2)/4 + (a/2) sqrt(1 + a^2)`, which
/// exceeds one for `a` close to one: the system is unstable.
pub fn counterexample(alpha: f64) -> Result<DelaySystem> {
    let a = alpha;
    let d = PeriodicMatrixFunction::trig_polynomial(
        2.0 * PI,
        vec![
            (0, real_mat(2, 2, &[0.5, a / 2.0, a / 2.0, 0.5])),
            (2, real_mat(2, 2, &[0.0, a / 4.0, -a / 4.0, 0.0])),
            (-2, real_mat(2, 2, &[0.0, a / 4.0, -a / 4.0, 0.0])),
        ],
    )?;
    DelaySystem::new(vec![PI / 2.0], vec![d], true)
}

/// Same coefficient as [`counterexample`] but given only as a sampler.
pub fn counterexample_sampled(alpha: f64) -> Result<DelaySystem> {
    let d = PeriodicMatrixFunction::from_sampler(2, 2.0 * PI, move |t| {
        let (s, c) = (t.sin(), t.cos());
        real_mat(2, 2, &[0.5, alpha * c * c, alpha * s * s, 0.5])
    })?;
    DelaySystem::new(vec![PI / 2.0], vec![d], true)
}

/// `D_1(t) = 0.3 + 0.2 cos(2 pi t / 3)`, `tau = 1`, `T = 3`.
pub fn smooth_scalar() -> Result<DelaySystem> {
    let d = PeriodicMatrixFunction::trig_polynomial(
        3.0,
        vec![
            (0, real_mat(1, 1, &[0.3])),
            (1, real_mat(1, 1, &[0.1])),
            (-1, real_mat(1, 1, &[0.1])),
        ],
    )?;
    DelaySystem::new(vec![1.0], vec![d], true)
}

/// Two commensurate delays `[1, 2]`, `d = 2`, `T = 3`, with `sum_j sup ||D_j|| < 1`.
pub fn two_delay_stable() -> Result<DelaySystem> {
    let period = 3.0;
    let d1 = PeriodicMatrixFunction::trig_polynomial(
        period,
        vec![
            (0, real_mat(2, 2, &[0.3, 0.1, 0.0, 0.2])),
            (
                1,
                CMat::from_row_slice(2, 2, &[c64(0.05, 0.0), c64(0.0, 0.0), c64(0.0, -0.025), c64(0.0, 0.0)]),
            ),
            (
                -1,
                CMat::from_row_slice(2, 2, &[c64(0.05, 0.0), c64(0.0, 0.0), c64(0.0, 0.025), c64(0.0, 0.0)]),
            ),
        ],
    )?;
    let d2 = PeriodicMatrixFunction::trig_polynomial(
        period,
        vec![
            (0, real_mat(2, 2, &[0.1, 0.0, 0.0, 0.15])),
            (1, real_mat(2, 2, &[0.0, 0.0, 0.05, 0.0])),
            (-1, real_mat(2, 2, &[0.0, 0.0, 0.05, 0.0])),
        ],
    )?;
    DelaySystem::new(vec![1.0, 2.0], vec![d1, d2], true)
}

/// Incommensurate delays `[1, sqrt 2]`, scalar, `T = 3`.
pub fn incommensurate_scalar() -> Result<DelaySystem> {
    let period = 3.0;
    let d1 = PeriodicMatrixFunction::trig_polynomial(
        period,
        vec![
            (0, real_mat(1, 1, &[0.25])),
            (1, real_mat(1, 1, &[0.1])),
            (-1, real_mat(1, 1, &[0.1])),
        ],
    )?;
    let d2 = PeriodicMatrixFunction::constant(real_mat(1, 1, &[-0.2]), period)?;
    DelaySystem::new(vec![1.0, 2.0.sqrt()], vec![d1, d2], true)
}
