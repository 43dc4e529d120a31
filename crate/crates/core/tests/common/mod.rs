#![allow(dead_code)]

use std::collections::HashMap;

use perstab_core::catalog;
use perstab_core::linalg::c64;
use perstab_core::{CMat, DelaySystem, PeriodicMatrixFunction};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `X(t, s) = I + sum_j D_j(t) X(t - tau_j, s)` for `t >= s`, zero before `s`, memoized on
/// the multi-index of delays subtracted from `t`.
pub fn memo_fundamental(system: &DelaySystem, t: f64, s: f64) -> CMat {
    fn go(sys: &DelaySystem, t0: f64, s: f64, idx: &mut Vec<u32>, memo: &mut HashMap<Vec<u32>, CMat>) -> CMat {
        let d = sys.dim();
        let t = t0
            - idx
                .iter()
                .zip(sys.delays())
                .map(|(n, tau)| *n as f64 * tau)
                .sum::<f64>();
        if t < s {
            return CMat::zeros(d, d);
        }
        if let Some(x) = memo.get(idx.as_slice()) {
            return x.clone();
        }
        let mut x = CMat::identity(d, d);
        for j in 0..sys.n_delays() {
            idx[j] += 1;
            let inner = go(sys, t0, s, idx, memo);
            idx[j] -= 1;
            x += sys.coefficient(j, t) * inner;
        }
        memo.insert(idx.clone(), x.clone());
        x
    }
    let mut idx = vec![0; system.n_delays()];
    go(system, t, s, &mut idx, &mut HashMap::new())
}

/// Random trigonometric-polynomial system with `sum_j sup ||D_j|| <= scale`.
pub fn random_system(rng: &mut ChaCha8Rng, dim: usize, n_delays: usize, real: bool, scale: f64) -> DelaySystem {
    let period = rng.gen_range(2.0..4.0);
    let mut delays: Vec<f64> = (0..n_delays).map(|_| rng.gen_range(0.25..0.95) * period).collect();
    delays.sort_by(f64::total_cmp);
    for i in 1..delays.len() {
        if delays[i] - delays[i - 1] < 0.05 {
            delays[i] = delays[i - 1] + 0.05;
        }
    }
    let order = 2i64;
    let mut coefficients = Vec::new();
    for _ in 0..n_delays {
        let mut terms: Vec<(i64, CMat)> = Vec::new();
        for k in 0..=order {
            let m = CMat::from_fn(dim, dim, |_, _| {
                let im = if real && k == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
                c64(rng.gen_range(-1.0..1.0), im)
            });
            if real && k > 0 {
                terms.push((-k, m.map(|z| z.conj())));
            } else if k > 0 {
                let other = CMat::from_fn(dim, dim, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                terms.push((-k, other));
            }
            terms.push((k, m));
        }
        let total: f64 = terms.iter().map(|(_, m)| m.norm()).sum();
        let f = scale / (n_delays as f64 * total);
        for (_, m) in &mut terms {
            *m *= c64(f, 0.0);
        }
        coefficients.push(PeriodicMatrixFunction::trig_polynomial(period, terms).unwrap());
    }
    DelaySystem::new(delays, coefficients, real).unwrap()
}

/// Curated systems with monodromy radius well inside the unit disk.
pub fn stable_suite() -> Vec<(&'static str, DelaySystem)> {
    vec![
        ("scalar c=0.5", catalog::scalar_constant(0.5, 1.0, 2.0).unwrap()),
        ("smooth scalar", catalog::smooth_scalar().unwrap()),
        ("two delays", catalog::two_delay_stable().unwrap()),
        ("incommensurate", catalog::incommensurate_scalar().unwrap()),
    ]
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}
