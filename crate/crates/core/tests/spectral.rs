mod common;

use perstab_core::catalog;
use perstab_core::linalg::{c64, max_abs, norm2, sigma_min};
use perstab_core::spectral::{assemble_r, neumann_abscissa, scan_halfplane, shift_check, ScanOptions};
use perstab_core::{CMat, DelaySystem, PeriodicMatrixFunction, C64};
use proptest::prelude::*;
use rand::Rng;

fn random_constant(seed: u64, dim: usize) -> DelaySystem {
    let mut rng = common::rng(seed);
    let taus = [rng.gen_range(0.2..0.6), rng.gen_range(0.7..1.4)];
    let cs: Vec<PeriodicMatrixFunction> = (0..2)
        .map(|_| {
            let m = CMat::from_fn(dim, dim, |_, _| c64(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
            PeriodicMatrixFunction::constant(m, 1.5).unwrap()
        })
        .collect();
    DelaySystem::new(taus.to_vec(), cs, false).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn block_shift_identity(seed in any::<u64>(), dim in 1usize..3, n in 1usize..3, re in -1.0f64..1.0, im in -6.0f64..6.0) {
        let sys = common::random_system(&mut common::rng(seed), dim, n, seed % 2 == 1, 1.0);
        prop_assert!(shift_check(&sys, c64(re, im), 5).unwrap() <= 1e-13);
    }

    #[test]
    fn constant_systems_are_block_diagonal(seed in any::<u64>(), dim in 1usize..3, re in -1.0f64..1.0, im in -6.0f64..6.0) {
        let sys = random_constant(seed, dim);
        let p = c64(re, im);
        let k = 4usize;
        let r = assemble_r(&sys, p, k).unwrap();
        let mut want = f64::INFINITY;
        for a in -(k as i64)..=k as i64 {
            for b in -(k as i64)..=k as i64 {
                if a != b {
                    prop_assert_eq!(max_abs(&r.block(a, b)), 0.0);
                }
            }
            want = want.min(sigma_min(&sys.frozen_matrix(0.0, p - c64(0.0, a as f64 * sys.omega()))).unwrap());
        }
        prop_assert!((r.sigma_min().unwrap() - want).abs() <= 1e-12);
    }

    #[test]
    fn neumann_lower_bound(seed in any::<u64>(), dim in 1usize..3, n in 1usize..3, extra in 0.0f64..2.0, im in -6.0f64..6.0) {
        let sys = common::random_system(&mut common::rng(seed), dim, n, false, 1.5);
        let re = extra;
        let r = assemble_r(&sys, c64(re, im), 4).unwrap();
        let bound = 1.0 - sys.sum_sup_norms().unwrap() * (-re * sys.tau_min()).exp();
        prop_assert!(r.sigma_min().unwrap() >= bound - 1e-12);
    }

    #[test]
    fn wiener_norm_dominates_spectral_norm(seed in any::<u64>(), dim in 1usize..3, re in -1.0f64..1.0, im in -3.0f64..3.0) {
        let sys = common::random_system(&mut common::rng(seed), dim, 2, false, 2.0);
        let r = assemble_r(&sys, c64(re, im), 3).unwrap();
        prop_assert!(norm2(&r.data).unwrap() <= r.wiener_norm().unwrap() * (1.0 + 1e-12));
    }
}

#[test]
fn off_diagonal_blocks_follow_fourier_decay() {
    // Trigonometric polynomial of degree 2: nothing beyond the second block diagonal.
    let sys = catalog::counterexample(0.9).unwrap();
    let r = assemble_r(&sys, c64(0.1, 0.2), 6).unwrap();
    for a in -6i64..=6 {
        for b in -6i64..=6 {
            let n = max_abs(&r.block(a, b));
            match (b - a).abs() {
                0 | 2 => assert!(n > 0.0),
                _ => assert_eq!(n, 0.0),
            }
        }
    }
    // An analytic coefficient given only by samples: block norms decay geometrically.
    let d = PeriodicMatrixFunction::from_sampler(1, 2.0, |t| {
        let z = 0.5 * (std::f64::consts::PI * t).cos();
        CMat::from_element(1, 1, c64(0.2 / (1.0 - z), 0.0))
    })
    .unwrap();
    let sys = DelaySystem::new(vec![0.7], vec![d], true).unwrap();
    let r = assemble_r(&sys, c64(0.0, 0.0), 8).unwrap();
    let diag: Vec<f64> = (0..8).map(|k| max_abs(&r.block(0, k))).collect();
    for w in diag[1..].windows(2) {
        assert!(w[1] < 0.5 * w[0], "{diag:?}");
    }
}

#[test]
fn neumann_abscissa_is_tight_for_scalar() {
    let sys = catalog::scalar_constant(0.5, 1.0, 2.0).unwrap();
    let x = neumann_abscissa(&sys, 0.5).unwrap();
    // 0.5 exp(-x) = 0.5
    assert!(x.abs() < 1e-9);
}

#[test]
fn scan_of_stable_scalar_passes() {
    let sys = catalog::smooth_scalar().unwrap();
    let res = scan_halfplane(&sys, -0.1, 6, &ScanOptions::default()).unwrap();
    assert!(res.passes && res.converged);
    assert!(res.min_sigma > 0.5);
    // Real system: only the upper half of the fundamental strip is scanned.
    assert_eq!(res.im_window.0, 0.0);
}

#[test]
fn scan_locates_scalar_root() {
    // Roots of 1 - 0.5 exp(-p) sit at Re p = -ln 2; scanning to the left of them fails.
    let sys = catalog::scalar_constant(0.5, 1.0, 2.0).unwrap();
    let res = scan_halfplane(&sys, -0.8, 4, &ScanOptions::default()).unwrap();
    assert!(res.min_sigma < 1e-3, "{}", res.min_sigma);
    assert!((res.argmin.re + 2f64.ln()).abs() < 1e-2, "{:?}", res.argmin);
}

#[test]
fn far_right_half_plane_gives_identity() {
    let sys = catalog::two_delay_stable().unwrap();
    let r = assemble_r(&sys, c64(60.0, 0.7), 3).unwrap();
    let eye = CMat::identity(r.data.nrows(), r.data.ncols());
    assert!(perstab_core::linalg::max_abs_diff(&r.data, &eye) < 1e-20);
}

#[test]
fn scalar_sigma_min_values() {
    let sys = catalog::scalar_constant(0.5, 1.0, 2.0).unwrap();
    let at = |p: C64| assemble_r(&sys, p, 0).unwrap().sigma_min().unwrap();
    assert!((at(c64(0.0, 0.0)) - 0.5).abs() < 1e-15);
    assert!(at(c64(-2f64.ln(), 0.0)) < 1e-15);
}

#[test]
fn wiener_norm_of_diagonal_operator() {
    let (c, tau, period) = (0.7, 0.8, 2.0);
    let sys = catalog::scalar_constant(c, tau, period).unwrap();
    let omega = 2.0 * std::f64::consts::PI / period;
    let p = c64(0.1, 0.4);
    let k = 5i64;
    let r = assemble_r(&sys, p, k as usize).unwrap();
    // Only the main diagonal is nonzero, so the norm is its largest entry.
    let brute = (-k..=k)
        .map(|l| (c64(1.0, 0.0) - c * (-(p - c64(0.0, l as f64 * omega)) * tau).exp()).norm())
        .fold(0.0, f64::max);
    assert!((r.wiener_norm().unwrap() - brute).abs() < 1e-14);
}

#[test]
fn counterexample_scan_fails_on_imaginary_axis() {
    let sys = catalog::counterexample(0.9).unwrap();
    let scan = scan_halfplane(&sys, 0.0, 8, &ScanOptions::default()).unwrap();
    assert!(!scan.passes, "{}", scan.min_sigma);
}
