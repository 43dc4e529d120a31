mod common;

use perstab_core::catalog;
use perstab_core::linalg::{c64, max_abs_diff, vec_max_abs};
use perstab_core::simulator::{ExactSolver, Source};
use perstab_core::volterra::{
    forcing_from_initial, kernel_from_system, resolvent, resolvent_residual, total_variation, Atom, AtomicKernel,
};
use perstab_core::{CMat, CVec};
use proptest::prelude::*;

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

/// Resolvent with one extra atom, used to check the residual detects wrong candidates.
struct Perturbed<R> {
    inner: R,
    at: f64,
    weight: CMat,
}

impl<R: AtomicKernel> AtomicKernel for Perturbed<R> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn interval(&self) -> (f64, f64) {
        self.inner.interval()
    }
    fn min_gap(&self) -> f64 {
        self.inner.min_gap()
    }
    fn atoms(&self, t: f64) -> Vec<Atom> {
        let mut a = self.inner.atoms(t);
        if self.at < t {
            a.push(Atom {
                at: self.at,
                weight: self.weight.clone(),
            });
        }
        a
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn resolvent_equation_holds(seed in 0u64..10_000, dim in 1usize..3, n in 1usize..4, s in 0.0f64..3.0) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, dim, n, seed % 2 == 0, 0.9);
        let k = kernel_from_system(&sys, s);
        let rho = resolvent(&k).unwrap();
        let (a, b) = k.interval();
        let ts = grid(a, b, 37);
        let betas = grid(a, b, 23);
        prop_assert!(resolvent_residual(&k, &rho, &ts, &betas) <= 1e-12);
        prop_assert!(rho.term_count(b).unwrap() <= rho.max_terms());
    }

    #[test]
    fn fundamental_matches_recursion(seed in 0u64..10_000, dim in 1usize..3, n in 1usize..4) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, dim, n, true, 0.9);
        let s = 0.4;
        let k = kernel_from_system(&sys, s);
        let rho = resolvent(&k).unwrap();
        let (a, b) = k.interval();
        for t in grid(a, b, 11) {
            for alpha in grid(a, t, 5) {
                let x = rho.fundamental(t, alpha);
                let want = common::memo_fundamental(&sys, t, alpha);
                prop_assert!(max_abs_diff(&x, &want) < 1e-12, "t={} alpha={}", t, alpha);
            }
        }
    }

    #[test]
    fn variation_is_submultiplicative(seed in 0u64..10_000, n in 1usize..4) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, 1, n, true, 1.5);
        let k = kernel_from_system(&sys, 0.0);
        let rho = resolvent(&k).unwrap();
        let (a, b) = k.interval();
        let var = |atoms: &[Atom]| atoms.iter().map(|x| x.weight[(0, 0)].norm()).sum::<f64>();
        for t in grid(a, b, 17) {
            // Sampled variation in beta agrees with the atom weights.
            let betas = grid(a - 0.01, t + 0.01, 4000);
            let sampled: Vec<_> = betas.iter().map(|&be| k.value(t, be)[(0, 0)]).collect();
            prop_assert!((total_variation(&sampled) - var(&k.atoms(t))).abs() < 1e-12);
            let powers = rho.powers(t).unwrap();
            for w in powers.windows(2) {
                let sup = w[0].iter().map(|x| var(&k.atoms(x.at))).fold(0.0, f64::max);
                prop_assert!(var(&w[1]) <= var(&w[0]) * sup * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}

#[test]
fn perturbed_candidate_fails_residual() {
    let sys = catalog::two_delay_stable().unwrap();
    let k = kernel_from_system(&sys, 0.0);
    let rho = resolvent(&k).unwrap();
    let (a, b) = k.interval();
    let ts = grid(a, b, 40);
    let betas = grid(a, b, 40);
    assert!(resolvent_residual(&k, &rho, &ts, &betas) < 1e-12);
    let bad = Perturbed {
        inner: rho.clone(),
        at: 0.5 * (a + b),
        weight: CMat::identity(2, 2) * c64(1e-3, 0.0),
    };
    assert!(resolvent_residual(&k, &bad, &ts, &betas) > 5e-4);
}

#[test]
fn solve_reproduces_exact_solution() {
    for sys in [
        catalog::counterexample(0.9).unwrap(),
        catalog::two_delay_stable().unwrap(),
        catalog::incommensurate_scalar().unwrap(),
    ] {
        let d = sys.dim();
        let s = 0.7;
        let phi = Source::function(move |th| CVec::from_fn(d, |i, _| c64((2.0 * th + i as f64).cos(), th)));
        let k = kernel_from_system(&sys, s);
        let rho = resolvent(&k).unwrap();
        let f = forcing_from_initial(&sys, &phi, s);
        let exact = ExactSolver::new(&sys, s, sys.tau_max() + 0.1, 100_000).unwrap();
        for t in grid(s + 1e-3, s + sys.tau_max() - 1e-3, 29) {
            let y = rho.solve(&f, t);
            let want = exact.homogeneous(&phi, t).unwrap();
            assert!(
                vec_max_abs(&(&y - &want)) <= 1e-10 * vec_max_abs(&want).max(1.0),
                "t={t}"
            );
        }
    }
}

#[test]
fn compatible_history_gives_continuous_forcing() {
    let sys = catalog::scalar_constant(0.5, 1.0, 2.0).unwrap();
    // phi(0) = 0.5 phi(-1) for phi(th) = 0.5^th.
    let phi = Source::function(|th| CVec::from_element(1, c64(0.5f64.powf(th), 0.0)));
    let f = forcing_from_initial(&sys, &phi, 0.0);
    assert!((f(0.0)[0] - phi.eval(0.0)[0]).norm() < 1e-15);
}

#[test]
fn counterexample_kernel_atom_past_the_delay() {
    let sys = catalog::counterexample(0.9).unwrap();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let k = kernel_from_system(&sys, 0.0);
    assert!(k.atoms(half_pi - 1e-9).is_empty());
    let t = half_pi + 1e-3;
    let a = k.atoms(t);
    assert_eq!(a.len(), 1);
    assert!((a[0].at - 1e-3).abs() < 1e-15);
    assert!(max_abs_diff(&a[0].weight, &sys.coefficient(0, t)) < 1e-15);
}

#[test]
fn zero_kernel_and_zero_forcing() {
    let sys = catalog::zero_system(2, 1.0, 2.0).unwrap();
    let k = kernel_from_system(&sys, 0.0);
    let r = resolvent(&k).unwrap();
    let g = |t: f64| CVec::from_vec(vec![c64(t.sin(), 0.0), c64(1.0, t)]);
    for t in grid(0.05, 0.95, 9) {
        assert!(r.try_atoms(t).unwrap().is_empty());
        assert!(max_abs_diff(&r.fundamental(t, 0.0), &CMat::identity(2, 2)) == 0.0);
        assert_eq!(r.solve(&g, t), g(t));
    }
    let sys = catalog::two_delay_stable().unwrap();
    let k = kernel_from_system(&sys, 0.0);
    let r = resolvent(&k).unwrap();
    for t in grid(0.1, 1.9, 7) {
        assert_eq!(vec_max_abs(&r.solve(&|_| CVec::zeros(2), t)), 0.0);
    }
}
