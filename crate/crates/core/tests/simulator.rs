mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use perstab_core::catalog;
use perstab_core::lattice::{kernel_coefficients, LatticeOptions};
use perstab_core::linalg::{c64, max_abs, norm2, vec_max_abs};
use perstab_core::simulator::{
    decay_rate_fit, simulate_forced, simulate_homogeneous, solution_operator_matrix, ExactSolver, SimOptions, Source,
    WindowNorm,
};
use perstab_core::stability::random_history;
use perstab_core::CVec;
use proptest::prelude::*;
use rand::Rng;

fn smooth_history(d: usize, phase: f64) -> Source {
    Source::function(move |t| CVec::from_fn(d, |i, _| c64((2.0 * t + phase + i as f64).cos(), 0.0)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn grid_simulation_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let sys = common::random_system(&mut common::rng(seed), 2, 2, true, 0.9);
        let opts = SimOptions::grid(&sys, 32);
        let p1 = random_history(&sys, 32, seed).unwrap();
        let p2 = random_history(&sys, 32, seed ^ 1).unwrap();
        let (q1, q2) = (Arc::new(p1), Arc::new(p2));
        let (r1, r2) = (q1.clone(), q2.clone());
        let mix = Source::function(move |t| r1.eval(t) * c64(a, 0.0) + r2.eval(t) * c64(b, 0.0));
        let t_end = 3.0 * sys.period();
        let y1 = simulate_homogeneous(&sys, &q1, 0.0, t_end, &opts).unwrap().signal;
        let y2 = simulate_homogeneous(&sys, &q2, 0.0, t_end, &opts).unwrap().signal;
        let ym = simulate_homogeneous(&sys, &mix, 0.0, t_end, &opts).unwrap().signal;
        for i in 0..ym.len() {
            let want = &y1.values[i] * c64(a, 0.0) + &y2.values[i] * c64(b, 0.0);
            prop_assert!(vec_max_abs(&(&ym.values[i] - &want)) <= 1e-12 * (1.0 + vec_max_abs(&want)));
        }
    }

    #[test]
    fn restart_after_forcing_matches(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, 1 + (seed % 2) as usize, 2, true, 1.1);
        let s = rng.gen_range(0.0..1.0);
        let t0 = s + rng.gen_range(0.2..1.5);
        let r = t0 + sys.tau_max();
        let d = sys.dim();
        let u = Arc::new(Source::function(move |t| {
            if (s..=t0).contains(&t) { CVec::from_fn(d, |i, _| c64((t * (1.0 + i as f64)).sin(), 0.0)) } else { CVec::zeros(d) }
        }));
        let t_end = r + sys.period();
        let forced = Arc::new(ExactSolver::new(&sys, s, t_end - s, 2_000_000).unwrap());
        let (f2, u2) = (forced.clone(), u.clone());
        let state = Source::function(move |th| f2.forced(&u2, r + th).unwrap());
        let restarted = ExactSolver::new(&sys, r, t_end - r, 2_000_000).unwrap();
        for _ in 0..10 {
            let t = rng.gen_range(r..t_end);
            let a = forced.forced(&u, t).unwrap();
            let b = restarted.homogeneous(&state, t).unwrap();
            prop_assert!(vec_max_abs(&(&a - &b)) <= 1e-10 * vec_max_abs(&a).max(1.0));
        }
    }
}

#[test]
fn exact_and_grid_agree_on_aligned_delays() {
    let sys = catalog::two_delay_stable().unwrap();
    let phi = smooth_history(2, 0.3);
    let t_end = 9.0;
    let grid = simulate_homogeneous(&sys, &phi, 0.0, t_end, &SimOptions::grid(&sys, 64)).unwrap();
    let exact = simulate_homogeneous(&sys, &phi, 0.0, t_end, &SimOptions::exact(grid.signal.step)).unwrap();
    assert_eq!(grid.signal.len(), exact.signal.len());
    for (a, b) in grid.signal.values.iter().zip(&exact.signal.values) {
        assert!(vec_max_abs(&(a - b)) < 1e-13);
    }
}

#[test]
fn forced_exact_matches_kernel_sum() {
    let sys = catalog::smooth_scalar().unwrap();
    let u = Source::function(|t| CVec::from_element(1, c64((1.3 * t).sin(), 0.0)));
    let kern = kernel_coefficients(&sys, 8.0, 8, &LatticeOptions::default()).unwrap();
    let sim = simulate_forced(&sys, &u, 0.0, 8.0, &SimOptions::exact(0.1)).unwrap();
    for (i, y) in sim.signal.values.iter().enumerate() {
        let t = sim.signal.time(i);
        let want = kern.forced_response(t, 0.0, |x| u.eval(x)).unwrap();
        assert!(vec_max_abs(&(y - want)) < 1e-13);
    }
}

#[test]
fn semigroup_error_shrinks_with_resolution() {
    let sys = catalog::incommensurate_scalar().unwrap();
    let (s, r, t) = (0.0, 1.1, 2.9);
    let defect = |m: usize| {
        let full = solution_operator_matrix(&sys, s, t, m).unwrap();
        let split = solution_operator_matrix(&sys, r, t, m).unwrap() * solution_operator_matrix(&sys, s, r, m).unwrap();
        // Compare the operators on a smooth history through their action.
        let h = sys.tau_max() / m as f64;
        let v = CVec::from_fn(m, |k, _| c64((0.7 * (k as f64 + 0.5) * h).cos(), 0.0));
        vec_max_abs(&(&full * &v - &split * &v))
    };
    let (e1, e2) = (defect(32), defect(256));
    assert!(e2 < e1, "{e1} {e2}");
    assert!(e2 < 0.05);
}

#[test]
fn semigroup_is_exact_on_aligned_grids() {
    let sys = catalog::counterexample(0.9).unwrap();
    let h = sys.tau_max() / 16.0;
    let (s, r, t) = (0.0, 10.0 * h, 30.0 * h);
    let full = solution_operator_matrix(&sys, s, t, 16).unwrap();
    let split = solution_operator_matrix(&sys, r, t, 16).unwrap() * solution_operator_matrix(&sys, s, r, 16).unwrap();
    assert!(max_abs(&(full - split)) < 1e-13);
}

#[test]
fn fundamental_solution_growth_is_exponentially_bounded() {
    for sys in [catalog::counterexample(0.9).unwrap(), catalog::smooth_scalar().unwrap()] {
        let horizon = 12.0 * sys.tau_max();
        let kern = kernel_coefficients(&sys, horizon, 16, &LatticeOptions::default()).unwrap();
        let env = kern.growth_envelope();
        let mut rng = common::rng(9);
        for _ in 0..100 {
            let s = rng.gen_range(0.0..sys.period());
            let t = s + rng.gen_range(0.0..horizon);
            let x = norm2(&kern.fundamental_solution(t, s).unwrap()).unwrap();
            // ||X|| <= sum_f ||K_f|| <= K exp(gamma (t - s)), up to the grid of tabulation times.
            assert!(x <= 1.5 * env.bound(t - s), "{x} {}", env.bound(t - s));
        }
    }
}

#[test]
fn decay_fit_of_scalar_geometric_sequence() {
    let sys = catalog::scalar_constant(0.5, 1.0, 2.0).unwrap();
    let phi = Source::function(|_| CVec::from_element(1, c64(1.0, 0.0)));
    let sim = simulate_homogeneous(&sys, &phi, 0.0, 20.0, &SimOptions::grid(&sys, 16)).unwrap();
    for norm in [WindowNorm::Sup, WindowNorm::L2] {
        let fit = decay_rate_fit(&sim.signal, 1.0, norm).unwrap();
        assert!((fit.gamma - 2f64.ln()).abs() < 1e-12);
    }
    let short = simulate_homogeneous(&sys, &phi, 0.0, 3.0, &SimOptions::grid(&sys, 16)).unwrap();
    assert!(decay_rate_fit(&short.signal, 1.0, WindowNorm::Sup).is_err());
}

#[test]
fn zero_inputs_give_zero_solutions() {
    let sys = catalog::two_delay_stable().unwrap();
    let opts = SimOptions::grid(&sys, 20);
    let y = simulate_homogeneous(&sys, &Source::zero(2), 0.0, 12.0, &opts).unwrap();
    assert!(y.signal.values.iter().all(|v| vec_max_abs(v) == 0.0));
    let y = simulate_forced(&sys, &Source::zero(2), 0.0, 12.0, &opts).unwrap();
    assert!(y.signal.values.iter().all(|v| vec_max_abs(v) == 0.0));
}

#[test]
fn counterexample_trajectory_grows() {
    let sys = catalog::counterexample(0.9).unwrap();
    let phi = Source::function(|_| perstab_core::CVec::from_element(2, c64(1.0, 0.0)));
    let y = simulate_homogeneous(&sys, &phi, 0.0, 40.0 * PI, &SimOptions::grid(&sys, 32)).unwrap();
    let v = &y.signal.values;
    let per = v.len() / 20;
    let early = v[..per].iter().map(vec_max_abs).fold(0.0, f64::max);
    let late = v[v.len() - per..].iter().map(vec_max_abs).fold(0.0, f64::max);
    assert!(late > 10.0 * early, "early {early} late {late}");
}

#[test]
fn impulse_response_halves_each_delay() {
    let sys = catalog::scalar_constant(0.5, 1.0, 2.0).unwrap();
    let opts = SimOptions::grid(&sys, 10);
    let h = opts.step;
    let u = Source::function(move |t| perstab_core::CVec::from_element(1, c64(if t < h { 1.0 } else { 0.0 }, 0.0)));
    let y = simulate_forced(&sys, &u, 0.0, 4.0, &opts).unwrap();
    for (i, v) in y.signal.values.iter().enumerate() {
        let want = if i % 10 == 0 { 0.5f64.powi(i as i32 / 10) } else { 0.0 };
        assert!((v[0].re - want).abs() < 1e-15, "i {i}");
    }
}

#[test]
fn solution_operator_is_periodic_in_start_time() {
    let sys = catalog::smooth_scalar().unwrap();
    let t = sys.period();
    let a = solution_operator_matrix(&sys, 0.0, t, 30).unwrap();
    let b = solution_operator_matrix(&sys, t, 2.0 * t, 30).unwrap();
    assert!(perstab_core::linalg::max_abs_diff(&a, &b) < 1e-12);
}
