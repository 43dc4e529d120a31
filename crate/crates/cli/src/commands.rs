use std::path::Path;

use perstab_core::htf::{htf_matrix, itf_fourier};
use perstab_core::lattice::{kernel_coefficients, LatticeOptions};
use perstab_core::linalg::{c64, spectral_radius_complex, vec_max_abs};
use perstab_core::realization::{build_realization, verify_lambda_equals_htf};
use perstab_core::simulator::{simulate_homogeneous, ExactSolver, SimOptions, Source};
use perstab_core::spectral::{scan_halfplane, ScanOptions};
use perstab_core::stability::{
    generalized_test, henry_hale_constant, monodromy_radius, pointwise_frozen_test, random_decay_fit, ReportOptions,
    StabilityReport, Verdict,
};
use perstab_core::system_model::QuadratureOptions;
use perstab_core::volterra::{forcing_from_initial, kernel_from_system, resolvent, resolvent_residual, AtomicKernel};
use perstab_core::{catalog, CMat, DelaySystem};
use serde::Serialize;

use crate::cli::{
    BackendArg, DataFormat, HtfArgs, KernelArgs, RealizeArgs, ReportOutput, ScanArgs, SimulateArgs, StabilityArgs,
    Status, SystemArg, VolterraArgs,
};
use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};
use crate::output::{emit, num, report_csv, report_text, to_json, CsvTable, Format};
use crate::phi::parse_phi;
use crate::spec::SystemSpec;

fn load_system(arg: &SystemArg) -> CliResult<DelaySystem> {
    let (sys, k) = SystemSpec::load(&arg.system)?.build()?;
    if k > 1 {
        eprintln!("note: period inflated by a factor {k} to {}", sys.period());
    }
    for w in sys.regularity_warnings(32, &QuadratureOptions::default()) {
        eprintln!("warning: {w}");
    }
    Ok(sys)
}

fn entry_header(prefix: &str, d: usize) -> Vec<String> {
    let mut h = Vec::new();
    for r in 0..d {
        for c in 0..d {
            h.push(format!("{prefix}{r}{c}_re"));
            h.push(format!("{prefix}{r}{c}_im"));
        }
    }
    h
}

fn push_entries(row: &mut Vec<String>, m: &CMat) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            row.push(num(m[(r, c)].re));
            row.push(num(m[(r, c)].im));
        }
    }
}

#[derive(Serialize)]
struct SimulationOut<'a> {
    start: f64,
    step: f64,
    max_delay_rounding: f64,
    warnings: &'a [String],
    values: Vec<Vec<[f64; 2]>>,
}

pub fn simulate(cfg: &AnalysisConfig, a: &SimulateArgs) -> CliResult<Status> {
    let sys = load_system(&a.system)?;
    let cells = a.cells.unwrap_or(cfg.m_cells);
    if cells == 0 {
        return Err(CliError::input("cells must be positive"));
    }
    if !(a.to > a.from) {
        return Err(CliError::input("--to must exceed --from"));
    }
    let phi = parse_phi(&a.phi, &sys, cells)?;
    let opts = match a.backend {
        BackendArg::Grid => SimOptions::grid(&sys, cells),
        BackendArg::Exact => SimOptions::exact(a.step.unwrap_or(sys.tau_max() / cells as f64)),
    };
    let sim = simulate_homogeneous(&sys, &phi, a.from, a.to, &opts)?;
    for w in &sim.warnings {
        eprintln!("warning: {w}");
    }
    let d = sys.dim();
    let content = match a.format {
        DataFormat::Csv => {
            let mut header = vec![String::from("t")];
            for i in 0..d {
                header.push(format!("y{i}_re"));
                header.push(format!("y{i}_im"));
            }
            let mut t = CsvTable::new(&header)?;
            for (i, y) in sim.signal.values.iter().enumerate() {
                let mut row = vec![num(sim.signal.time(i))];
                for z in y.iter() {
                    row.push(num(z.re));
                    row.push(num(z.im));
                }
                t.row(&row)?;
            }
            t.finish()?
        }
        DataFormat::Json => to_json(&SimulationOut {
            start: sim.signal.start,
            step: sim.signal.step,
            max_delay_rounding: sim.max_delay_rounding,
            warnings: &sim.warnings,
            values: sim
                .signal
                .values
                .iter()
                .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        })?,
    };
    emit(a.out.as_deref(), &content)?;
    Ok(Status::Done)
}

pub fn kernel(cfg: &AnalysisConfig, a: &KernelArgs) -> CliResult<Status> {
    let sys = load_system(&a.system)?;
    let m_t = a.grid.unwrap_or(cfg.m_t);
    let kern = kernel_coefficients(&sys, a.horizon, m_t, &LatticeOptions::default())?;
    let d = sys.dim();
    let mut header = vec![String::from("f"), String::from("t")];
    header.extend(entry_header("k", d));
    let mut t = CsvTable::new(&header)?;
    let offsets: Vec<f64> = kern.lattice().offsets().collect();
    for &f in &offsets {
        for (i, &ti) in kern.grid().iter().enumerate() {
            let idx = kern.lattice().index_of(f).expect("offset belongs to its lattice");
            let mut row = vec![num(f), num(ti)];
            push_entries(&mut row, &kern.table_row(i)[idx]);
            t.row(&row)?;
        }
    }
    emit(a.out.as_deref(), &t.finish()?)?;
    eprintln!("{} lattice points up to horizon {}", offsets.len(), kern.horizon());
    Ok(Status::Done)
}

pub fn scan(cfg: &AnalysisConfig, a: &ScanArgs) -> CliResult<Status> {
    let sys = load_system(&a.system)?;
    let beta = a.beta.unwrap_or(cfg.beta);
    let k = a.k.unwrap_or(cfg.k);
    let (n_re, n_im) = match a.grid.as_deref() {
        Some([r, i]) => (*r, *i),
        _ => (cfg.scan_re, cfg.scan_im),
    };
    let mut t = CsvTable::new(&["re", "im", "sigma_min"])?;
    if n_re == 0 || n_im == 0 {
        emit(a.out.as_deref(), &t.finish()?)?;
        return Ok(Status::Done);
    }
    let opts = ScanOptions {
        n_re,
        n_im,
        re_max: a.remax,
        ..cfg.scan_options()
    };
    let res = scan_halfplane(&sys, beta, k, &opts)?;
    for pt in &res.points {
        t.row(&[num(pt.p.re), num(pt.p.im), num(pt.sigma_min)])?;
    }
    emit(a.out.as_deref(), &t.finish()?)?;
    let hist: Vec<String> = res.history.iter().map(|(k, v)| format!("K={k}: {v:.6e}")).collect();
    eprintln!(
        "min sigma_min {:.6e} at {:.6}{:+.6}i; {}; converged {}",
        res.min_sigma,
        res.argmin.re,
        res.argmin.im,
        hist.join(", "),
        res.converged
    );
    Ok(if res.converged {
        Status::Done
    } else {
        Status::Inconclusive
    })
}

enum Part {
    Frozen(Result<perstab_core::stability::FrozenResult, String>),
    HenryHale(Option<Result<perstab_core::stability::HenryHaleResult, String>>),
    Generalized(Result<perstab_core::stability::GeneralizedResult, String>),
    Monodromy(Result<perstab_core::stability::MonodromyResult, String>),
    Decay(Result<perstab_core::simulator::DecayFit, String>),
}

/// Runs the independent tests on up to `threads` threads; the result does not depend on
/// the thread count.
pub fn compute_report(sys: &DelaySystem, opts: &ReportOptions, threads: usize) -> StabilityReport {
    let err = |e: perstab_core::Error| e.to_string();
    let tasks: Vec<Box<dyn Fn() -> Part + Send + Sync + '_>> = vec![
        Box::new(move || Part::Frozen(pointwise_frozen_test(sys, opts.beta, &opts.frozen).map_err(err))),
        Box::new(move || {
            Part::HenryHale(
                sys.is_constant()
                    .then(|| henry_hale_constant(sys, opts.beta, &opts.frozen, opts.abscissa_tol).map_err(err)),
            )
        }),
        Box::new(move || Part::Generalized(generalized_test(sys, opts.beta, opts.k, &opts.scan).map_err(err))),
        Box::new(move || Part::Monodromy(monodromy_radius(sys, opts.m_cells).map_err(err))),
        Box::new(move || Part::Decay(random_decay_fit(sys, opts).map_err(err))),
    ];
    let mut parts = Vec::with_capacity(tasks.len());
    for batch in tasks.chunks(threads.max(1)) {
        if batch.len() == 1 {
            parts.push(batch[0]());
            continue;
        }
        std::thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|f| s.spawn(f)).collect();
            for h in handles {
                parts.push(h.join().expect("analysis thread panicked"));
            }
        });
    }
    let (mut fr, mut hh, mut ge, mut mo, mut de) = (None, None, None, None, None);
    for p in parts {
        match p {
            Part::Frozen(x) => fr = Some(x),
            Part::HenryHale(x) => hh = Some(x),
            Part::Generalized(x) => ge = Some(x),
            Part::Monodromy(x) => mo = Some(x),
            Part::Decay(x) => de = Some(x),
        }
    }
    StabilityReport::assemble(
        sys,
        opts,
        fr.expect("frozen part"),
        hh.expect("henry-hale part"),
        ge.expect("generalized part"),
        mo.expect("monodromy part"),
        de.expect("decay part"),
    )
}

fn emit_report(report: &StabilityReport, out: &ReportOutput) -> CliResult<Status> {
    if let Some(p) = &out.report {
        emit(Some(p), &to_json(report)?)?;
    }
    let content = match out.format {
        Format::Text => report_text(report),
        Format::Json => to_json(report)?,
        Format::Csv => report_csv(report)?,
    };
    emit(out.out.as_deref(), &content)?;
    Ok(if report.overall() == Verdict::Inconclusive {
        Status::Inconclusive
    } else {
        Status::Done
    })
}

pub fn stability(cfg: &AnalysisConfig, a: &StabilityArgs) -> CliResult<Status> {
    let sys = load_system(&a.system)?;
    let mut cfg = cfg.clone();
    if let Some(b) = a.beta {
        cfg.beta = b;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(m) = a.m_cells {
        cfg.m_cells = m;
    }
    if let Some(m) = a.m_bound {
        cfg.m_bound = m;
    }
    cfg.validate()?;
    let report = compute_report(&sys, &cfg.report_options(), cfg.thread_count()?);
    emit_report(&report, &a.out)
}

pub fn demo_counterexample(cfg: &AnalysisConfig, alpha: f64, out: &ReportOutput) -> CliResult<Status> {
    let sys = catalog::counterexample(alpha)?;
    let report = compute_report(&sys, &cfg.report_options(), cfg.thread_count()?);
    emit_report(&report, out)
}

pub fn htf(cfg: &AnalysisConfig, a: &HtfArgs) -> CliResult<Status> {
    let sys = load_system(&a.system)?;
    let k = a.k.unwrap_or(cfg.k);
    let p = c64(a.p.0, a.p.1);
    let h = htf_matrix(&sys, p, k)?;
    let kk = k as i64;
    let w = kk / 2;
    let d = sys.dim();
    // itf[m + w][k + 2w] = G_k(p - i m omega)
    let itf = if a.consistency {
        let horizon = a.horizon.unwrap_or(20.0 * sys.period());
        let kern = kernel_coefficients(
            &sys,
            horizon,
            cfg.m_t.max(4 * w as usize + 1),
            &LatticeOptions::default(),
        )?;
        let env = kern.growth_envelope();
        let omega = sys.omega();
        Some(
            (-w..=w)
                .map(|m| {
                    itf_fourier(
                        &kern,
                        &env,
                        p - c64(0.0, m as f64 * omega),
                        2 * w as usize,
                        cfg.growth_margin,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    let mut t = CsvTable::new(&["n", "m", "row", "col", "re", "im", "itf_re", "itf_im", "abs_diff"])?;
    let mut worst: f64 = 0.0;
    for n in -kk..=kk {
        for m in -kk..=kk {
            let blk = h.block(n, m);
            let g = match &itf {
                Some(g) if n.abs() <= w && m.abs() <= w => Some(&g[(m + w) as usize][(m - n + 2 * w) as usize]),
                _ => None,
            };
            for r in 0..d {
                for c in 0..d {
                    let z = blk[(r, c)];
                    let mut row = vec![
                        n.to_string(),
                        m.to_string(),
                        r.to_string(),
                        c.to_string(),
                        num(z.re),
                        num(z.im),
                    ];
                    match g {
                        Some(g) => {
                            let diff = (z - g[(r, c)]).norm();
                            worst = worst.max(diff);
                            row.extend([num(g[(r, c)].re), num(g[(r, c)].im), num(diff)]);
                        }
                        None => row.extend([String::new(), String::new(), String::new()]),
                    }
                    t.row(&row)?;
                }
            }
        }
    }
    emit(a.out.as_deref(), &t.finish()?)?;
    eprintln!("sigma_min(R_K(p)) = {:.6e}", h.sigma_min);
    if itf.is_some() {
        eprintln!("max |H - G| over |n|, |m| <= {w}: {worst:.3e}");
    }
    Ok(Status::Done)
}

#[derive(Serialize)]
struct LambdaOut {
    p: [f64; 2],
    k: usize,
    residual: f64,
    window: usize,
    n_terms: usize,
}

#[derive(Serialize)]
struct RealizeOut {
    m_z: usize,
    m_u: usize,
    dim: usize,
    step: f64,
    state_dim: usize,
    input_dim: usize,
    spectral_radius_a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<LambdaOut>,
}

fn emit_data<T: Serialize>(value: &T, format: DataFormat, out: Option<&Path>) -> CliResult<()> {
    let content = match format {
        DataFormat::Json => to_json(value)?,
        DataFormat::Csv => {
            let v = serde_json::to_value(value).map_err(|e| CliError::Output(e.to_string()))?;
            let mut t = CsvTable::new(&["key", "value"])?;
            flatten_json("", &v, &mut t)?;
            t.finish()?
        }
    };
    emit(out, &content)
}

fn flatten_json(prefix: &str, v: &serde_json::Value, t: &mut CsvTable) -> CliResult<()> {
    match v {
        serde_json::Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_json(&key, x, t)?;
            }
            Ok(())
        }
        other => t.row(&[prefix.to_string(), other.to_string()]),
    }
}

pub fn realize(cfg: &AnalysisConfig, a: &RealizeArgs) -> CliResult<Status> {
    let sys = load_system(&a.system)?;
    let real = build_realization(&sys, a.m_z, a.m_u)?;
    let lambda = match a.verify_lambda {
        Some((re, im)) => {
            let k = a.k.unwrap_or(cfg.k);
            let chk = verify_lambda_equals_htf(&sys, c64(re, im), k, a.m_u, None)?;
            Some(LambdaOut {
                p: [re, im],
                k,
                residual: chk.residual,
                window: chk.window,
                n_terms: chk.n_terms,
            })
        }
        None => None,
    };
    let summary = RealizeOut {
        m_z: real.m_z,
        m_u: real.m_u,
        dim: real.dim,
        step: real.step,
        state_dim: real.a.nrows(),
        input_dim: real.b.ncols(),
        spectral_radius_a: spectral_radius_complex(&real.a),
        lambda,
    };
    emit_data(&summary, a.format, a.out.as_deref())?;
    Ok(Status::Done)
}

#[derive(Serialize)]
struct VolterraOut {
    start: f64,
    end: f64,
    grid: usize,
    max_terms: usize,
    max_term_count: usize,
    resolvent_residual: f64,
    fundamental_max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve_max_error: Option<f64>,
}

/// Residuals at or below this level count as a successful check.
const VOLTERRA_TOL: f64 = 1e-10;

pub fn volterra_check(cfg: &AnalysisConfig, a: &VolterraArgs) -> CliResult<Status> {
    let sys = load_system(&a.system)?;
    if a.grid == 0 {
        return Err(CliError::input("grid must be positive"));
    }
    let s = a.start;
    let k = kernel_from_system(&sys, s);
    let rho = resolvent(&k)?;
    let (lo, hi) = k.interval();
    let n = a.grid;
    let pts: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let residual = resolvent_residual(&k, &rho, &pts, &pts);
    let mut max_term_count = 0;
    for &t in &pts {
        max_term_count = max_term_count.max(rho.term_count(t)?);
    }
    let kern = kernel_coefficients(&sys, sys.tau_max(), 1, &LatticeOptions::default())?;
    let mut fund_err: f64 = 0.0;
    // Starting times sit off the grid so that t - alpha never lands on a jump, where the
    // two routes may round to opposite sides.
    let alphas: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.381966) / n as f64)
        .collect();
    for &t in &pts {
        for &alpha in alphas.iter().filter(|&&al| al <= t) {
            let x = kern.fundamental_solution(t, alpha)?;
            fund_err = fund_err.max(perstab_core::linalg::max_abs_diff(&rho.fundamental(t, alpha), &x));
        }
    }
    let solve_err = match &a.phi {
        Some(spec) => {
            let phi: Source = parse_phi(spec, &sys, cfg.m_cells)?;
            let f = forcing_from_initial(&sys, &phi, s);
            let exact = ExactSolver::new(&sys, s, sys.tau_max(), SimOptions::exact(1.0).lattice_cap)?;
            let mut worst: f64 = 0.0;
            // Midpoints avoid the endpoint where an incompatible history jumps.
            for i in 0..n {
                let t = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
                let y = rho.solve(&f, t);
                let want = exact.homogeneous(&phi, t)?;
                worst = worst.max(vec_max_abs(&(&y - &want)) / vec_max_abs(&want).max(1.0));
            }
            Some(worst)
        }
        None => None,
    };
    let out = VolterraOut {
        start: lo,
        end: hi,
        grid: n,
        max_terms: rho.max_terms(),
        max_term_count,
        resolvent_residual: residual,
        fundamental_max_error: fund_err,
        solve_max_error: solve_err,
    };
    emit_data(&out, a.format, a.out.as_deref())?;
    let ok = residual <= VOLTERRA_TOL && fund_err <= VOLTERRA_TOL && solve_err.is_none_or(|e| e <= VOLTERRA_TOL);
    Ok(if ok { Status::Done } else { Status::Inconclusive })
}
