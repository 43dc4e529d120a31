//! Initial histories on `[-tau_N, 0]`.
//!
//! * `const:v` or `const:v1,v2,...` for constant histories;
//! * `random:SEED` for independent uniform cell values (one per grid cell);
//! * `expr:e` or `expr:e1;e2;...` in the variable `t` (the history argument);
//! * anything else is a CSV file with columns `theta, y0_re, y0_im, y1_re, ...` on a
//!   uniform grid of `theta`.

use std::path::Path;

use perstab_core::linalg::c64;
use perstab_core::simulator::{Signal, Source};
use perstab_core::stability::random_history;
use perstab_core::{CVec, DelaySystem};

use crate::error::{CliError, CliResult};
use crate::spec::ScalarExpr;

fn broadcast<T: Clone>(mut items: Vec<T>, dim: usize, what: &str) -> CliResult<Vec<T>> {
    match items.len() {
        1 => Ok(vec![items.remove(0); dim]),
        n if n == dim => Ok(items),
        n => Err(CliError::input(format!(
            "{what}: {n} components for a system of dimension {dim}"
        ))),
    }
}

pub fn parse_phi(spec: &str, system: &DelaySystem, cells: usize) -> CliResult<Source> {
    let dim = system.dim();
    if let Some(rest) = spec.strip_prefix("const:") {
        let vals = rest
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::input(format!("const history {s:?}: {e}")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let v = CVec::from_iterator(
            dim,
            broadcast(vals, dim, "const history")?.into_iter().map(|x| c64(x, 0.0)),
        );
        return Ok(Source::function(move |_| v.clone()));
    }
    if let Some(rest) = spec.strip_prefix("random:") {
        let seed = rest
            .trim()
            .parse::<u64>()
            .map_err(|e| CliError::input(format!("random history seed {rest:?}: {e}")))?;
        return Ok(random_history(system, cells, seed)?);
    }
    if let Some(rest) = spec.strip_prefix("expr:") {
        let exprs = rest
            .split(';')
            .map(|s| ScalarExpr::parse(s.trim(), "t"))
            .collect::<CliResult<Vec<_>>>()?;
        let exprs = broadcast(exprs, dim, "expr history")?;
        return Ok(Source::function(move |t| {
            CVec::from_iterator(dim, exprs.iter().map(|e| c64(e.eval(t), 0.0)))
        }));
    }
    load_history_csv(Path::new(spec), dim)
}

fn load_history_csv(path: &Path, dim: usize) -> CliResult<Source> {
    let mut rdr =
        csv::Reader::from_path(path).map_err(|e| CliError::input(format!("history file {}: {e}", path.display())))?;
    let mut thetas = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("history file {}: {e}", path.display())))?;
        let nums = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::input(format!("history file row {}: {e}", line + 1)))?;
        if nums.len() != 1 + 2 * dim {
            return Err(CliError::input(format!(
                "history file row {}: expected {} columns, found {}",
                line + 1,
                1 + 2 * dim,
                nums.len()
            )));
        }
        thetas.push(nums[0]);
        values.push(CVec::from_fn(dim, |i, _| c64(nums[1 + 2 * i], nums[2 + 2 * i])));
    }
    if thetas.len() < 2 {
        return Err(CliError::input("history file needs at least two rows"));
    }
    let step = thetas[1] - thetas[0];
    let uniform = thetas
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
    if !(step > 0.0) || !uniform {
        return Err(CliError::input(
            "history file must use an increasing uniform theta grid",
        ));
    }
    Ok(Source::Samples(Signal::new(thetas[0], step, values)?))
}
