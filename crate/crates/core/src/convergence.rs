//! Convergence studies: step-count ladders, self-referenced errors and fitted orders.

use rayon::prelude::*;
use serde::Serialize;

use crate::integrator_dae::{integrate_dae_fixed_with, DaeError, DaeProblem, DaeState};
use crate::integrator_ode::{fmt17, integrate_fixed_with, IntegrateError, OdeProblem, StepOptions};
use crate::linalg::norm2;
use crate::methods::{self, MethodCard};

pub const REFERENCE_METHOD: &str = "imex-ros4-3-6";
/// Number of finest rungs used for the order fit.
pub const FIT_TAIL: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_steps: usize,
    pub h: f64,
    pub error: f64,
    /// Differential / algebraic parts for DAE runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub method: String,
    pub rows: Vec<ConvergenceRow>,
    pub fitted_order: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ConvergenceTable {
    fn from_rows(method: &str, mut rows: Vec<ConvergenceRow>, failure: Option<String>) -> Self {
        rows.sort_by_key(|r| r.n_steps);
        let fitted_order = fit_order(&rows, FIT_TAIL);
        Self {
            method: method.to_string(),
            rows,
            fitted_order,
            failure,
        }
    }

    pub fn fitted_order_of(&self, pick: impl Fn(&ConvergenceRow) -> Option<f64>) -> f64 {
        let rows: Vec<ConvergenceRow> = self
            .rows
            .iter()
            .filter_map(|r| pick(r).map(|e| ConvergenceRow { error: e, ..r.clone() }))
            .collect();
        fit_order(&rows, FIT_TAIL)
    }
}

/// Least-squares slope of ln(error) against ln(h) over the `tail` smallest steps.
pub fn fit_order(rows: &[ConvergenceRow], tail: usize) -> f64 {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0 && r.error.is_finite() && r.h > 0.0)
        .map(|r| (r.h, r.error))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.truncate(tail);
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|(h, e)| (h.ln(), e.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `rungs` step counts starting at `n0`, each `factor` times the previous.
pub fn ladder(n0: usize, rungs: usize, factor: usize) -> Vec<usize> {
    (0..rungs).map(|k| n0 * factor.pow(k as u32)).collect()
}

/// `rungs` step counts growing geometrically by a real `ratio`, rounded.
pub fn ladder_ratio(n0: usize, rungs: usize, ratio: f64) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(rungs);
    for k in 0..rungs {
        let n = (n0 as f64 * ratio.powi(k as i32)).round() as usize;
        let n = out.last().map_or(n, |&p| n.max(p + 1));
        out.push(n);
    }
    out
}

/// Adapts a method to a problem with fewer partitions: the three-way
/// IMEX-ROS22 runs two-process problems with its middle process empty.
pub fn fit_problem(problem: &OdeProblem, method: &MethodCard) -> OdeProblem {
    let np = method.tableau.n_partitions();
    if np == problem.n_partitions() {
        problem.clone()
    } else if np == 3 && problem.n_partitions() == 2 {
        problem.remap(&[Some(0), None, Some(1)])
    } else if problem.n_partitions() == 1 {
        let mut map = vec![None; np];
        map[np - 1] = Some(0);
        problem.remap(&map)
    } else {
        problem.clone()
    }
}

/// Two-partition variant of a built-in for DAE use.
pub fn dae_method(method: &MethodCard) -> MethodCard {
    if method.tableau.n_partitions() == 2 {
        method.clone()
    } else {
        methods::builtin_two_way(method.name()).unwrap_or_else(|_| method.clone())
    }
}

pub fn ode_final(
    problem: &OdeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    n_steps: usize,
) -> Result<Vec<f64>, IntegrateError> {
    let p = fit_problem(problem, method);
    let (tr, _) = integrate_fixed_with(&p, method, t0, tf, &p.y0, n_steps, StepOptions::default(), false)?;
    Ok(tr.last().expect("at least one state").to_vec())
}

/// Final state of the fixed-step reference method with `n_ref` steps.
pub fn ode_reference(problem: &OdeProblem, t0: f64, tf: f64, n_ref: usize) -> Result<Vec<f64>, IntegrateError> {
    let m = methods::builtin(REFERENCE_METHOD).expect("reference method");
    ode_final(problem, &m, t0, tf, n_ref)
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Two-norm errors at `tf` over the ladder; rungs run in parallel and a
/// failing rung stops the table at the failure.
pub fn ode_convergence(
    problem: &OdeProblem,
    method: &MethodCard,
    ladder: &[usize],
    t0: f64,
    tf: f64,
    reference: &[f64],
) -> ConvergenceTable {
    let results: Vec<(usize, Result<Vec<f64>, IntegrateError>)> = ladder
        .par_iter()
        .map(|&n| (n, ode_final(problem, method, t0, tf, n)))
        .collect();
    collect(method.name(), results, tf - t0, |y| (diff_norm(y, reference), None, None))
}

fn collect<T, E: std::fmt::Display>(
    name: &str,
    mut results: Vec<(usize, Result<T, E>)>,
    span: f64,
    err: impl Fn(&T) -> (f64, Option<f64>, Option<f64>),
) -> ConvergenceTable {
    results.sort_by_key(|r| r.0);
    let mut rows = Vec::new();
    let mut failure = None;
    for (n, r) in results {
        match r {
            Ok(v) => {
                let (error, error_x, error_z) = err(&v);
                rows.push(ConvergenceRow {
                    n_steps: n,
                    h: span / n as f64,
                    error,
                    error_x,
                    error_z,
                });
            }
            Err(e) => {
                if failure.is_none() {
                    failure = Some(format!("{n} steps: {e}"));
                }
            }
        }
    }
    ConvergenceTable::from_rows(name, rows, failure)
}

pub fn dae_final(
    problem: &DaeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    n_steps: usize,
    state0: &DaeState,
) -> Result<DaeState, DaeError> {
    let m = dae_method(method);
    let (tr, _) = integrate_dae_fixed_with(problem, &m, t0, tf, n_steps, state0, false)?;
    Ok(tr.last().expect("at least one state").clone())
}

pub fn dae_reference(
    problem: &DaeProblem,
    t0: f64,
    tf: f64,
    n_ref: usize,
    state0: &DaeState,
) -> Result<DaeState, DaeError> {
    let m = methods::builtin(REFERENCE_METHOD).expect("reference method");
    dae_final(problem, &m, t0, tf, n_ref, state0)
}

pub fn dae_convergence(
    problem: &DaeProblem,
    method: &MethodCard,
    ladder: &[usize],
    t0: f64,
    tf: f64,
    state0: &DaeState,
    reference: &DaeState,
) -> ConvergenceTable {
    let results: Vec<(usize, Result<DaeState, DaeError>)> = ladder
        .par_iter()
        .map(|&n| (n, dae_final(problem, method, t0, tf, n, state0)))
        .collect();
    collect(method.name(), results, tf - t0, |s| {
        let ex = diff_norm(&s.x, &reference.x);
        let ez = diff_norm(&s.z, &reference.z);
        ((ex * ex + ez * ez).sqrt(), Some(ex), Some(ez))
    })
}

/// `method,n_steps,h,error` rows for all tables in order.
pub fn tables_to_csv(tables: &[ConvergenceTable]) -> String {
    let mut out = String::from("method,n_steps,h,error\n");
    for t in tables {
        for r in &t.rows {
            out.push_str(&format!("{},{},{},{}\n", t.method, r.n_steps, fmt17(r.h), fmt17(r.error)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(order: f64) -> Vec<ConvergenceRow> {
        ladder(10, 6, 2)
            .into_iter()
            .map(|n| {
                let h = 1.0 / n as f64;
                ConvergenceRow {
                    n_steps: n,
                    h,
                    error: 3.0 * h.powf(order),
                    error_x: None,
                    error_z: None,
                }
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        assert!((fit_order(&rows(3.0), 5) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn reversal_invariant() {
        let r = rows(2.5);
        let mut rev = r.clone();
        rev.reverse();
        assert_eq!(fit_order(&r, 5), fit_order(&rev, 5));
    }

    #[test]
    fn ladder_doubles() {
        assert_eq!(ladder(5, 4, 2), vec![5, 10, 20, 40]);
    }
}
