//! One-step integration of additively partitioned ODEs y' = Σ f^{m}(t, y).
//!
//! Non-autonomous terms use each process's own clock: stage times
//! t_n + c^{q,q}_i h and the correction h² f^{q}_t g^{q,q}_i. W-methods get the
//! same treatment with f_t evaluated exactly; their order claims for
//! non-autonomous problems rest on that convention.

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{axpy, lu_factor, LuFactorization, Matrix};
use crate::methods::MethodCard;
use crate::tableau::{MethodClass, PartitionedTableau, StageId};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("evaluation failed: {0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("singular stage matrix in partition {partition}, stage {stage}")]
    SingularStageMatrix { partition: usize, stage: usize },
    #[error("Newton iteration diverged in partition {partition}, stage {stage}")]
    NewtonDivergence { partition: usize, stage: usize },
    #[error("method is not decoupled: {0}")]
    NotDecoupled(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("no partitions share stages; the combined-stage path does not apply")]
    NotCombinable,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type RhsFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(f64, &[f64], &mut Matrix) -> Result<(), EvalError> + Send + Sync>;

/// Which matrix multiplies the γ-terms of a partition.
#[derive(Debug, Clone, PartialEq)]
pub enum JacobianKind {
    Analytic,
    FiniteDifference,
    /// A fixed approximation L, used whatever the method class.
    Frozen(Matrix),
}

#[derive(Clone)]
pub struct Partition {
    pub rhs: RhsFn,
    pub jacobian: Option<JacFn>,
    pub kind: JacobianKind,
    pub time_derivative: Option<RhsFn>,
    /// The Jacobian does not depend on (t, y); factorizations are kept across steps.
    pub constant_jacobian: bool,
    /// Identically zero process; its stages are skipped.
    pub is_zero: bool,
}

impl Partition {
    pub fn new(rhs: RhsFn) -> Self {
        Self {
            rhs,
            jacobian: None,
            kind: JacobianKind::FiniteDifference,
            time_derivative: None,
            constant_jacobian: false,
            is_zero: false,
        }
    }

    pub fn with_jacobian(mut self, jac: JacFn) -> Self {
        self.jacobian = Some(jac);
        self.kind = JacobianKind::Analytic;
        self
    }

    pub fn with_time_derivative(mut self, ft: RhsFn) -> Self {
        self.time_derivative = Some(ft);
        self
    }

    pub fn constant(mut self) -> Self {
        self.constant_jacobian = true;
        self
    }

    pub fn zero() -> Self {
        let rhs: RhsFn = Arc::new(|_, _, out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        });
        let jac: JacFn = Arc::new(|_, _, m: &mut Matrix| {
            *m = Matrix::zeros(m.rows(), m.cols());
            Ok(())
        });
        let mut p = Self::new(rhs).with_jacobian(jac).constant();
        p.is_zero = true;
        p
    }
}

#[derive(Clone)]
pub struct OdeProblem {
    pub name: String,
    pub dim: usize,
    pub partitions: Vec<Partition>,
    pub y0: Vec<f64>,
    pub t_span: (f64, f64),
}

impl std::fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("partitions", &self.partitions.len())
            .field("t_span", &self.t_span)
            .finish()
    }
}

impl OdeProblem {
    pub fn new(name: &str, partitions: Vec<Partition>, y0: Vec<f64>, t_span: (f64, f64)) -> Self {
        Self {
            name: name.to_string(),
            dim: y0.len(),
            partitions,
            y0,
            t_span,
        }
    }

    pub fn n_partitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn eval(&self, m: usize, t: f64, y: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.partitions[m].rhs)(t, y, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::Other(format!("non-finite value in partition {}", m + 1)));
        }
        Ok(())
    }

    /// Sum of all processes.
    pub fn eval_total(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut acc = vec![0.0; self.dim];
        let mut buf = vec![0.0; self.dim];
        for m in 0..self.n_partitions() {
            self.eval(m, t, y, &mut buf)?;
            axpy(1.0, &buf, &mut acc);
        }
        Ok(acc)
    }

    pub fn analytic_jacobian(&self, m: usize, t: f64, y: &[f64]) -> Option<Result<Matrix, EvalError>> {
        self.partitions[m].jacobian.as_ref().map(|jac| {
            let mut j = Matrix::zeros(self.dim, self.dim);
            jac(t, y, &mut j).map(|_| j)
        })
    }

    /// Forward differences with increment √ε·max(|y_j|, 1).
    pub fn fd_jacobian(&self, m: usize, t: f64, y: &[f64]) -> Result<Matrix, EvalError> {
        fd_jacobian(self.dim, |yy, out| self.eval(m, t, yy, out), y)
    }

    /// The matrix used in the γ-terms of partition m.
    pub fn jacobian(&self, m: usize, t: f64, y: &[f64]) -> Result<Matrix, EvalError> {
        match &self.partitions[m].kind {
            JacobianKind::Frozen(l) => Ok(l.clone()),
            JacobianKind::Analytic => match self.analytic_jacobian(m, t, y) {
                Some(j) => j,
                None => self.fd_jacobian(m, t, y),
            },
            JacobianKind::FiniteDifference => self.fd_jacobian(m, t, y),
        }
    }

    pub fn with_jacobian_kind(mut self, m: usize, kind: JacobianKind) -> Self {
        self.partitions[m].kind = kind;
        self
    }

    /// New problem whose partition k is the old partition `map[k]`, or zero.
    pub fn remap(&self, map: &[Option<usize>]) -> Self {
        let partitions = map
            .iter()
            .map(|m| match m {
                Some(i) => self.partitions[*i].clone(),
                None => Partition::zero(),
            })
            .collect();
        Self {
            partitions,
            ..self.clone()
        }
    }
}

pub fn fd_jacobian(
    dim: usize,
    f: impl FnMut(&[f64], &mut [f64]) -> Result<(), EvalError>,
    y: &[f64],
) -> Result<Matrix, EvalError> {
    fd_jacobian_rect(dim, f, y)
}

/// Central differences with steps relative to each component's magnitude.
pub fn fd_jacobian_rect(
    n_out: usize,
    mut f: impl FnMut(&[f64], &mut [f64]) -> Result<(), EvalError>,
    y: &[f64],
) -> Result<Matrix, EvalError> {
    let cbrt = f64::EPSILON.cbrt();
    let mut j = Matrix::zeros(n_out, y.len());
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; n_out];
    let mut fm = vec![0.0; n_out];
    for c in 0..y.len() {
        let scale = if y[c] != 0.0 { y[c].abs() } else { 1.0 };
        yp[c] = y[c] + cbrt * scale;
        let up = yp[c];
        f(&yp, &mut fp)?;
        yp[c] = y[c] - cbrt * scale;
        let down = yp[c];
        f(&yp, &mut fm)?;
        for r in 0..n_out {
            j[(r, c)] = (fp[r] - fm[r]) / (up - down);
        }
        yp[c] = y[c];
    }
    Ok(j)
}

/// Largest entrywise difference relative to the largest entry of `reference`.
pub fn relative_difference(a: &Matrix, reference: &Matrix) -> f64 {
    let diff = a.sub(reference).max_abs();
    diff / reference.max_abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub steps: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub f_evals: usize,
    pub jac_evals: usize,
    pub lu_factorizations: usize,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub y_next: Vec<f64>,
    pub error_estimate: Option<Vec<f64>>,
    /// k^{q}_i, indexed [q][i]; present when requested.
    pub stages: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOptions {
    /// Re-evaluate L^{q} every step for W-methods instead of freezing it at the start.
    pub refresh_row_jacobian: bool,
    /// Weights τ^{m} splitting t' = 1 among the processes; `None` gives each
    /// process its own clock.
    pub time_split: Option<Vec<f64>>,
    pub keep_stages: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StageKind {
    Explicit,
    Linear,
    Dirk,
}

type LuKey = (usize, u64, u64, u64);

/// Reusable stepping state: frozen matrices, factorization cache, counters.
pub struct Stepper<'a> {
    problem: &'a OdeProblem,
    tableau: &'a PartitionedTableau,
    ordering: Vec<StageId>,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
    opts: StepOptions,
    needs_m: Vec<bool>,
    kinds: Vec<Vec<StageKind>>,
    time_c: Vec<Vec<f64>>,
    time_g: Vec<Vec<f64>>,
    frozen: Vec<Option<Matrix>>,
    lu: HashMap<LuKey, LuFactorization>,
    pub stats: StepStats,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a OdeProblem, tableau: &'a PartitionedTableau, opts: StepOptions) -> Result<Self, IntegrateError> {
        let groups = (0..tableau.n_partitions()).map(|q| vec![q]).collect();
        Self::with_groups(problem, tableau, opts, groups)
    }

    /// Stores one summed stage per group of partitions with identical columns and weights.
    pub fn new_combined(
        problem: &'a OdeProblem,
        tableau: &'a PartitionedTableau,
        opts: StepOptions,
    ) -> Result<Self, IntegrateError> {
        let groups = tableau.combined_stage_groups();
        if groups.iter().all(|g| g.len() < 2) {
            return Err(IntegrateError::NotCombinable);
        }
        Self::with_groups(problem, tableau, opts, groups)
    }

    fn with_groups(
        problem: &'a OdeProblem,
        tableau: &'a PartitionedTableau,
        opts: StepOptions,
        groups: Vec<Vec<usize>>,
    ) -> Result<Self, IntegrateError> {
        let n = tableau.n_partitions();
        if problem.n_partitions() != n {
            return Err(IntegrateError::Shape(format!(
                "problem has {} partitions, method has {n}",
                problem.n_partitions()
            )));
        }
        if problem.y0.len() != problem.dim {
            return Err(IntegrateError::Shape("initial state length differs from dimension".into()));
        }
        let ordering = tableau
            .decoupled_ordering()
            .map_err(|e| IntegrateError::NotDecoupled(e.to_string()))?;
        let mut group_of = vec![0; n];
        for (gi, g) in groups.iter().enumerate() {
            for &q in g {
                group_of[q] = gi;
            }
        }
        let kinds: Vec<Vec<StageKind>> = (0..n)
            .map(|q| {
                (0..tableau.b[q].len())
                    .map(|i| {
                        if tableau.alpha[q][q][(i, i)] != 0.0 {
                            StageKind::Dirk
                        } else if tableau.gamma[q][q][(i, i)] != 0.0 {
                            StageKind::Linear
                        } else {
                            StageKind::Explicit
                        }
                    })
                    .collect()
            })
            .collect();
        let needs_m = (0..n)
            .map(|q| {
                !problem.partitions[q].is_zero
                    && (tableau.gamma[q].iter().any(|g| g.max_abs() != 0.0) || kinds[q].contains(&StageKind::Dirk))
            })
            .collect();
        let d = tableau.derive_vectors();
        let (time_c, time_g) = match &opts.time_split {
            None => (
                (0..n).map(|q| d.c[q][q].clone()).collect(),
                (0..n).map(|q| d.g[q][q].clone()).collect(),
            ),
            Some(tau) => {
                if tau.len() != n {
                    return Err(IntegrateError::Shape("time split needs one weight per partition".into()));
                }
                let mix = |v: &Vec<Vec<Vec<f64>>>, q: usize| -> Vec<f64> {
                    (0..tableau.b[q].len())
                        .map(|i| (0..n).map(|m| tau[m] * v[q][m][i]).sum())
                        .collect()
                };
                ((0..n).map(|q| mix(&d.c, q)).collect(), (0..n).map(|q| mix(&d.g, q)).collect())
            }
        };
        Ok(Self {
            problem,
            tableau,
            ordering,
            groups,
            group_of,
            opts,
            needs_m,
            kinds,
            time_c,
            time_g,
            frozen: vec![None; n],
            lu: HashMap::new(),
            stats: StepStats::default(),
        })
    }

    fn keeps_matrix(&self, q: usize) -> bool {
        let p = &self.problem.partitions[q];
        matches!(p.kind, JacobianKind::Frozen(_))
            || p.constant_jacobian
            || (self.tableau.class == MethodClass::Row && !self.opts.refresh_row_jacobian)
    }

    fn refresh_matrices(&mut self, t: f64, y: &[f64]) -> Result<(), IntegrateError> {
        for q in 0..self.tableau.n_partitions() {
            if !self.needs_m[q] || (self.frozen[q].is_some() && self.keeps_matrix(q)) {
                continue;
            }
            self.frozen[q] = Some(self.problem.jacobian(q, t, y)?);
            self.stats.jac_evals += 1;
            self.lu.retain(|k, _| k.0 != q);
        }
        Ok(())
    }

    fn factor(&mut self, q: usize, i: usize, diag: f64, h: f64) -> Result<(), IntegrateError> {
        let a = self.tableau.alpha[q][q][(i, i)];
        let g = self.tableau.gamma[q][q][(i, i)];
        let key = (q, a.to_bits(), g.to_bits(), h.to_bits());
        if self.lu.contains_key(&key) {
            return Ok(());
        }
        let m = self.frozen[q].as_ref().expect("matrix refreshed");
        let dim = self.problem.dim;
        let w = Matrix::from_fn(dim, dim, |r, c| if r == c { 1.0 } else { 0.0 } - h * diag * m[(r, c)]);
        let lu = lu_factor(&w).map_err(|_| IntegrateError::SingularStageMatrix { partition: q, stage: i })?;
        self.stats.lu_factorizations += 1;
        self.lu.insert(key, lu);
        Ok(())
    }

    fn lu_for(&self, q: usize, i: usize, h: f64) -> &LuFactorization {
        let a = self.tableau.alpha[q][q][(i, i)];
        let g = self.tableau.gamma[q][q][(i, i)];
        &self.lu[&(q, a.to_bits(), g.to_bits(), h.to_bits())]
    }

    pub fn step(&mut self, t: f64, y: &[f64], h: f64) -> Result<StepResult, IntegrateError> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(IntegrateError::Invalid(format!("step size {h}")));
        }
        let problem = self.problem;
        let tab = self.tableau;
        let n = tab.n_partitions();
        let dim = problem.dim;
        if y.len() != dim {
            return Err(IntegrateError::Shape(format!("state has length {}, expected {dim}", y.len())));
        }
        self.refresh_matrices(t, y)?;
        self.stats.steps += 1;

        let group_s: Vec<usize> = self.groups.iter().map(|g| tab.b[g[0]].len()).collect();
        let mut kst: Vec<Vec<Vec<f64>>> = group_s.iter().map(|&s| vec![vec![0.0; dim]; s]).collect();
        let mut kept: Vec<Vec<Vec<f64>>> = if self.opts.keep_stages {
            (0..n).map(|q| vec![vec![0.0; dim]; tab.b[q].len()]).collect()
        } else {
            Vec::new()
        };
        let mut ft: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut arg = vec![0.0; dim];
        let mut gs = vec![0.0; dim];
        let mut fbuf = vec![0.0; dim];
        let ordering = self.ordering.clone();
        let tol = 1e-12 * crate::linalg::norm_inf(y) + 1e-300;

        for (q, i) in ordering {
            if problem.partitions[q].is_zero || h == 0.0 {
                continue;
            }
            arg.copy_from_slice(y);
            gs.fill(0.0);
            let mut has_g = false;
            for (gi, grp) in self.groups.iter().enumerate() {
                let rep = grp[0];
                let a = &tab.alpha[q][rep];
                let g = &tab.gamma[q][rep];
                for j in 0..group_s[gi] {
                    let (aij, gij) = (a[(i, j)], g[(i, j)]);
                    if aij != 0.0 {
                        axpy(aij, &kst[gi][j], &mut arg);
                    }
                    if gij != 0.0 {
                        axpy(gij, &kst[gi][j], &mut gs);
                        has_g = true;
                    }
                }
            }
            let tq = t + h * self.time_c[q][i];

            // fixed part of the stage: h M G + h² g_i f_t
            let mut fixed = vec![0.0; dim];
            if has_g {
                let m = self.frozen[q].as_ref().expect("matrix refreshed");
                m.mul_vec_into(&gs, &mut fbuf);
                axpy(h, &fbuf, &mut fixed);
            }
            if let Some(ftf) = &problem.partitions[q].time_derivative {
                let gi = self.time_g[q][i];
                if gi != 0.0 {
                    if ft[q].is_none() {
                        let mut v = vec![0.0; dim];
                        ftf(t, y, &mut v)?;
                        ft[q] = Some(v);
                    }
                    axpy(h * h * gi, ft[q].as_ref().unwrap(), &mut fixed);
                }
            }

            let k = match self.kinds[q][i] {
                StageKind::Explicit => {
                    problem.eval(q, tq, &arg, &mut fbuf)?;
                    self.stats.f_evals += 1;
                    let mut k = fixed;
                    axpy(h, &fbuf, &mut k);
                    k
                }
                StageKind::Linear => {
                    problem.eval(q, tq, &arg, &mut fbuf)?;
                    self.stats.f_evals += 1;
                    let mut k = fixed;
                    axpy(h, &fbuf, &mut k);
                    let gii = tab.gamma[q][q][(i, i)];
                    self.factor(q, i, gii, h)?;
                    self.lu_for(q, i, h).solve_in_place(&mut k);
                    k
                }
                StageKind::Dirk => {
                    let aii = tab.alpha[q][q][(i, i)];
                    let gii = tab.gamma[q][q][(i, i)];
                    self.factor(q, i, aii + gii, h)?;
                    self.newton_stage(q, i, tq, h, &arg, &fixed, aii, gii, tol)?
                }
            };
            if self.opts.keep_stages {
                kept[q][i].copy_from_slice(&k);
            }
            axpy(1.0, &k, &mut kst[self.group_of[q]][i]);
        }

        let mut y_next = y.to_vec();
        for (gi, grp) in self.groups.iter().enumerate() {
            let b = &tab.b[grp[0]];
            for (j, bj) in b.iter().enumerate() {
                if *bj != 0.0 {
                    axpy(*bj, &kst[gi][j], &mut y_next);
                }
            }
        }
        let error_estimate = tab.bhat.as_ref().map(|bh| {
            let mut e = vec![0.0; dim];
            for (gi, grp) in self.groups.iter().enumerate() {
                let q = grp[0];
                for j in 0..group_s[gi] {
                    let w = tab.b[q][j] - bh[q][j];
                    if w != 0.0 {
                        axpy(w, &kst[gi][j], &mut e);
                    }
                }
            }
            e
        });
        Ok(StepResult {
            y_next,
            error_estimate,
            stages: self.opts.keep_stages.then_some(kept),
        })
    }

    /// Simplified Newton on k − h f(t, arg + a k) − h M (γ k) − fixed = 0.
    #[allow(clippy::too_many_arguments)]
    fn newton_stage(
        &mut self,
        q: usize,
        i: usize,
        tq: f64,
        h: f64,
        arg: &[f64],
        fixed: &[f64],
        aii: f64,
        gii: f64,
        tol: f64,
    ) -> Result<Vec<f64>, IntegrateError> {
        let dim = self.problem.dim;
        let mut k = vec![0.0; dim];
        let mut x = arg.to_vec();
        let mut f = vec![0.0; dim];
        let mut mk = vec![0.0; dim];
        for _ in 0..25 {
            self.problem.eval(q, tq, &x, &mut f)?;
            self.stats.f_evals += 1;
            self.stats.newton_iterations += 1;
            // residual r = h f + h γ M k + fixed − k; the update solves W dk = r
            let mut r = fixed.to_vec();
            axpy(h, &f, &mut r);
            if gii != 0.0 {
                self.frozen[q].as_ref().unwrap().mul_vec_into(&k, &mut mk);
                axpy(h * gii, &mk, &mut r);
            }
            axpy(-1.0, &k, &mut r);
            self.lu_for(q, i, h).solve_in_place(&mut r);
            axpy(1.0, &r, &mut k);
            let step = crate::linalg::norm_inf(&r);
            if !step.is_finite() {
                break;
            }
            x.copy_from_slice(arg);
            axpy(aii, &k, &mut x);
            if step <= tol {
                return Ok(k);
            }
        }
        Err(IntegrateError::NewtonDivergence { partition: q, stage: i })
    }
}

/// One step with the generic per-partition stage storage.
pub fn step(problem: &OdeProblem, method: &MethodCard, t: f64, y: &[f64], h: f64) -> Result<StepResult, IntegrateError> {
    Stepper::new(problem, &method.tableau, StepOptions::default())?.step(t, y, h)
}

/// One step with summed stages for partitions sharing columns and weights.
pub fn step_imex_fast(
    problem: &OdeProblem,
    method: &MethodCard,
    t: f64,
    y: &[f64],
    h: f64,
) -> Result<StepResult, IntegrateError> {
    Stepper::new_combined(problem, &method.tableau, StepOptions::default())?.step(t, y, h)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(|v| v.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",y{i}"));
        }
        out.push('\n');
        for (t, y) in self.times.iter().zip(&self.states) {
            out.push_str(&fmt17(*t));
            for v in y {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Seventeen significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `n_steps` equal steps from `t0` landing exactly on `tf`.
pub fn integrate_fixed(
    problem: &OdeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    n_steps: usize,
) -> Result<Trajectory, IntegrateError> {
    integrate_fixed_with(problem, method, t0, tf, &problem.y0, n_steps, StepOptions::default(), true)
        .map(|(tr, _)| tr)
}

/// Fixed-step loop with options; `record` keeps every state, otherwise only the endpoints.
#[allow(clippy::too_many_arguments)]
pub fn integrate_fixed_with(
    problem: &OdeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    y0: &[f64],
    n_steps: usize,
    opts: StepOptions,
    record: bool,
) -> Result<(Trajectory, StepStats), IntegrateError> {
    if n_steps == 0 {
        return Err(IntegrateError::Invalid("n_steps must be at least 1".into()));
    }
    let combined = !method.tableau.combined_stage_groups().iter().all(|g| g.len() < 2);
    let mut stepper = if combined {
        Stepper::new_combined(problem, &method.tableau, opts)?
    } else {
        Stepper::new(problem, &method.tableau, opts)?
    };
    let h = (tf - t0) / n_steps as f64;
    let mut y = y0.to_vec();
    let mut tr = Trajectory {
        times: vec![t0],
        states: vec![y.clone()],
    };
    for n in 0..n_steps {
        let t = t0 + n as f64 * h;
        let hn = if n + 1 == n_steps { tf - t } else { h };
        // a constant h keeps cached factorizations valid; the last step only differs by rounding
        let hn = if (hn - h).abs() <= 1e-12 * h.abs() { h } else { hn };
        y = stepper.step(t, &y, hn)?.y_next;
        if record || n + 1 == n_steps {
            tr.times.push(if n + 1 == n_steps { tf } else { t + hn });
            tr.states.push(y.clone());
        }
    }
    let mut stats = stepper.stats;
    stats.accepted = stats.steps;
    Ok((tr, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    pub atol: f64,
    pub rtol: f64,
    pub safety: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Exponent denominator; defaults to min(order, embedded order) + 1.
    pub order: Option<u32>,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            atol: 1e-6,
            rtol: 1e-6,
            safety: 0.9,
            ratio_min: 0.2,
            ratio_max: 5.0,
            order: None,
            h_init: None,
            max_steps: 1_000_000,
        }
    }
}

impl StepController {
    pub fn with_tolerances(atol: f64, rtol: f64) -> Self {
        Self {
            atol,
            rtol,
            ..Self::default()
        }
    }

    /// Scaled RMS norm of an error estimate.
    pub fn error_norm(&self, err: &[f64], y_old: &[f64], y_new: &[f64]) -> f64 {
        if err.is_empty() {
            return 0.0;
        }
        let s: f64 = err
            .iter()
            .zip(y_old.iter().zip(y_new))
            .map(|(e, (a, b))| {
                let sc = self.atol + self.rtol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (s / err.len() as f64).sqrt()
    }

    /// Step-size factor for a given error norm, clamped to the ratio bounds.
    pub fn factor(&self, err: f64, order: u32) -> f64 {
        let raw = if err == 0.0 {
            self.ratio_max
        } else {
            self.safety * err.powf(-1.0 / order as f64)
        };
        raw.clamp(self.ratio_min, self.ratio_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveResult {
    pub trajectory: Trajectory,
    pub stats: StepStats,
}

/// Accept/reject loop driven by the embedded estimate, or by step doubling
/// when the method has no embedded weights.
pub fn integrate_adaptive(
    problem: &OdeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    y0: &[f64],
    ctrl: &StepController,
) -> Result<AdaptiveResult, IntegrateError> {
    let tab = &method.tableau;
    let p = tab.claimed_order;
    let embedded = tab.has_embedded();
    let order = ctrl.order.unwrap_or(if embedded {
        p.min(tab.claimed_embedded_order.unwrap_or(p.saturating_sub(1))) + 1
    } else {
        p + 1
    });
    let mut stepper = Stepper::new(problem, tab, StepOptions::default())?;
    let span = tf - t0;
    let mut h = ctrl.h_init.unwrap_or(span * 1e-3);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut tr = Trajectory {
        times: vec![t0],
        states: vec![y.clone()],
    };
    let mut rejected = 0;
    let mut accepted = 0;
    while t < tf {
        if accepted + rejected >= ctrl.max_steps {
            return Err(IntegrateError::Invalid(format!("exceeded {} steps", ctrl.max_steps)));
        }
        if h < 1e-14 * span {
            return Err(IntegrateError::StepSizeUnderflow { t, h });
        }
        let last = t + h >= tf - 1e-14 * span;
        let hs = if last { tf - t } else { h };
        let attempt = if embedded {
            stepper.step(t, &y, hs).map(|r| {
                let e = r.error_estimate.expect("embedded weights");
                (r.y_next, e)
            })
        } else {
            stepper.step(t, &y, hs).and_then(|full| {
                let half = stepper.step(t, &y, hs / 2.0)?;
                let two = stepper.step(t + hs / 2.0, &half.y_next, hs / 2.0)?;
                let scale = 2f64.powi(p as i32) - 1.0;
                let e: Vec<f64> = two.y_next.iter().zip(&full.y_next).map(|(a, b)| (a - b) / scale).collect();
                Ok((two.y_next, e))
            })
        };
        let (y_new, err) = match attempt {
            Ok((yn, e)) => {
                let en = ctrl.error_norm(&e, &y, &yn);
                (yn, en)
            }
            // evaluation failures at a too-large step count as rejections
            Err(IntegrateError::Eval(_)) | Err(IntegrateError::NewtonDivergence { .. }) => (y.clone(), f64::INFINITY),
            Err(e) => return Err(e),
        };
        if err.is_finite() && err <= 1.0 {
            t = if last { tf } else { t + hs };
            y = y_new;
            accepted += 1;
            tr.times.push(t);
            tr.states.push(y.clone());
            h = hs * ctrl.factor(err, order);
        } else {
            rejected += 1;
            let f = if err.is_finite() { ctrl.factor(err, order).min(1.0) } else { ctrl.ratio_min };
            h = hs * f;
        }
    }
    let mut stats = stepper.stats;
    stats.accepted = accepted;
    stats.rejected = rejected;
    Ok(AdaptiveResult { trajectory: tr, stats })
}
