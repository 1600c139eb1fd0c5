//! Semi-explicit index-1 DAEs x' = f(x, z), 0 = g(x, z) with the algebraic
//! stages taken in their linearly implicit ε → 0 limit.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::integrator_ode::{fd_jacobian_rect, fmt17, EvalError, StepController, StepStats};
use crate::linalg::{axpy, lu_factor, norm2, norm_inf, LuFactorization, Matrix};
use crate::methods::MethodCard;
use crate::tableau::PartitionedTableau;

#[derive(Debug, Error)]
pub enum DaeError {
    #[error("g_z is singular at the current state")]
    SingularGz,
    #[error("singular differential stage matrix at stage {0}")]
    SingularStageMatrix(usize),
    #[error("Newton iteration for the constraint did not converge")]
    NewtonDivergence,
    #[error("unsupported method structure: {0}")]
    Unsupported(String),
    #[error("method is not decoupled: {0}")]
    NotDecoupled(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("step size underflow at t = {t}: h = {h:e}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type DaeFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync>;
pub type DaeJacFn = Arc<dyn Fn(&[f64], &[f64], &mut Matrix) -> Result<(), EvalError> + Send + Sync>;

#[derive(Clone)]
pub struct DaeJacobians {
    pub fx: DaeJacFn,
    pub fz: DaeJacFn,
    pub gx: DaeJacFn,
    pub gz: DaeJacFn,
}

/// The four sub-Jacobians evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    pub fx: Matrix,
    pub fz: Matrix,
    pub gx: Matrix,
    pub gz: Matrix,
}

#[derive(Clone)]
pub struct DaeProblem {
    pub name: String,
    pub dx: usize,
    pub dz: usize,
    pub f: DaeFn,
    pub g: DaeFn,
    pub jacobians: Option<DaeJacobians>,
    pub x0: Vec<f64>,
    pub z0: Vec<f64>,
    pub t_span: (f64, f64),
}

impl std::fmt::Debug for DaeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DaeProblem")
            .field("name", &self.name)
            .field("dx", &self.dx)
            .field("dz", &self.dz)
            .field("t_span", &self.t_span)
            .finish()
    }
}

impl DaeProblem {
    pub fn eval_f(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.dx];
        (self.f)(x, z, &mut out)?;
        check_finite(&out, "f")?;
        Ok(out)
    }

    pub fn eval_g(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut out = vec![0.0; self.dz];
        (self.g)(x, z, &mut out)?;
        check_finite(&out, "g")?;
        Ok(out)
    }

    pub fn analytic_jacobians(&self, x: &[f64], z: &[f64]) -> Option<Result<JacobianBlocks, EvalError>> {
        self.jacobians.as_ref().map(|j| {
            let mut b = JacobianBlocks {
                fx: Matrix::zeros(self.dx, self.dx),
                fz: Matrix::zeros(self.dx, self.dz),
                gx: Matrix::zeros(self.dz, self.dx),
                gz: Matrix::zeros(self.dz, self.dz),
            };
            (j.fx)(x, z, &mut b.fx)?;
            (j.fz)(x, z, &mut b.fz)?;
            (j.gx)(x, z, &mut b.gx)?;
            (j.gz)(x, z, &mut b.gz)?;
            Ok(b)
        })
    }

    pub fn fd_jacobians(&self, x: &[f64], z: &[f64]) -> Result<JacobianBlocks, EvalError> {
        Ok(JacobianBlocks {
            fx: fd_jacobian_rect(self.dx, |xx, out| (self.f)(xx, z, out), x)?,
            fz: fd_jacobian_rect(self.dx, |zz, out| (self.f)(x, zz, out), z)?,
            gx: fd_jacobian_rect(self.dz, |xx, out| (self.g)(xx, z, out), x)?,
            gz: fd_jacobian_rect(self.dz, |zz, out| (self.g)(x, zz, out), z)?,
        })
    }

    pub fn jacobian_blocks(&self, x: &[f64], z: &[f64]) -> Result<JacobianBlocks, EvalError> {
        match self.analytic_jacobians(x, z) {
            Some(j) => j,
            None => self.fd_jacobians(x, z),
        }
    }

    pub fn initial_state(&self) -> Result<DaeState, EvalError> {
        DaeState::new(self, self.x0.clone(), self.z0.clone())
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<(), EvalError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EvalError::Other(format!("non-finite value in {what}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DaeState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub constraint_residual: f64,
}

impl DaeState {
    pub fn new(problem: &DaeProblem, x: Vec<f64>, z: Vec<f64>) -> Result<Self, EvalError> {
        let r = norm2(&problem.eval_g(&x, &z)?);
        Ok(Self {
            x,
            z,
            constraint_residual: r,
        })
    }

    pub fn is_consistent(&self, tol: f64) -> bool {
        self.constraint_residual <= tol
    }

    /// x followed by z.
    pub fn stacked(&self) -> Vec<f64> {
        self.x.iter().chain(&self.z).copied().collect()
    }
}

pub const INCONSISTENCY_WARNING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DaeStepResult {
    pub state: DaeState,
    /// Stacked (x, z) error estimate from the embedded weights.
    pub error_estimate: Option<Vec<f64>>,
    /// The entry state violated the constraint by more than [`INCONSISTENCY_WARNING`].
    pub inconsistent_entry: bool,
}

const DIFF: usize = 0;
const ALG: usize = 1;

/// Reusable DAE stepper; the differential partition is 1 and the algebraic 2.
pub struct DaeStepper<'a> {
    problem: &'a DaeProblem,
    tableau: &'a PartitionedTableau,
    ordering: Vec<(usize, usize)>,
    needs_fx: bool,
    pub stats: StepStats,
}

impl<'a> DaeStepper<'a> {
    pub fn new(problem: &'a DaeProblem, tableau: &'a PartitionedTableau) -> Result<Self, DaeError> {
        if tableau.n_partitions() != 2 {
            return Err(DaeError::Shape(format!(
                "DAE stepping needs a two-partition method, got {}",
                tableau.n_partitions()
            )));
        }
        let sd = tableau.b[DIFF].len();
        let sa = tableau.b[ALG].len();
        for i in 0..sd {
            if tableau.alpha[DIFF][DIFF][(i, i)] != 0.0 {
                return Err(DaeError::Unsupported("diagonally implicit differential stages".into()));
            }
        }
        for i in 0..sa {
            if tableau.alpha[ALG][ALG][(i, i)] != 0.0 {
                return Err(DaeError::Unsupported("nonzero alpha diagonal in the algebraic partition".into()));
            }
            if tableau.gamma[ALG][ALG][(i, i)] == 0.0 {
                return Err(DaeError::Unsupported(format!("algebraic stage {} has zero gamma diagonal", i + 1)));
            }
        }
        let ordering = tableau
            .decoupled_ordering()
            .map_err(|e| DaeError::NotDecoupled(e.to_string()))?;
        let needs_fx = tableau.gamma[DIFF].iter().any(|g| g.max_abs() != 0.0);
        Ok(Self {
            problem,
            tableau,
            ordering,
            needs_fx,
            stats: StepStats::default(),
        })
    }

    pub fn step(&mut self, state: &DaeState, h: f64) -> Result<DaeStepResult, DaeError> {
        if !(h >= 0.0) || !h.is_finite() {
            return Err(DaeError::Invalid(format!("step size {h}")));
        }
        let p = self.problem;
        let t = self.tableau;
        let (dx, dz) = (p.dx, p.dz);
        if state.x.len() != dx || state.z.len() != dz {
            return Err(DaeError::Shape("state does not match problem dimensions".into()));
        }
        let g0 = p.eval_g(&state.x, &state.z)?;
        let inconsistent_entry = norm2(&g0) > INCONSISTENCY_WARNING;
        if h == 0.0 {
            return Ok(DaeStepResult {
                state: state.clone(),
                error_estimate: t.bhat.as_ref().map(|_| vec![0.0; dx + dz]),
                inconsistent_entry,
            });
        }
        self.stats.steps += 1;
        let jac = p.jacobian_blocks(&state.x, &state.z)?;
        self.stats.jac_evals += 1;
        let gz_lu: LuFactorization = lu_factor(&jac.gz).map_err(|_| DaeError::SingularGz)?;
        self.stats.lu_factorizations += 1;

        let sd = t.b[DIFF].len();
        let sa = t.b[ALG].len();
        let mut k = vec![vec![0.0; dx]; sd];
        let mut l = vec![vec![0.0; dz]; sa];
        let mut diff_lu: Vec<Option<LuFactorization>> = vec![None; sd];

        for &(q, i) in &self.ordering {
            let mut xs = state.x.clone();
            let mut zs = state.z.clone();
            let mut gk = vec![0.0; dx];
            let mut gl = vec![0.0; dz];
            for j in 0..sd {
                let a = t.alpha[q][DIFF][(i, j)];
                if a != 0.0 {
                    axpy(a, &k[j], &mut xs);
                }
                let g = t.gamma[q][DIFF][(i, j)];
                if g != 0.0 && !(q == DIFF && j == i) {
                    axpy(g, &k[j], &mut gk);
                }
            }
            for j in 0..sa {
                let a = t.alpha[q][ALG][(i, j)];
                if a != 0.0 {
                    axpy(a, &l[j], &mut zs);
                }
                let g = t.gamma[q][ALG][(i, j)];
                if g != 0.0 && !(q == ALG && j == i) {
                    axpy(g, &l[j], &mut gl);
                }
            }
            if q == DIFF {
                let mut ki = p.eval_f(&xs, &zs)?;
                self.stats.f_evals += 1;
                for v in ki.iter_mut() {
                    *v *= h;
                }
                if self.needs_fx {
                    axpy(h, &jac.fx.mul_vec(&gk), &mut ki);
                    axpy(h, &jac.fz.mul_vec(&gl), &mut ki);
                }
                let gii = t.gamma[DIFF][DIFF][(i, i)];
                if gii != 0.0 {
                    let w = Matrix::from_fn(dx, dx, |r, c| if r == c { 1.0 } else { 0.0 } - h * gii * jac.fx[(r, c)]);
                    let lu = lu_factor(&w).map_err(|_| DaeError::SingularStageMatrix(i))?;
                    self.stats.lu_factorizations += 1;
                    lu.solve_in_place(&mut ki);
                    diff_lu[i] = Some(lu);
                }
                k[i] = ki;
            } else {
                // γ_ii g_z ℓ_i = −g(X, Z) − g_x Σ γ^{a,d} k − g_z Σ_{j≠i} γ^{a,a} ℓ_j
                let mut rhs = p.eval_g(&xs, &zs)?;
                self.stats.f_evals += 1;
                axpy(1.0, &jac.gx.mul_vec(&gk), &mut rhs);
                axpy(1.0, &jac.gz.mul_vec(&gl), &mut rhs);
                for v in rhs.iter_mut() {
                    *v = -*v;
                }
                gz_lu.solve_in_place(&mut rhs);
                let gii = t.gamma[ALG][ALG][(i, i)];
                for v in rhs.iter_mut() {
                    *v /= gii;
                }
                l[i] = rhs;
            }
        }

        let mut x = state.x.clone();
        let mut z = state.z.clone();
        for (j, b) in t.b[DIFF].iter().enumerate() {
            axpy(*b, &k[j], &mut x);
        }
        for (j, b) in t.b[ALG].iter().enumerate() {
            axpy(*b, &l[j], &mut z);
        }
        let error_estimate = t.bhat.as_ref().map(|bh| {
            let mut ex = vec![0.0; dx];
            let mut ez = vec![0.0; dz];
            for j in 0..sd {
                axpy(t.b[DIFF][j] - bh[DIFF][j], &k[j], &mut ex);
            }
            for j in 0..sa {
                axpy(t.b[ALG][j] - bh[ALG][j], &l[j], &mut ez);
            }
            ex.extend(ez);
            ex
        });
        let state = DaeState::new(p, x, z)?;
        Ok(DaeStepResult {
            state,
            error_estimate,
            inconsistent_entry,
        })
    }
}

pub fn step_dae(problem: &DaeProblem, method: &MethodCard, state: &DaeState, h: f64) -> Result<DaeStepResult, DaeError> {
    DaeStepper::new(problem, &method.tableau)?.step(state, h)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DaeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DaeState>,
}

impl DaeTrajectory {
    pub fn last(&self) -> Option<&DaeState> {
        self.states.last()
    }

    /// Columns `t,y0..y{d-1},g_norm` with x before z.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.x.len() + s.z.len());
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",y{i}"));
        }
        out.push_str(",g_norm\n");
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&fmt17(*t));
            for v in s.x.iter().chain(&s.z) {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push(',');
            out.push_str(&fmt17(s.constraint_residual));
            out.push('\n');
        }
        out
    }
}

pub fn integrate_dae_fixed(
    problem: &DaeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    n_steps: usize,
    state0: &DaeState,
) -> Result<DaeTrajectory, DaeError> {
    integrate_dae_fixed_with(problem, method, t0, tf, n_steps, state0, true).map(|(tr, _)| tr)
}

pub fn integrate_dae_fixed_with(
    problem: &DaeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    n_steps: usize,
    state0: &DaeState,
    record: bool,
) -> Result<(DaeTrajectory, StepStats), DaeError> {
    if n_steps == 0 {
        return Err(DaeError::Invalid("n_steps must be at least 1".into()));
    }
    let mut stepper = DaeStepper::new(problem, &method.tableau)?;
    let h = (tf - t0) / n_steps as f64;
    let mut s = state0.clone();
    let mut tr = DaeTrajectory {
        times: vec![t0],
        states: vec![s.clone()],
    };
    for n in 0..n_steps {
        let t = t0 + n as f64 * h;
        let hn = if n + 1 == n_steps { tf - t } else { h };
        s = stepper.step(&s, hn)?.state;
        if record || n + 1 == n_steps {
            tr.times.push(if n + 1 == n_steps { tf } else { t + hn });
            tr.states.push(s.clone());
        }
    }
    let mut stats = stepper.stats;
    stats.accepted = stats.steps;
    Ok((tr, stats))
}

/// Adaptive loop on the stacked (x, z) embedded estimate.
pub fn integrate_dae_adaptive(
    problem: &DaeProblem,
    method: &MethodCard,
    t0: f64,
    tf: f64,
    state0: &DaeState,
    ctrl: &StepController,
) -> Result<(DaeTrajectory, StepStats), DaeError> {
    let tab = &method.tableau;
    if !tab.has_embedded() {
        return Err(DaeError::Invalid(format!("{} has no embedded weights", tab.name)));
    }
    let p = tab.claimed_order;
    let order = ctrl
        .order
        .unwrap_or(p.min(tab.claimed_embedded_order.unwrap_or(p.saturating_sub(1))) + 1);
    let mut stepper = DaeStepper::new(problem, tab)?;
    let span = tf - t0;
    let mut h = ctrl.h_init.unwrap_or(span * 1e-3);
    let mut t = t0;
    let mut s = state0.clone();
    let mut tr = DaeTrajectory {
        times: vec![t0],
        states: vec![s.clone()],
    };
    let (mut acc, mut rej) = (0, 0);
    while t < tf {
        if acc + rej >= ctrl.max_steps {
            return Err(DaeError::Invalid(format!("exceeded {} steps", ctrl.max_steps)));
        }
        if h < 1e-14 * span {
            return Err(DaeError::StepSizeUnderflow { t, h });
        }
        let last = t + h >= tf - 1e-14 * span;
        let hs = if last { tf - t } else { h };
        let err = match stepper.step(&s, hs) {
            Ok(r) => {
                let e = r.error_estimate.expect("embedded weights");
                let en = ctrl.error_norm(&e, &s.stacked(), &r.state.stacked());
                Some((r.state, en))
            }
            Err(DaeError::Eval(_)) => None,
            Err(e) => return Err(e),
        };
        match err {
            Some((ns, en)) if en <= 1.0 => {
                t = if last { tf } else { t + hs };
                s = ns;
                acc += 1;
                tr.times.push(t);
                tr.states.push(s.clone());
                h = hs * ctrl.factor(en, order);
            }
            Some((_, en)) if en.is_finite() => {
                rej += 1;
                h = hs * ctrl.factor(en, order).min(1.0);
            }
            _ => {
                rej += 1;
                h = hs * ctrl.ratio_min;
            }
        }
    }
    let mut stats = stepper.stats;
    stats.accepted = acc;
    stats.rejected = rej;
    Ok((tr, stats))
}

/// Newton solve of g(x, z) = 0 for z, to ‖g‖₂ ≤ 1e-12.
pub fn make_consistent(problem: &DaeProblem, x: &[f64], z_guess: &[f64]) -> Result<Vec<f64>, DaeError> {
    let mut z = z_guess.to_vec();
    for _ in 0..50 {
        let mut r = problem.eval_g(x, &z)?;
        if norm2(&r) <= 1e-12 {
            return Ok(z);
        }
        let gz = problem.jacobian_blocks(x, &z)?.gz;
        let lu = lu_factor(&gz).map_err(|_| DaeError::SingularGz)?;
        lu.solve_in_place(&mut r);
        axpy(-1.0, &r, &mut z);
        if norm_inf(&z).is_nan() {
            break;
        }
    }
    Err(DaeError::NewtonDivergence)
}
