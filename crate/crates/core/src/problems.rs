//! Benchmark and analytic test problems.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::integrator_dae::{DaeFn, DaeJacFn, DaeJacobians, DaeProblem};
use crate::integrator_ode::{EvalError, JacFn, OdeProblem, Partition, RhsFn};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrusselatorConfig {
    pub interior_points: usize,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub t_span: (f64, f64),
}

impl Default for BrusselatorConfig {
    fn default() -> Self {
        Self {
            interior_points: 100,
            a: 1.0,
            b: 3.0,
            alpha: 1.0 / 50.0,
            t_span: (0.0, 10.0),
        }
    }
}

impl BrusselatorConfig {
    pub fn dx(&self) -> f64 {
        1.0 / (self.interior_points + 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let dx = self.dx();
        (1..=self.interior_points).map(|i| i as f64 * dx).collect()
    }
}

/// Reaction-diffusion system on [0, 1]; partition 1 holds the reaction terms,
/// partition 2 the discretized diffusion with its (constant) Jacobian.
///
/// State layout: u_1..u_N followed by v_1..v_N.
pub fn brusselator(cfg: &BrusselatorConfig) -> OdeProblem {
    assert!(cfg.interior_points >= 3, "need at least three interior points");
    let n = cfg.interior_points;
    let (a, b) = (cfg.a, cfg.b);
    let reaction: RhsFn = Arc::new(move |_, y: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let (u, v) = (y[i], y[n + i]);
            let uuv = u * u * v;
            out[i] = a + uuv - (b + 1.0) * u;
            out[n + i] = b * u - uuv;
        }
        Ok(())
    });
    let reaction_jac: JacFn = Arc::new(move |_, y: &[f64], m: &mut Matrix| {
        *m = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let (u, v) = (y[i], y[n + i]);
            m[(i, i)] = 2.0 * u * v - (b + 1.0);
            m[(i, n + i)] = u * u;
            m[(n + i, i)] = b - 2.0 * u * v;
            m[(n + i, n + i)] = -u * u;
        }
        Ok(())
    });
    let k = cfg.alpha / (cfg.dx() * cfg.dx());
    let (ub, vb) = (1.0, 3.0);
    let diffusion: RhsFn = Arc::new(move |_, y: &[f64], out: &mut [f64]| {
        for (off, bc) in [(0, ub), (n, vb)] {
            for i in 0..n {
                let left = if i == 0 { bc } else { y[off + i - 1] };
                let right = if i + 1 == n { bc } else { y[off + i + 1] };
                out[off + i] = k * (left - 2.0 * y[off + i] + right);
            }
        }
        Ok(())
    });
    let lap = laplacian_block(n, k);
    let diffusion_jac: JacFn = Arc::new(move |_, _, m: &mut Matrix| {
        *m = lap.clone();
        Ok(())
    });
    let y0: Vec<f64> = cfg
        .grid()
        .iter()
        .map(|x| 1.0 + (2.0 * PI * x).sin())
        .chain(std::iter::repeat_n(3.0, n))
        .collect();
    OdeProblem::new(
        "brusselator",
        vec![
            Partition::new(reaction).with_jacobian(reaction_jac),
            Partition::new(diffusion).with_jacobian(diffusion_jac).constant(),
        ],
        y0,
        cfg.t_span,
    )
}

/// Block-diagonal tridiagonal stencil k·(1, −2, 1) for u and v.
pub fn laplacian_block(n: usize, k: f64) -> Matrix {
    let mut m = Matrix::zeros(2 * n, 2 * n);
    for off in [0, n] {
        for i in 0..n {
            m[(off + i, off + i)] = -2.0 * k;
            if i > 0 {
                m[(off + i, off + i - 1)] = k;
            }
            if i + 1 < n {
                m[(off + i, off + i + 1)] = k;
            }
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZlaConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub big_k: f64,
    pub kla: f64,
    pub ks: f64,
    pub p_co2: f64,
    pub h: f64,
    pub t_span: (f64, f64),
    /// y1..y5; y6 follows from the constraint.
    pub x0: [f64; 5],
}

impl Default for ZlaConfig {
    fn default() -> Self {
        Self {
            k1: 18.7,
            k2: 0.58,
            k3: 0.09,
            k4: 0.42,
            big_k: 34.4,
            kla: 3.3,
            ks: 115.83,
            p_co2: 0.9,
            h: 737.0,
            t_span: (0.0, 180.0),
            x0: [0.444, 0.00123, 0.0, 0.007, 0.0],
        }
    }
}

impl ZlaConfig {
    pub fn f_in(&self, y2: f64) -> f64 {
        self.kla * (self.p_co2 / self.h - y2)
    }

    pub fn y6_initial(&self) -> f64 {
        self.ks * self.x0[0] * self.x0[3]
    }
}

fn sqrt_y2(y2: f64) -> Result<f64, EvalError> {
    if y2 <= 0.0 || !y2.is_finite() {
        return Err(EvalError::Domain(format!("y2 = {y2} must be positive")));
    }
    Ok(y2.sqrt())
}

/// Reaction rates r1..r5 and their derivatives with respect to y1..y6.
fn zla_rates(c: &ZlaConfig, x: &[f64], y6: f64) -> Result<([f64; 5], [[f64; 6]; 5]), EvalError> {
    let (y1, y2, y3, y4, y5) = (x[0], x[1], x[2], x[3], x[4]);
    let s = sqrt_y2(y2)?;
    let kk = c.k2 / c.big_k;
    let r = [
        c.k1 * y1.powi(4) * s,
        c.k2 * y3 * y4,
        kk * y1 * y5,
        c.k3 * y1 * y4 * y4,
        c.k4 * y6 * y6 * s,
    ];
    let mut d = [[0.0; 6]; 5];
    d[0][0] = 4.0 * c.k1 * y1.powi(3) * s;
    d[0][1] = c.k1 * y1.powi(4) / (2.0 * s);
    d[1][2] = c.k2 * y4;
    d[1][3] = c.k2 * y3;
    d[2][0] = kk * y5;
    d[2][4] = kk * y1;
    d[3][0] = c.k3 * y4 * y4;
    d[3][3] = 2.0 * c.k3 * y1 * y4;
    d[4][1] = c.k4 * y6 * y6 / (2.0 * s);
    d[4][5] = 2.0 * c.k4 * y6 * s;
    Ok((r, d))
}

/// Coefficients of r1..r5 in y1'..y5'.
const ZLA_STOICH: [[f64; 5]; 5] = [
    [-2.0, 1.0, -1.0, -1.0, 0.0],
    [-0.5, 0.0, 0.0, -1.0, -0.5],
    [1.0, -1.0, 1.0, 0.0, 0.0],
    [0.0, -1.0, 1.0, -2.0, 0.0],
    [0.0, 1.0, -1.0, 0.0, 1.0],
];

pub fn zla() -> DaeProblem {
    zla_with(&ZlaConfig::default())
}

/// Five kinetic equations in y1..y5 with the constraint 0 = Ks·y1·y4 − y6.
pub fn zla_with(cfg: &ZlaConfig) -> DaeProblem {
    let c = cfg.clone();
    let f: DaeFn = Arc::new(move |x: &[f64], z: &[f64], out: &mut [f64]| {
        let (r, _) = zla_rates(&c, x, z[0])?;
        for (row, o) in ZLA_STOICH.iter().zip(out.iter_mut()) {
            *o = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
        out[1] += c.f_in(x[1]);
        Ok(())
    });
    let ks = cfg.ks;
    let g: DaeFn = Arc::new(move |x: &[f64], z: &[f64], out: &mut [f64]| {
        out[0] = ks * x[0] * x[3] - z[0];
        Ok(())
    });
    let c = cfg.clone();
    let fx: DaeJacFn = Arc::new(move |x: &[f64], z: &[f64], m: &mut Matrix| {
        let (_, d) = zla_rates(&c, x, z[0])?;
        for i in 0..5 {
            for j in 0..5 {
                m[(i, j)] = (0..5).map(|k| ZLA_STOICH[i][k] * d[k][j]).sum();
            }
        }
        m[(1, 1)] -= c.kla;
        Ok(())
    });
    let c = cfg.clone();
    let fz: DaeJacFn = Arc::new(move |x: &[f64], z: &[f64], m: &mut Matrix| {
        let (_, d) = zla_rates(&c, x, z[0])?;
        for i in 0..5 {
            m[(i, 0)] = (0..5).map(|k| ZLA_STOICH[i][k] * d[k][5]).sum();
        }
        Ok(())
    });
    let gx: DaeJacFn = Arc::new(move |x: &[f64], _, m: &mut Matrix| {
        *m = Matrix::zeros(1, 5);
        m[(0, 0)] = ks * x[3];
        m[(0, 3)] = ks * x[0];
        Ok(())
    });
    let gz: DaeJacFn = Arc::new(|_, _, m: &mut Matrix| {
        m[(0, 0)] = -1.0;
        Ok(())
    });
    DaeProblem {
        name: "zla".into(),
        dx: 5,
        dz: 1,
        f,
        g,
        jacobians: Some(DaeJacobians { fx, fz, gx, gz }),
        x0: cfg.x0.to_vec(),
        z0: vec![cfg.y6_initial()],
        t_span: cfg.t_span,
    }
}

/// y' = Σ λ^{m} y on a complex scalar stored as (Re y, Im y).
pub fn dahlquist_split(lambdas: &[Complex64]) -> OdeProblem {
    let partitions = lambdas
        .iter()
        .map(|&l| {
            let rhs: RhsFn = Arc::new(move |_, y: &[f64], out: &mut [f64]| {
                out[0] = l.re * y[0] - l.im * y[1];
                out[1] = l.im * y[0] + l.re * y[1];
                Ok(())
            });
            let jac: JacFn = Arc::new(move |_, _, m: &mut Matrix| {
                *m = Matrix::from_rows(&[vec![l.re, -l.im], vec![l.im, l.re]]);
                Ok(())
            });
            Partition::new(rhs).with_jacobian(jac).constant()
        })
        .collect();
    OdeProblem::new("dahlquist", partitions, vec![1.0, 0.0], (0.0, 1.0))
}

/// y' = y − y² split as f¹ = y, f² = −y².
pub fn logistic_split(y0: f64) -> OdeProblem {
    let lin: RhsFn = Arc::new(|_, y: &[f64], out: &mut [f64]| {
        out[0] = y[0];
        Ok(())
    });
    let lin_jac: JacFn = Arc::new(|_, _, m: &mut Matrix| {
        m[(0, 0)] = 1.0;
        Ok(())
    });
    let quad: RhsFn = Arc::new(|_, y: &[f64], out: &mut [f64]| {
        out[0] = -y[0] * y[0];
        Ok(())
    });
    let quad_jac: JacFn = Arc::new(|_, y: &[f64], m: &mut Matrix| {
        m[(0, 0)] = -2.0 * y[0];
        Ok(())
    });
    OdeProblem::new(
        "logistic",
        vec![
            Partition::new(lin).with_jacobian(lin_jac).constant(),
            Partition::new(quad).with_jacobian(quad_jac),
        ],
        vec![y0],
        (0.0, 1.0),
    )
}

pub fn logistic_exact(y0: f64, t: f64) -> f64 {
    let e = t.exp();
    y0 * e / (1.0 - y0 + y0 * e)
}
