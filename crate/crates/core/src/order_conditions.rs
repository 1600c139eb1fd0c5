//! Coefficient-level order-condition residuals up to order four.
//!
//! Conditions are evaluated over every index combination; `×` is the
//! elementwise product and `c^{×2}` an elementwise square.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{dot, hadamard, LinalgError, Matrix};
use crate::tableau::{DerivedVectors, MethodClass, PartitionedTableau};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
/// Looser bound for coefficient sets built from a computed polynomial root.
pub const ROOT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OrderError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("structure mismatch: {0}")]
    StructureMismatch(String),
    #[error("singular algebraic block: {0}")]
    Singular(#[from] LinalgError),
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConditionEntry {
    pub id: String,
    /// One-based partition indices.
    pub indices: Vec<usize>,
    pub lhs: f64,
    pub target: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Default for ConditionReport {
    fn default() -> Self {
        Self::new(DEFAULT_TOLERANCE)
    }
}

impl ConditionReport {
    pub fn new(tolerance: f64) -> Self {
        Self {
            entries: Vec::new(),
            max_residual: 0.0,
            tolerance,
            pass: true,
        }
    }

    pub fn push(&mut self, id: &str, indices: &[usize], lhs: f64, target: f64) {
        let residual = if lhs.is_finite() { (lhs - target).abs() } else { f64::INFINITY };
        self.entries.push(ConditionEntry {
            id: id.to_string(),
            indices: indices.iter().map(|i| i + 1).collect(),
            lhs,
            target,
            residual,
        });
        self.max_residual = self.max_residual.max(residual);
        self.pass = self.max_residual <= self.tolerance;
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.max_residual <= tolerance;
        self
    }

    /// Appends all entries of `other`, keeping this report's tolerance.
    pub fn merge(&mut self, other: ConditionReport) {
        for e in other.entries {
            self.max_residual = self.max_residual.max(e.residual);
            self.entries.push(e);
        }
        self.pass = self.max_residual <= self.tolerance;
    }

    /// Entries whose id starts with `prefix`.
    pub fn filter(&self, prefix: &str) -> ConditionReport {
        let mut out = ConditionReport::new(self.tolerance);
        for e in self.entries.iter().filter(|e| e.id.starts_with(prefix)) {
            out.max_residual = out.max_residual.max(e.residual);
            out.entries.push(e.clone());
        }
        out.pass = out.max_residual <= out.tolerance;
        out
    }

    pub fn failures(&self) -> Vec<&ConditionEntry> {
        self.entries.iter().filter(|e| e.residual > self.tolerance).collect()
    }

    pub fn count(&self, id: &str) -> usize {
        self.entries.iter().filter(|e| e.id == id).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mv(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.mul_vec(v)
}

fn sq(v: &[f64]) -> Vec<f64> {
    hadamard(v, v)
}

fn index_tuples(n: usize, arity: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |k| {
                    let mut t = t.clone();
                    t.push(k);
                    t
                })
            })
            .collect();
    }
    out
}

/// Exact-Jacobian conditions through `order`.
pub fn check_gark_ros(t: &PartitionedTableau, order: u32) -> ConditionReport {
    check_gark_ros_weights(t, &t.b, order)
}

/// Same as [`check_gark_ros`] with the weights replaced, e.g. by b̂.
pub fn check_gark_ros_weights(t: &PartitionedTableau, b: &[Vec<f64>], order: u32) -> ConditionReport {
    let n = t.n_partitions();
    let d = t.derive_vectors();
    let DerivedVectors { beta, c, e, .. } = &d;
    let al = &t.alpha;
    let mut r = ConditionReport::default();
    if order >= 1 {
        for m in 0..n {
            r.push("ros.o1", &[m], b[m].iter().sum(), 1.0);
        }
    }
    if order >= 2 {
        for ix in index_tuples(n, 2) {
            let (m, k) = (ix[0], ix[1]);
            r.push("ros.o2", &ix, dot(&b[m], &e[m][k]), 0.5);
        }
    }
    if order >= 3 {
        for ix in index_tuples(n, 3) {
            let (m, k, p) = (ix[0], ix[1], ix[2]);
            r.push("ros.o3.bushy", &ix, dot(&b[m], &hadamard(&c[m][k], &c[m][p])), 1.0 / 3.0);
            r.push("ros.o3.bump", &ix, dot(&b[m], &mv(&beta[m][k], &e[k][p])), 1.0 / 6.0);
        }
    }
    if order >= 4 {
        for ix in index_tuples(n, 4) {
            let (m, k, p, q) = (ix[0], ix[1], ix[2], ix[3]);
            let ccc = hadamard(&hadamard(&c[m][k], &c[m][p]), &c[m][q]);
            r.push("ros.o4.bushy", &ix, dot(&b[m], &ccc), 0.25);
            let ae = mv(&al[m][k], &e[k][p]);
            r.push("ros.o4.mixed", &ix, dot(&b[m], &hadamard(&ae, &c[m][q])), 0.125);
            let bcc = mv(&beta[m][k], &hadamard(&c[k][p], &c[k][q]));
            r.push("ros.o4.bump_bushy", &ix, dot(&b[m], &bcc), 1.0 / 12.0);
            let bbe = mv(&beta[m][k], &mv(&beta[k][p], &e[p][q]));
            r.push("ros.o4.tall", &ix, dot(&b[m], &bbe), 1.0 / 24.0);
        }
    }
    r
}

/// W-method conditions (arbitrary Jacobian approximations) through `order`.
pub fn check_gark_row(t: &PartitionedTableau, order: u32) -> ConditionReport {
    check_gark_row_weights(t, &t.b, order)
}

pub fn check_gark_row_weights(t: &PartitionedTableau, b: &[Vec<f64>], order: u32) -> ConditionReport {
    let n = t.n_partitions();
    let d = t.derive_vectors();
    let (c, g) = (&d.c, &d.g);
    let (al, ga) = (&t.alpha, &t.gamma);
    let mut r = ConditionReport::default();
    if order >= 1 {
        for m in 0..n {
            r.push("row.o1", &[m], b[m].iter().sum(), 1.0);
        }
    }
    if order >= 2 {
        for ix in index_tuples(n, 2) {
            let (m, k) = (ix[0], ix[1]);
            r.push("row.o2.c", &ix, dot(&b[m], &c[m][k]), 0.5);
            r.push("row.o2.g", &ix, dot(&b[m], &g[m][k]), 0.0);
        }
    }
    if order >= 3 {
        for ix in index_tuples(n, 3) {
            let (m, k, p) = (ix[0], ix[1], ix[2]);
            let bm = &b[m];
            r.push("row.o3.bushy", &ix, dot(bm, &hadamard(&c[m][k], &c[m][p])), 1.0 / 3.0);
            r.push("row.o3.ac", &ix, dot(bm, &mv(&al[m][k], &c[k][p])), 1.0 / 6.0);
            r.push("row.o3.gc", &ix, dot(bm, &mv(&ga[m][k], &c[k][p])), 0.0);
            r.push("row.o3.ag", &ix, dot(bm, &mv(&al[m][k], &g[k][p])), 0.0);
            r.push("row.o3.gg", &ix, dot(bm, &mv(&ga[m][k], &g[k][p])), 0.0);
        }
    }
    if order >= 4 {
        for ix in index_tuples(n, 4) {
            let (m, k, p, q) = (ix[0], ix[1], ix[2], ix[3]);
            let bm = &b[m];
            let ccc = hadamard(&hadamard(&c[m][k], &c[m][p]), &c[m][q]);
            r.push("row.o4.ccc", &ix, dot(bm, &ccc), 0.25);
            r.push("row.o4.ac_c", &ix, dot(bm, &hadamard(&mv(&al[m][k], &c[k][p]), &c[m][q])), 0.125);
            let cc = hadamard(&c[k][p], &c[k][q]);
            r.push("row.o4.a_cc", &ix, dot(bm, &mv(&al[m][k], &cc)), 1.0 / 12.0);
            r.push("row.o4.aac", &ix, dot(bm, &mv(&al[m][k], &mv(&al[k][p], &c[p][q]))), 1.0 / 24.0);
            r.push("row.o4.ag_c", &ix, dot(bm, &hadamard(&mv(&al[m][k], &g[k][p]), &c[m][q])), 0.0);
            r.push("row.o4.g_cc", &ix, dot(bm, &mv(&ga[m][k], &cc)), 0.0);
            r.push("row.o4.gac", &ix, dot(bm, &mv(&ga[m][k], &mv(&al[k][p], &c[p][q]))), 0.0);
            r.push("row.o4.agc", &ix, dot(bm, &mv(&al[m][k], &mv(&ga[k][p], &c[p][q]))), 0.0);
            r.push("row.o4.aag", &ix, dot(bm, &mv(&al[m][k], &mv(&al[k][p], &g[p][q]))), 0.0);
            r.push("row.o4.gag", &ix, dot(bm, &mv(&ga[m][k], &mv(&al[k][p], &g[p][q]))), 0.0);
            r.push("row.o4.agg", &ix, dot(bm, &mv(&al[m][k], &mv(&ga[k][p], &g[p][q]))), 0.0);
            r.push("row.o4.ggc", &ix, dot(bm, &mv(&ga[m][k], &mv(&ga[k][p], &c[p][q]))), 0.0);
            r.push("row.o4.ggg", &ix, dot(bm, &mv(&ga[m][k], &mv(&ga[k][p], &g[p][q]))), 0.0);
        }
    }
    r
}

/// Weights, α and γ of a single-partition scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct RosTriple {
    pub b: Vec<f64>,
    pub alpha: Matrix,
    pub gamma: Matrix,
}

impl RosTriple {
    pub fn from_tableau(t: &PartitionedTableau) -> Self {
        Self {
            b: t.b[0].clone(),
            alpha: t.alpha[0][0].clone(),
            gamma: t.gamma[0][0].clone(),
        }
    }
}

/// Coupling conditions for schemes where every partition uses the base
/// (α, γ) for its own stages and a common (ᾱ, γ̄) for all other partitions.
/// `class` selects the W-method (Row) or exact-Jacobian (Ros) families.
pub fn check_internal_then_coupling_specialcase2(
    base: &RosTriple,
    coupling: &RosTriple,
    order: u32,
    class: MethodClass,
) -> Result<ConditionReport, OrderError> {
    let s = base.b.len();
    let shapes = [
        base.alpha.rows(),
        base.alpha.cols(),
        base.gamma.rows(),
        base.gamma.cols(),
        coupling.b.len(),
        coupling.alpha.rows(),
        coupling.alpha.cols(),
        coupling.gamma.rows(),
        coupling.gamma.cols(),
    ];
    if shapes.iter().any(|&x| x != s) {
        return Err(OrderError::ShapeMismatch(format!("all blocks must be {s}x{s}")));
    }
    let b = &base.b;
    let ones = vec![1.0; s];
    let (a, ab) = (&base.alpha, &coupling.alpha);
    let (g, gb) = (&base.gamma, &coupling.gamma);
    let c = mv(a, &ones);
    let cb = mv(ab, &ones);
    let gv = mv(g, &ones);
    let gbv = mv(gb, &ones);
    let be = a.add(g);
    let bb = ab.add(gb);
    let e: Vec<f64> = c.iter().zip(&gv).map(|(x, y)| x + y).collect();
    let eb: Vec<f64> = cb.iter().zip(&gbv).map(|(x, y)| x + y).collect();

    let mut r = ConditionReport::default();
    let dc = c.iter().zip(&cb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    r.push("sc2.cbar_eq_c", &[], dc, 0.0);
    if order < 3 {
        return Ok(r);
    }
    match class {
        MethodClass::Row => {
            r.push("sc2.row.o3.a_gbar", &[], dot(b, &mv(a, &gbv)), 0.0);
            r.push("sc2.row.o3.abar_g", &[], dot(b, &mv(ab, &gv)), 0.0);
            r.push("sc2.row.o3.g_gbar", &[], dot(b, &mv(g, &gbv)), 0.0);
            r.push("sc2.row.o3.gbar_g", &[], dot(b, &mv(gb, &gv)), 0.0);
        }
        MethodClass::Ros => {
            r.push("sc2.ros.o3.beta_ebar", &[], dot(b, &mv(&be, &eb)), 1.0 / 6.0);
            r.push("sc2.ros.o3.betabar_e", &[], dot(b, &mv(&bb, &e)), 1.0 / 6.0);
            if order >= 4 {
                r.push("sc2.ros.o4.a_ebar_c", &[], dot(b, &hadamard(&mv(a, &eb), &c)), 0.125);
                r.push("sc2.ros.o4.abar_e_c", &[], dot(b, &hadamard(&mv(ab, &e), &c)), 0.125);
                let chains: [(&str, &Matrix, &Matrix, &Vec<f64>); 6] = [
                    ("sc2.ros.o4.bb_b_e", &bb, &be, &e),
                    ("sc2.ros.o4.bb_bb_e", &bb, &bb, &e),
                    ("sc2.ros.o4.bb_b_ebar", &bb, &be, &eb),
                    ("sc2.ros.o4.b_bb_ebar", &be, &bb, &eb),
                    ("sc2.ros.o4.b_bb_e", &be, &bb, &e),
                    ("sc2.ros.o4.b_b_ebar", &be, &be, &eb),
                ];
                for (id, m1, m2, v) in chains {
                    r.push(id, &[], dot(b, &mv(m1, &mv(m2, v))), 1.0 / 24.0);
                }
            }
        }
    }
    Ok(r)
}

fn require_imex(t: &PartitionedTableau) -> Result<(), OrderError> {
    if t.n_partitions() != 2 {
        return Err(OrderError::StructureMismatch(format!(
            "expected two partitions, got {}",
            t.n_partitions()
        )));
    }
    if t.gamma[0].iter().any(|g| g.max_abs() != 0.0) {
        return Err(OrderError::StructureMismatch("partition 1 must be explicit (gamma^{1,.} = 0)".into()));
    }
    Ok(())
}

/// Coupling conditions of a two-partition explicit / linearly implicit pair.
///
/// `exact_jacobian` picks the exact-Jacobian families over the W-method ones;
/// `special_case` uses the reduced lists valid when α^{E,I}=α^{E,E},
/// α^{I,E}=α^{I,I}, γ^{I,E}=γ^{I,I} and both partitions share c. Without the
/// special structure, W-method order four checks every mixed-index entry of
/// the general order-four list.
pub fn check_imex_coupling(
    t: &PartitionedTableau,
    order: u32,
    exact_jacobian: bool,
    special_case: bool,
) -> Result<ConditionReport, OrderError> {
    require_imex(t)?;
    let (ex, im) = (0usize, 1usize);
    let d = t.derive_vectors();
    let (al, ga) = (&t.alpha, &t.gamma);
    let (be, c, g, e) = (&d.beta, &d.c, &d.g, &d.e);
    let (bex, bim) = (&t.b[ex], &t.b[im]);
    let mut r = ConditionReport::default();

    if special_case {
        let same = |x: &Matrix, y: &Matrix| x == y;
        if !same(&al[ex][im], &al[ex][ex]) || !same(&al[im][ex], &al[im][im]) || !same(&ga[im][ex], &ga[im][im]) {
            return Err(OrderError::StructureMismatch("blocks do not have the special IMEX coupling structure".into()));
        }
        let dc = c[ex][ex].iter().zip(&c[im][im]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if dc > 1e-12 {
            return Err(OrderError::StructureMismatch(format!("partitions use different c (max difference {dc:e})")));
        }
    }

    if order >= 2 {
        for (m, k) in [(ex, im), (im, ex)] {
            if exact_jacobian {
                r.push("imex.o2", &[m, k], dot(&t.b[m], &e[m][k]), 0.5);
            } else {
                r.push("imex.o2.c", &[m, k], dot(&t.b[m], &c[m][k]), 0.5);
                r.push("imex.o2.g", &[m, k], dot(&t.b[m], &g[m][k]), 0.0);
            }
        }
    }

    if special_case {
        let ae = &al[ex][ex];
        let ai = &al[im][im];
        let gi = &ga[im][im];
        let bi = &be[im][im];
        let cc = &c[ex][ex];
        let gv = &g[im][im];
        if exact_jacobian {
            if order >= 3 {
                r.push("imex.case1.ros.o3.aE_gI", &[], dot(bex, &mv(ae, gv)), 0.0);
                r.push("imex.case1.ros.o3.bI_gI", &[], dot(bim, &mv(bi, gv)), 0.0);
            }
            if order >= 4 {
                r.push("imex.case1.ros.o4.aE_gI_c", &[], dot(bex, &hadamard(&mv(ae, gv), cc)), 0.0);
                r.push("imex.case1.ros.o4.aE_aE_gI", &[], dot(bex, &mv(ae, &mv(ae, gv))), 0.0);
                r.push("imex.case1.ros.o4.aE_bI_c", &[], dot(bex, &mv(ae, &mv(bi, cc))), 1.0 / 24.0);
                r.push("imex.case1.ros.o4.aE_bI_gI", &[], dot(bex, &mv(ae, &mv(bi, gv))), 0.0);
                r.push("imex.case1.ros.o4.bI_aE_c", &[], dot(bim, &mv(bi, &mv(ae, cc))), 1.0 / 24.0);
                r.push("imex.case1.ros.o4.bI_aE_gI", &[], dot(bim, &mv(bi, &mv(ae, gv))), 0.0);
            }
        } else {
            if order >= 3 {
                r.push("imex.case1.row.o3.aE_gI", &[], dot(bex, &mv(ae, gv)), 0.0);
            }
            if order >= 4 {
                r.push("imex.case1.row.o4.aE_gI_c", &[], dot(bex, &hadamard(&mv(ae, gv), cc)), 0.0);
                r.push("imex.case1.row.o4.aE_aE_gI", &[], dot(bex, &mv(ae, &mv(ae, gv))), 0.0);
                r.push("imex.case1.row.o4.aE_aI_c", &[], dot(bex, &mv(ae, &mv(ai, cc))), 1.0 / 24.0);
                r.push("imex.case1.row.o4.aE_gI_c2", &[], dot(bex, &mv(ae, &mv(gi, cc))), 0.0);
                r.push("imex.case1.row.o4.aE_aI_gI", &[], dot(bex, &mv(ae, &mv(ai, gv))), 0.0);
                r.push("imex.case1.row.o4.aE_gI_gI", &[], dot(bex, &mv(ae, &mv(gi, gv))), 0.0);
                r.push("imex.case1.row.o4.aI_aE_c", &[], dot(bim, &mv(ai, &mv(ae, cc))), 1.0 / 24.0);
                r.push("imex.case1.row.o4.gI_aE_c", &[], dot(bim, &mv(gi, &mv(ae, cc))), 0.0);
                r.push("imex.case1.row.o4.aI_aE_gI", &[], dot(bim, &mv(ai, &mv(ae, gv))), 0.0);
                r.push("imex.case1.row.o4.gI_aE_gI", &[], dot(bim, &mv(gi, &mv(ae, gv))), 0.0);
            }
        }
        return Ok(r);
    }

    if exact_jacobian {
        if order >= 3 {
            r.push("imex.ros.o3.aEI_eI", &[], dot(bex, &mv(&al[ex][im], &e[im][im])), 1.0 / 6.0);
            r.push("imex.ros.o3.bIE_cE", &[], dot(bim, &mv(&be[im][ex], &c[ex][ex])), 1.0 / 6.0);
        }
        if order >= 4 {
            let (aei, aee) = (&al[ex][im], &al[ex][ex]);
            let (aie, bie, bii) = (&al[im][ex], &be[im][ex], &be[im][im]);
            let (ce, ci, ei) = (&c[ex][ex], &c[im][im], &e[im][im]);
            r.push("imex.ros.o4.aEI_eI_cE", &[], dot(bex, &hadamard(&mv(aei, ei), ce)), 0.125);
            r.push("imex.ros.o4.aIE_cE_cI", &[], dot(bim, &hadamard(&mv(aie, ce), ci)), 0.125);
            r.push("imex.ros.o4.aEI_cI2", &[], dot(bex, &mv(aei, &sq(ci))), 1.0 / 12.0);
            r.push("imex.ros.o4.bIE_cE2", &[], dot(bim, &mv(bie, &sq(ce))), 1.0 / 12.0);
            r.push("imex.ros.o4.aEE_aEI_eI", &[], dot(bex, &mv(aee, &mv(aei, ei))), 1.0 / 24.0);
            r.push("imex.ros.o4.aEI_bIE_cE", &[], dot(bex, &mv(aei, &mv(bie, ce))), 1.0 / 24.0);
            r.push("imex.ros.o4.aEI_bII_eI", &[], dot(bex, &mv(aei, &mv(bii, ei))), 1.0 / 24.0);
            r.push("imex.ros.o4.bIE_aEE_cE", &[], dot(bim, &mv(bie, &mv(aee, ce))), 1.0 / 24.0);
            r.push("imex.ros.o4.bIE_aEI_eI", &[], dot(bim, &mv(bie, &mv(aei, ei))), 1.0 / 24.0);
            r.push("imex.ros.o4.bII_bIE_cE", &[], dot(bim, &mv(bii, &mv(bie, ce))), 1.0 / 24.0);
        }
    } else {
        if order >= 3 {
            r.push("imex.row.o3.aEI_cI", &[], dot(bex, &mv(&al[ex][im], &c[im][im])), 1.0 / 6.0);
            r.push("imex.row.o3.aEI_gI", &[], dot(bex, &mv(&al[ex][im], &g[im][im])), 0.0);
            r.push("imex.row.o3.aIE_cE", &[], dot(bim, &mv(&al[im][ex], &c[ex][ex])), 1.0 / 6.0);
            r.push("imex.row.o3.gIE_cE", &[], dot(bim, &mv(&ga[im][ex], &c[ex][ex])), 0.0);
        }
        if order >= 4 {
            for en in check_gark_row(t, 4).entries {
                let mixed = en.indices.windows(2).any(|w| w[0] != w[1]);
                if en.id.starts_with("row.o4") && mixed {
                    let idx: Vec<usize> = en.indices.iter().map(|i| i - 1).collect();
                    r.push(&format!("imex.{}", en.id), &idx, en.lhs, en.target);
                }
            }
        }
    }
    Ok(r)
}

/// Algebraic-variable and differential-variable conditions for index-1 DAEs.
/// The simplifying assumption β^{a,d} = β^{a,a} is reported as its own entry.
pub fn check_dae_algebraic(
    t: &PartitionedTableau,
    diff: usize,
    alg: usize,
    order_x: u32,
    order_z: u32,
) -> Result<ConditionReport, OrderError> {
    let dv = t.derive_vectors();
    let w = dv.omega(alg)?;
    let (dd, aa, da, ad) = ((diff, diff), (alg, alg), (diff, alg), (alg, diff));
    let bd = &t.b[diff];
    let ba = &t.b[alg];
    let c = &dv.c[ad.0][ad.1];
    let cdd = &dv.c[dd.0][dd.1];
    let edd = &dv.e[dd.0][dd.1];
    let a_ad = &t.alpha[ad.0][ad.1];
    let a_aa = &t.alpha[aa.0][aa.1];
    let a_da = &t.alpha[da.0][da.1];
    let b_da = &dv.beta[da.0][da.1];
    let b_dd = &dv.beta[dd.0][dd.1];
    let bwa: Vec<f64> = w.vec_mul(ba);

    let mut r = ConditionReport::default();
    let assumption = dv.beta[ad.0][ad.1].sub(&dv.beta[aa.0][aa.1]).max_abs();
    r.push("dae.assumption_a", &[], assumption, 0.0);
    if order_z >= 2 {
        r.push("dae.z2", &[], dot(&bwa, &sq(c)), 1.0);
    }
    if order_z >= 3 {
        r.push("dae.z3.ccc", &[], dot(&bwa, &hadamard(&sq(c), c)), 1.0);
        r.push("dae.z3.ae_c", &[], dot(&bwa, &hadamard(&mv(a_ad, edd), c)), 0.5);
        let inner = mv(a_aa, &mv(&w, &sq(c)));
        r.push("dae.z3.awcc_c", &[], dot(&bwa, &hadamard(&inner, c)), 1.0);
    }
    let wcc = mv(&w, &sq(c));
    if order_x >= 3 {
        r.push("dae.x3", &[], dot(bd, &mv(b_da, &wcc)), 1.0 / 3.0);
    }
    if order_x >= 4 {
        r.push("dae.x4.awcc_c", &[], dot(bd, &hadamard(&mv(a_da, &wcc), cdd)), 0.25);
        r.push("dae.x4.bwccc", &[], dot(bd, &mv(b_da, &mv(&w, &hadamard(&sq(c), c)))), 0.25);
        let cae = hadamard(c, &mv(a_ad, edd));
        r.push("dae.x4.bw_c_ae", &[], dot(bd, &mv(b_da, &mv(&w, &cae))), 0.125);
        r.push("dae.x4.bbwcc", &[], dot(bd, &mv(b_dd, &mv(b_da, &wcc))), 1.0 / 12.0);
    }
    Ok(r)
}

/// Extra conditions that control errors from inconsistent initial values.
pub fn check_inconsistent_ic(t: &PartitionedTableau, diff: usize, alg: usize) -> Result<ConditionReport, OrderError> {
    let dv = t.derive_vectors();
    let w = dv.omega(alg)?;
    let s_a = t.b[alg].len();
    let o = w.mul_vec(&vec![1.0; s_a]);
    let ba = &t.b[alg];
    let bd = &t.b[diff];
    let c_ad = &dv.c[alg][diff];
    let c_dd = &dv.c[diff][diff];
    let a_aa = &t.alpha[alg][alg];
    let a_da = &t.alpha[diff][alg];
    let b_da = &dv.beta[diff][alg];
    let b_dd = &dv.beta[diff][diff];
    let bwa = w.vec_mul(ba);
    let c_ao = hadamard(c_ad, &mv(a_aa, &o));

    let mut r = ConditionReport::default();
    r.push("ic.z1", &[], dot(ba, &o), 1.0);
    r.push("ic.z2", &[], dot(&bwa, &c_ao), 1.0);
    r.push("ic.x1", &[], dot(bd, &mv(b_da, &o)), 1.0);
    r.push("ic.x2.c_ao", &[], dot(bd, &hadamard(c_dd, &mv(a_da, &o))), 0.5);
    r.push("ic.x2.bbo", &[], dot(bd, &mv(b_dd, &mv(b_da, &o))), 0.5);
    r.push("ic.x2.bw_c_ao", &[], dot(bd, &mv(b_da, &mv(&w, &c_ao))), 0.5);
    Ok(r)
}

/// Tableau with the embedded weights promoted to main weights.
pub fn embedded_view(t: &PartitionedTableau) -> Option<PartitionedTableau> {
    let bhat = t.bhat.clone()?;
    let mut e = t.clone();
    e.b = bhat;
    e.bhat = None;
    e.claimed_order = t.claimed_embedded_order.unwrap_or(t.claimed_order.saturating_sub(1));
    e.claimed_embedded_order = None;
    Some(e)
}
