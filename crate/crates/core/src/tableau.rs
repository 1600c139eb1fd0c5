//! Partitioned Rosenbrock(-W) tableaus: storage, validation, derived vectors
//! and the JSON exchange format.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{invert_small, LinalgError, Matrix};

/// Default tolerance for the numerical tableau predicates.
pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodClass {
    /// Order claims assume exact Jacobians.
    Ros,
    /// Order claims hold for arbitrary Jacobian approximations.
    Row,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Strict,
    Decoupled,
}

#[derive(Debug, Error)]
pub enum TableauError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tableau is not decoupled: {0}")]
    NotDecoupled(String),
    #[error("invalid tableau: {0}")]
    Invalid(ValidationReport),
    #[error("cannot parse tableau: {0}")]
    Parse(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// (partition, stage) pair, both zero-based.
pub type StageId = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedTableau {
    pub name: String,
    pub class: MethodClass,
    pub coupling: CouplingMode,
    /// `alpha[q][m]` is α^{q,m}, shape s^q × s^m.
    pub alpha: Vec<Vec<Matrix>>,
    pub gamma: Vec<Vec<Matrix>>,
    pub b: Vec<Vec<f64>>,
    pub bhat: Option<Vec<Vec<f64>>>,
    pub claimed_order: u32,
    pub claimed_embedded_order: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// One-based block coordinates, when the violation belongs to a block.
    pub block: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, block: Option<(usize, usize)>, message: String) {
        self.violations.push(Violation { block, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<_> = self.violations.iter().map(|v| v.message.as_str()).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Row sums and β blocks, all indexed `[m][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedVectors {
    pub beta: Vec<Vec<Matrix>>,
    pub c: Vec<Vec<Vec<f64>>>,
    pub g: Vec<Vec<Vec<f64>>>,
    pub e: Vec<Vec<Vec<f64>>>,
}

impl DerivedVectors {
    /// ω^{a,a} = (β^{a,a})⁻¹.
    pub fn omega(&self, a: usize) -> Result<Matrix, LinalgError> {
        invert_small(&self.beta[a][a])
    }
}

/// Block-assembled global matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTableau {
    pub a: Matrix,
    pub g: Matrix,
    pub b_mat: Matrix,
    pub b: Vec<f64>,
    /// Offset of each partition's first stage in the global ordering.
    pub offsets: Vec<usize>,
}

fn row_sums(m: &Matrix) -> Vec<f64> {
    (0..m.rows()).map(|i| m.row(i).iter().sum()).collect()
}

impl PartitionedTableau {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        class: MethodClass,
        coupling: CouplingMode,
        alpha: Vec<Vec<Matrix>>,
        gamma: Vec<Vec<Matrix>>,
        b: Vec<Vec<f64>>,
        bhat: Option<Vec<Vec<f64>>>,
        claimed_order: u32,
        claimed_embedded_order: Option<u32>,
    ) -> Self {
        Self {
            name: name.into(),
            class,
            coupling,
            alpha,
            gamma,
            b,
            bhat,
            claimed_order,
            claimed_embedded_order,
        }
    }

    /// One-partition tableau.
    #[allow(clippy::too_many_arguments)]
    pub fn single(
        name: impl Into<String>,
        class: MethodClass,
        alpha: Matrix,
        gamma: Matrix,
        b: Vec<f64>,
        bhat: Option<Vec<f64>>,
        claimed_order: u32,
        claimed_embedded_order: Option<u32>,
    ) -> Self {
        let coupling = if (0..alpha.rows()).any(|i| alpha[(i, i)] != 0.0) {
            CouplingMode::Decoupled
        } else {
            CouplingMode::Strict
        };
        Self::new(
            name,
            class,
            coupling,
            vec![vec![alpha]],
            vec![vec![gamma]],
            vec![b],
            bhat.map(|v| vec![v]),
            claimed_order,
            claimed_embedded_order,
        )
    }

    pub fn n_partitions(&self) -> usize {
        self.b.len()
    }

    pub fn stage_counts(&self) -> Vec<usize> {
        self.b.iter().map(Vec::len).collect()
    }

    pub fn total_stages(&self) -> usize {
        self.b.iter().map(Vec::len).sum()
    }

    pub fn has_embedded(&self) -> bool {
        self.bhat.is_some()
    }

    /// Lists every structural violation; an empty report means valid.
    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let n = self.n_partitions();
        if n == 0 {
            rep.push(None, "tableau has no partitions".into());
            return rep;
        }
        let s = self.stage_counts();
        if s.iter().any(|&x| x == 0) {
            rep.push(None, "every partition needs at least one stage".into());
        }
        if self.alpha.len() != n || self.alpha.iter().any(|r| r.len() != n) {
            rep.push(None, format!("alpha must hold {n}x{n} blocks"));
            return rep;
        }
        if self.gamma.len() != n || self.gamma.iter().any(|r| r.len() != n) {
            rep.push(None, format!("gamma must hold {n}x{n} blocks"));
            return rep;
        }
        if let Some(bh) = &self.bhat {
            if bh.len() != n {
                rep.push(None, format!("bhat has {} partitions, expected {n}", bh.len()));
            } else {
                for q in 0..n {
                    if bh[q].len() != s[q] {
                        rep.push(
                            None,
                            format!("bhat of partition {} has length {}, expected {}", q + 1, bh[q].len(), s[q]),
                        );
                    }
                }
            }
        }
        for (q, bq) in self.b.iter().enumerate() {
            if bq.iter().any(|x| !x.is_finite()) {
                rep.push(None, format!("non-finite weight in partition {}", q + 1));
            }
        }
        if let Some(bh) = &self.bhat {
            if bh.iter().flatten().any(|x| !x.is_finite()) {
                rep.push(None, "non-finite embedded weight".into());
            }
        }
        let mut shapes_ok = true;
        for q in 0..n {
            for m in 0..n {
                for (label, blk) in [("alpha", &self.alpha[q][m]), ("gamma", &self.gamma[q][m])] {
                    let at = Some((q + 1, m + 1));
                    if blk.rows() != s[q] || blk.cols() != s[m] {
                        shapes_ok = false;
                        rep.push(
                            at,
                            format!(
                                "{label} block ({},{}) has shape {}x{}, expected {}x{}",
                                q + 1,
                                m + 1,
                                blk.rows(),
                                blk.cols(),
                                s[q],
                                s[m]
                            ),
                        );
                        continue;
                    }
                    if !blk.all_finite() {
                        rep.push(at, format!("non-finite entry in {label} block ({},{})", q + 1, m + 1));
                    }
                }
            }
        }
        if !shapes_ok {
            return rep;
        }
        for q in 0..n {
            for m in 0..n {
                let at = Some((q + 1, m + 1));
                let (qq, mm) = (q + 1, m + 1);
                let al = &self.alpha[q][m];
                let ga = &self.gamma[q][m];
                let upper = |b: &Matrix| (0..b.rows()).any(|i| (i + 1..b.cols()).any(|j| b[(i, j)] != 0.0));
                let diag = |b: &Matrix| (0..b.rows().min(b.cols())).any(|i| b[(i, i)] != 0.0);
                if upper(al) {
                    rep.push(at, format!("alpha block ({qq},{mm}) is not lower triangular"));
                }
                if upper(ga) {
                    rep.push(at, format!("gamma block ({qq},{mm}) is not lower triangular"));
                }
                match self.coupling {
                    CouplingMode::Strict => {
                        if diag(al) {
                            rep.push(at, format!("diagonal of alpha block ({qq},{mm}) nonzero"));
                        }
                    }
                    CouplingMode::Decoupled => {
                        // Couplings to later partitions cannot use the current stage.
                        if m > q && diag(al) {
                            rep.push(at, format!("diagonal of alpha block ({qq},{mm}) nonzero"));
                        }
                        if m > q && diag(ga) {
                            rep.push(at, format!("diagonal of gamma block ({qq},{mm}) nonzero"));
                        }
                    }
                }
            }
        }
        if self.coupling == CouplingMode::Decoupled && rep.is_valid() {
            if let Err(e) = self.decoupled_ordering() {
                rep.push(None, e.to_string());
            }
        }
        rep
    }

    pub fn validated(self) -> Result<Self, TableauError> {
        let rep = self.validate();
        if rep.is_valid() {
            Ok(self)
        } else {
            Err(TableauError::Invalid(rep))
        }
    }

    pub fn derive_vectors(&self) -> DerivedVectors {
        let n = self.n_partitions();
        let mut beta = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        let mut e = Vec::with_capacity(n);
        for q in 0..n {
            let mut br = Vec::with_capacity(n);
            let (mut cr, mut gr, mut er) = (Vec::new(), Vec::new(), Vec::new());
            for m in 0..n {
                let bq = self.alpha[q][m].add(&self.gamma[q][m]);
                let cv = row_sums(&self.alpha[q][m]);
                let gv = row_sums(&self.gamma[q][m]);
                er.push(cv.iter().zip(&gv).map(|(x, y)| x + y).collect());
                cr.push(cv);
                gr.push(gv);
                br.push(bq);
            }
            beta.push(br);
            c.push(cr);
            g.push(gr);
            e.push(er);
        }
        DerivedVectors { beta, c, g, e }
    }

    /// True when all c^{m,n} (and g^{m,n}) agree across n.
    pub fn is_internally_consistent(&self, tol: f64) -> bool {
        let dv = self.derive_vectors();
        let n = self.n_partitions();
        (0..n).all(|m| {
            (0..n).all(|k| {
                let dc = dv.c[m][k].iter().zip(&dv.c[m][0]).map(|(a, b)| (a - b).abs());
                let dg = dv.g[m][k].iter().zip(&dv.g[m][0]).map(|(a, b)| (a - b).abs());
                dc.chain(dg).fold(0.0, f64::max) <= tol
            })
        })
    }

    /// True when every b^q equals the last row of β^{N,q}.
    pub fn is_stiffly_accurate(&self, tol: f64) -> bool {
        let n = self.n_partitions();
        let last = n - 1;
        let s_last = self.b[last].len();
        (0..n).all(|q| {
            let beta = self.alpha[last][q].add(&self.gamma[last][q]);
            beta.row(s_last - 1)
                .iter()
                .zip(&self.b[q])
                .all(|(x, y)| (x - y).abs() <= tol)
        })
    }

    pub fn assemble_global(&self) -> GlobalTableau {
        let s = self.stage_counts();
        let mut offsets = Vec::with_capacity(s.len());
        let mut acc = 0;
        for &x in &s {
            offsets.push(acc);
            acc += x;
        }
        let mut a = Matrix::zeros(acc, acc);
        let mut g = Matrix::zeros(acc, acc);
        for q in 0..s.len() {
            for m in 0..s.len() {
                a.set_block(offsets[q], offsets[m], &self.alpha[q][m]);
                g.set_block(offsets[q], offsets[m], &self.gamma[q][m]);
            }
        }
        let b_mat = a.add(&g);
        let b = self.b.iter().flatten().copied().collect();
        GlobalTableau {
            a,
            g,
            b_mat,
            b,
            offsets,
        }
    }

    /// Stages that stage (q,i) reads, excluding itself.
    pub fn stage_dependencies(&self, (q, i): StageId) -> Vec<StageId> {
        let mut deps = Vec::new();
        for m in 0..self.n_partitions() {
            for j in 0..self.b[m].len() {
                if (m, j) == (q, i) {
                    continue;
                }
                if self.alpha[q][m][(i, j)] != 0.0 || self.gamma[q][m][(i, j)] != 0.0 {
                    deps.push((m, j));
                }
            }
        }
        deps
    }

    /// Evaluation order in which each stage only needs its own unknown and
    /// previously computed stages. Round-robin over partitions is tried first.
    pub fn decoupled_ordering(&self) -> Result<Vec<StageId>, TableauError> {
        let s = self.stage_counts();
        let n = s.len();
        let smax = s.iter().copied().max().unwrap_or(0);
        let round_robin: Vec<StageId> = (0..smax)
            .flat_map(|i| {
                let s = &s;
                (0..n).filter(move |&q| i < s[q]).map(move |q| (q, i))
            })
            .collect();
        let rank: BTreeMap<StageId, usize> =
            round_robin.iter().enumerate().map(|(r, &id)| (id, r)).collect();
        let deps: Vec<Vec<StageId>> = round_robin.iter().map(|&id| self.stage_dependencies(id)).collect();

        let fits = deps
            .iter()
            .enumerate()
            .all(|(r, d)| d.iter().all(|id| rank[id] < r));
        if fits {
            return Ok(round_robin);
        }

        // Kahn's algorithm, preferring round-robin rank among ready stages.
        let total = round_robin.len();
        let mut indeg = vec![0usize; total];
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); total];
        for (r, d) in deps.iter().enumerate() {
            indeg[r] = d.len();
            for id in d {
                users[rank[id]].push(r);
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> =
            (0..total).filter(|&r| indeg[r] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(total);
        while let Some(Reverse(r)) = ready.pop() {
            order.push(round_robin[r]);
            for &u in &users[r] {
                indeg[u] -= 1;
                if indeg[u] == 0 {
                    ready.push(Reverse(u));
                }
            }
        }
        if order.len() < total {
            let stuck: Vec<String> = (0..total)
                .filter(|&r| indeg[r] > 0)
                .map(|r| format!("({},{})", round_robin[r].0 + 1, round_robin[r].1 + 1))
                .collect();
            return Err(TableauError::NotDecoupled(format!(
                "stages {} are mutually implicit",
                stuck.join(", ")
            )));
        }
        Ok(order)
    }

    /// Groups of partitions whose stages can be stored summed: equal weights
    /// and identical coupling columns in every block row.
    pub fn combined_stage_groups(&self) -> Vec<Vec<usize>> {
        let n = self.n_partitions();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        'outer: for m in 0..n {
            for grp in groups.iter_mut() {
                let r = grp[0];
                let same_cols = (0..n).all(|p| self.alpha[p][m] == self.alpha[p][r] && self.gamma[p][m] == self.gamma[p][r]);
                let same_b = self.b[m] == self.b[r];
                let same_bhat = match &self.bhat {
                    Some(bh) => bh[m] == bh[r],
                    None => true,
                };
                if same_cols && same_b && same_bhat {
                    grp.push(m);
                    continue 'outer;
                }
            }
            groups.push(vec![m]);
        }
        groups
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TableauJson::from(self)).expect("tableau serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TableauError> {
        let raw: TableauJson = serde_json::from_str(text).map_err(|e| TableauError::Parse(e.to_string()))?;
        raw.into_tableau()
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum JsonNum {
    Text(String),
    Num(f64),
}

impl JsonNum {
    fn value(&self) -> Result<f64, TableauError> {
        match self {
            JsonNum::Num(x) => Ok(*x),
            JsonNum::Text(s) => crate::methods::parse_fraction(s)
                .ok_or_else(|| TableauError::Parse(format!("bad number {s:?}"))),
        }
    }
}

fn nums(v: &[f64]) -> Vec<JsonNum> {
    v.iter().map(|&x| JsonNum::Text(format_f64(x))).collect()
}

fn values(v: &[JsonNum]) -> Result<Vec<f64>, TableauError> {
    v.iter().map(JsonNum::value).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct TableauJson {
    name: String,
    class: MethodClass,
    coupling: CouplingMode,
    partitions: usize,
    stages: Vec<usize>,
    alpha: BTreeMap<String, Vec<Vec<JsonNum>>>,
    gamma: BTreeMap<String, Vec<Vec<JsonNum>>>,
    b: Vec<Vec<JsonNum>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bhat: Option<Vec<Vec<JsonNum>>>,
    claimed_order: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    claimed_embedded_order: Option<u32>,
}

impl From<&PartitionedTableau> for TableauJson {
    fn from(t: &PartitionedTableau) -> Self {
        let n = t.n_partitions();
        let blocks = |src: &Vec<Vec<Matrix>>| {
            let mut map = BTreeMap::new();
            for q in 0..n {
                for m in 0..n {
                    let rows = src[q][m].to_rows().iter().map(|r| nums(r)).collect();
                    map.insert(format!("{},{}", q + 1, m + 1), rows);
                }
            }
            map
        };
        TableauJson {
            name: t.name.clone(),
            class: t.class,
            coupling: t.coupling,
            partitions: n,
            stages: t.stage_counts(),
            alpha: blocks(&t.alpha),
            gamma: blocks(&t.gamma),
            b: t.b.iter().map(|v| nums(v)).collect(),
            bhat: t.bhat.as_ref().map(|bh| bh.iter().map(|v| nums(v)).collect()),
            claimed_order: t.claimed_order,
            claimed_embedded_order: t.claimed_embedded_order,
        }
    }
}

impl TableauJson {
    fn into_tableau(self) -> Result<PartitionedTableau, TableauError> {
        let n = self.partitions;
        if self.stages.len() != n || self.b.len() != n {
            return Err(TableauError::ShapeMismatch(format!(
                "{} partitions declared but {} stage counts and {} weight vectors given",
                n,
                self.stages.len(),
                self.b.len()
            )));
        }
        let read_blocks = |src: &BTreeMap<String, Vec<Vec<JsonNum>>>, label: &str| {
            let mut out = Vec::with_capacity(n);
            for q in 0..n {
                let mut row = Vec::with_capacity(n);
                for m in 0..n {
                    let key = format!("{},{}", q + 1, m + 1);
                    let blk = match src.get(&key) {
                        None => Matrix::zeros(self.stages[q], self.stages[m]),
                        Some(rows) => {
                            if rows.len() != self.stages[q] || rows.iter().any(|r| r.len() != self.stages[m]) {
                                return Err(TableauError::ShapeMismatch(format!(
                                    "{label} block {key} does not have shape {}x{}",
                                    self.stages[q], self.stages[m]
                                )));
                            }
                            let parsed = rows.iter().map(|r| values(r)).collect::<Result<Vec<_>, _>>()?;
                            Matrix::from_rows(&parsed)
                        }
                    };
                    row.push(blk);
                }
                out.push(row);
            }
            for key in src.keys() {
                let ok = key
                    .split_once(',')
                    .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
                    .map(|(a, b)| (1..=n).contains(&a) && (1..=n).contains(&b))
                    .unwrap_or(false);
                if !ok {
                    return Err(TableauError::Parse(format!("unexpected {label} block key {key:?}")));
                }
            }
            Ok(out)
        };
        let alpha = read_blocks(&self.alpha, "alpha")?;
        let gamma = read_blocks(&self.gamma, "gamma")?;
        let b = self.b.iter().map(|v| values(v)).collect::<Result<Vec<_>, _>>()?;
        for q in 0..n {
            if b[q].len() != self.stages[q] {
                return Err(TableauError::ShapeMismatch(format!(
                    "b of partition {} has length {}, expected {}",
                    q + 1,
                    b[q].len(),
                    self.stages[q]
                )));
            }
        }
        let bhat = match &self.bhat {
            Some(bh) => Some(bh.iter().map(|v| values(v)).collect::<Result<Vec<_>, _>>()?),
            None => None,
        };
        let t = PartitionedTableau::new(
            self.name,
            self.class,
            self.coupling,
            alpha,
            gamma,
            b,
            bhat,
            self.claimed_order,
            self.claimed_embedded_order,
        );
        t.validated()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ros2() -> PartitionedTableau {
        let g = 1.0 - std::f64::consts::SQRT_2 / 2.0;
        PartitionedTableau::single(
            "ros2",
            MethodClass::Ros,
            Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]),
            Matrix::from_rows(&[vec![g, 0.0], vec![-g, g]]),
            vec![1.0 - g, g],
            None,
            2,
            None,
        )
    }

    #[test]
    fn ros2_is_valid_and_stiffly_accurate() {
        let t = ros2();
        assert!(t.validate().is_valid());
        assert!(t.is_stiffly_accurate(DEFAULT_TOL));
        assert!(t.is_internally_consistent(DEFAULT_TOL));
        let dv = t.derive_vectors();
        let g = 1.0 - std::f64::consts::SQRT_2 / 2.0;
        assert_eq!(dv.c[0][0], vec![0.0, 1.0]);
        assert_eq!(dv.g[0][0], vec![g, 0.0]);
        assert_eq!(dv.e[0][0], vec![g, 1.0]);
    }

    #[test]
    fn strict_diagonal_alpha_is_rejected() {
        let mut t = ros2();
        t.alpha[0][0][(0, 0)] = 0.5;
        let rep = t.validate();
        assert!(rep
            .violations
            .iter()
            .any(|v| v.message == "diagonal of alpha block (1,1) nonzero"));
    }

    #[test]
    fn zero_one_stage() {
        let t = PartitionedTableau::single(
            "zero",
            MethodClass::Ros,
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 1),
            vec![1.0],
            None,
            1,
            None,
        );
        let dv = t.derive_vectors();
        assert_eq!((dv.c[0][0][0], dv.g[0][0][0], dv.e[0][0][0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn explicit_trapezoid_is_not_stiffly_accurate() {
        let t = PartitionedTableau::single(
            "et",
            MethodClass::Row,
            Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]),
            Matrix::zeros(2, 2),
            vec![0.5, 0.5],
            None,
            2,
            None,
        );
        assert!(!t.is_stiffly_accurate(DEFAULT_TOL));
    }

    #[test]
    fn mutually_implicit_first_stages() {
        let z = Matrix::zeros(1, 1);
        let one = Matrix::from_rows(&[vec![1.0]]);
        let t = PartitionedTableau::new(
            "coupled",
            MethodClass::Ros,
            CouplingMode::Strict,
            vec![vec![z.clone(), z.clone()], vec![z.clone(), z.clone()]],
            vec![vec![one.clone(), one.clone()], vec![one.clone(), one]],
            vec![vec![1.0], vec![1.0]],
            None,
            1,
            None,
        );
        assert!(matches!(t.decoupled_ordering(), Err(TableauError::NotDecoupled(_))));
    }

    #[test]
    fn single_partition_natural_order() {
        assert_eq!(ros2().decoupled_ordering().unwrap(), vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let t = ros2();
        let back = PartitionedTableau::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn json_rejects_bad_shapes() {
        let text = r#"{"name":"bad","class":"ros","coupling":"strict","partitions":1,"stages":[2],
            "alpha":{"1,1":[["0"]]},"gamma":{},"b":[["0.5","0.5"]],"claimed_order":1}"#;
        assert!(matches!(
            PartitionedTableau::from_json(text),
            Err(TableauError::ShapeMismatch(_))
        ));
    }
}
