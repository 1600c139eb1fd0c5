//! Built-in coefficient sets.
//!
//! Rational coefficients are written as fraction strings and converted once;
//! the γ-dependent entries of IMEX-ROW3(2)4 are quadratic polynomials in the
//! middle root of `6γ³ − 18γ² + 9γ − 1`.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::Matrix;
use crate::tableau::{CouplingMode, MethodClass, PartitionedTableau};

pub const BUILTIN_NAMES: [&str; 7] = [
    "ros2",
    "imex-ros22",
    "imex-row3-2-4",
    "imex-row3-2-5",
    "imex-ros4-3-6",
    "erk-trapezoidal",
    "irk-trapezoidal",
];

#[derive(Debug, Error)]
pub enum MethodError {
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Role {
    Explicit,
    DiagonallyImplicit,
    LinearlyImplicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodCard {
    pub tableau: PartitionedTableau,
    pub roles: Vec<Role>,
    pub dae_suitable: bool,
    pub notes: String,
}

impl MethodCard {
    /// Wraps a tableau, reading partition roles off its diagonal blocks.
    pub fn from_tableau(tableau: PartitionedTableau) -> Self {
        let roles = (0..tableau.n_partitions())
            .map(|q| {
                let a = &tableau.alpha[q][q];
                let g = &tableau.gamma[q][q];
                if (0..a.rows()).any(|i| a[(i, i)] != 0.0) {
                    Role::DiagonallyImplicit
                } else if g.max_abs() != 0.0 {
                    Role::LinearlyImplicit
                } else {
                    Role::Explicit
                }
            })
            .collect::<Vec<_>>();
        let dae_suitable = roles.last() == Some(&Role::LinearlyImplicit)
            && (0..tableau.b.last().map_or(0, Vec::len)).all(|i| {
                let n = tableau.n_partitions() - 1;
                tableau.gamma[n][n][(i, i)] != 0.0
            });
        Self {
            tableau,
            roles,
            dae_suitable,
            notes: String::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.tableau.name
    }

    /// No embedded weights: adaptive stepping falls back to step doubling.
    pub fn fixed_step_only(&self) -> bool {
        self.tableau.bhat.is_none()
    }

    fn with_notes(mut self, notes: &str) -> Self {
        self.notes = notes.to_string();
        self
    }
}

/// Parses `"p/q"`, `"-p/q"` or a plain decimal literal.
pub fn parse_fraction(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().ok()?;
            let q: f64 = q.trim().parse().ok()?;
            (q != 0.0).then_some(p / q)
        }
        None => s.parse().ok(),
    }
}

fn fr(s: &str) -> f64 {
    parse_fraction(s).unwrap_or_else(|| panic!("bad coefficient literal {s}"))
}

/// Lower-triangular rows of fraction strings; missing entries are zero.
fn mat(rows: &[&[&str]], n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| rows.get(i).and_then(|r| r.get(j)).map_or(0.0, |s| fr(s)))
}

fn vecf(v: &[&str]) -> Vec<f64> {
    v.iter().map(|s| fr(s)).collect()
}

/// Middle root of 6γ³ − 18γ² + 9γ − 1, by Newton's method from 0.44.
pub fn row324_gamma() -> f64 {
    let p = |g: f64| ((6.0 * g - 18.0) * g + 9.0) * g - 1.0;
    let dp = |g: f64| (18.0 * g - 36.0) * g + 9.0;
    let mut g = 0.44;
    for _ in 0..50 {
        let step = p(g) / dp(g);
        g -= step;
        if step.abs() <= 1e-17 {
            break;
        }
    }
    g
}

/// a2·γ² + a1·γ + a0 with fraction-string coefficients.
fn quad(g: f64, a2: &str, a1: &str, a0: &str) -> f64 {
    fr(a2) * g * g + fr(a1) * g + fr(a0)
}

fn ros2_gamma() -> f64 {
    1.0 - std::f64::consts::SQRT_2 / 2.0
}

fn ros2_blocks() -> (Matrix, Matrix, Vec<f64>) {
    let g = ros2_gamma();
    (
        Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]),
        Matrix::from_rows(&[vec![g, 0.0], vec![-g, g]]),
        vec![1.0 - g, g],
    )
}

fn explicit_trapezoid() -> (Matrix, Vec<f64>) {
    (Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]), vec![0.5, 0.5])
}

fn implicit_trapezoid() -> (Matrix, Vec<f64>) {
    (Matrix::from_rows(&[vec![0.0, 0.0], vec![0.5, 0.5]]), vec![0.5, 0.5])
}

pub fn ros2() -> MethodCard {
    let (a, g, b) = ros2_blocks();
    MethodCard::from_tableau(PartitionedTableau::single("ros2", MethodClass::Ros, a, g, b, None, 2, None))
        .with_notes("L-stable, stiffly accurate two-stage Rosenbrock method")
}

pub fn erk_trapezoidal() -> MethodCard {
    let (a, b) = explicit_trapezoid();
    MethodCard::from_tableau(PartitionedTableau::single(
        "erk-trapezoidal",
        MethodClass::Row,
        a,
        Matrix::zeros(2, 2),
        b,
        None,
        2,
        None,
    ))
}

pub fn irk_trapezoidal() -> MethodCard {
    let (a, b) = implicit_trapezoid();
    MethodCard::from_tableau(PartitionedTableau::single(
        "irk-trapezoidal",
        MethodClass::Row,
        a,
        Matrix::zeros(2, 2),
        b,
        None,
        2,
        None,
    ))
}

/// Three-way explicit / implicit-trapezoidal / Rosenbrock multimethod.
pub fn imex_ros22() -> MethodCard {
    let (et, bet) = explicit_trapezoid();
    let (it, bit) = implicit_trapezoid();
    let (ar, gr, br) = ros2_blocks();
    let z = Matrix::zeros(2, 2);
    let alpha = vec![
        vec![et.clone(), et.clone(), et.clone()],
        vec![it.clone(), it, et],
        vec![ar.clone(), ar.clone(), ar],
    ];
    let gamma = vec![
        vec![z.clone(), z.clone(), z.clone()],
        vec![z.clone(), z.clone(), z],
        vec![gr.clone(), gr.clone(), gr],
    ];
    let t = PartitionedTableau::new(
        "imex-ros22",
        MethodClass::Ros,
        CouplingMode::Decoupled,
        alpha,
        gamma,
        vec![bet, bit, br],
        None,
        2,
        None,
    );
    MethodCard::from_tableau(t).with_notes("no embedded weights; fixed step or step doubling only")
}

/// Two-way form of IMEX-ROS22 obtained when the implicit-trapezoidal process
/// vanishes: explicit trapezoid coupled to ros2.
pub fn imex_ros22_two_way() -> MethodCard {
    let (et, bet) = explicit_trapezoid();
    let (ar, gr, br) = ros2_blocks();
    let z = Matrix::zeros(2, 2);
    let t = PartitionedTableau::new(
        "imex-ros22",
        MethodClass::Ros,
        CouplingMode::Decoupled,
        vec![vec![et.clone(), et], vec![ar.clone(), ar]],
        vec![vec![z.clone(), z], vec![gr.clone(), gr]],
        vec![bet, br],
        None,
        2,
        None,
    );
    MethodCard::from_tableau(t).with_notes("two-way form of imex-ros22; fixed step or step doubling only")
}

/// Explicit part of IMEX-ROW3(2)4 as a single-partition tableau.
pub fn row324_explicit_part() -> PartitionedTableau {
    let g = row324_gamma();
    let a = Matrix::from_rows(&[
        vec![],
        vec![2.0 * g],
        vec![quad(g, "-15/16", "103/32", "-5/8"), quad(g, "15/16", "-87/32", "9/8")],
        vec![
            quad(g, "-81/272", "111/136", "265/544"),
            quad(g, "1/16", "1/8", "-25/32"),
            quad(g, "4/17", "-16/17", "22/17"),
        ],
    ]);
    let a = Matrix::from_fn(4, 4, |i, j| if j < a.cols() { a[(i, j)] } else { 0.0 });
    let (b, bhat) = row324_weights(g);
    PartitionedTableau::single("imex-row3-2-4-explicit", MethodClass::Row, a, Matrix::zeros(4, 4), b, Some(bhat), 3, Some(2))
}

/// Rosenbrock-W part of IMEX-ROW3(2)4 as a single-partition tableau.
pub fn row324_implicit_part() -> PartitionedTableau {
    let g = row324_gamma();
    let mut a = Matrix::zeros(4, 4);
    a[(1, 0)] = 2.0 * g;
    a[(2, 0)] = quad(g, "-9/8", "115/32", "-19/32");
    a[(2, 1)] = quad(g, "9/8", "-99/32", "35/32");
    a[(3, 0)] = quad(g, "9/34", "-19/34", "31/68");
    a[(3, 1)] = quad(g, "-1/2", "3/2", "-3/4");
    a[(3, 2)] = quad(g, "4/17", "-16/17", "22/17");
    let mut gm = Matrix::zeros(4, 4);
    for i in 0..4 {
        gm[(i, i)] = g;
    }
    gm[(1, 0)] = -2.0 * g;
    gm[(2, 0)] = quad(g, "3/2", "-157/32", "33/32");
    gm[(2, 1)] = quad(g, "-3/4", "57/32", "-21/32");
    gm[(3, 0)] = quad(g, "-9/17", "19/17", "-7/17");
    gm[(3, 1)] = quad(g, "3", "-8", "2");
    gm[(3, 2)] = quad(g, "-42/17", "100/17", "-27/17");
    let (b, bhat) = row324_weights(g);
    PartitionedTableau::single("imex-row3-2-4-implicit", MethodClass::Row, a, gm, b, Some(bhat), 3, Some(2))
}

fn row324_weights(g: f64) -> (Vec<f64>, Vec<f64>) {
    let b = vec![
        quad(g, "-9/34", "19/34", "3/68"),
        quad(g, "5/2", "-13/2", "5/4"),
        quad(g, "-38/17", "84/17", "-5/17"),
        g,
    ];
    let bhat = vec![
        quad(g, "-57/272", "109/272", "9/136"),
        quad(g, "47/16", "-31/4", "23/16"),
        quad(g, "-40/17", "201/34", "-15/34"),
        quad(g, "-3/8", "23/16", "-1/16"),
    ];
    (b, bhat)
}

/// Two-partition tableau with explicit stage blocks repeated per column.
fn imex_case1(
    name: &str,
    class: MethodClass,
    ae: Matrix,
    ai: Matrix,
    gi: Matrix,
    b: Vec<f64>,
    bhat: Vec<f64>,
    order: u32,
) -> PartitionedTableau {
    let s = b.len();
    let z = Matrix::zeros(s, s);
    PartitionedTableau::new(
        name,
        class,
        CouplingMode::Decoupled,
        vec![vec![ae.clone(), ae], vec![ai.clone(), ai]],
        vec![vec![z.clone(), z], vec![gi.clone(), gi]],
        vec![b.clone(), b],
        Some(vec![bhat.clone(), bhat]),
        order,
        Some(order - 1),
    )
}

pub fn imex_row3_2_4() -> MethodCard {
    let e = row324_explicit_part();
    let i = row324_implicit_part();
    let t = imex_case1(
        "imex-row3-2-4",
        MethodClass::Row,
        e.alpha[0][0].clone(),
        i.alpha[0][0].clone(),
        i.gamma[0][0].clone(),
        e.b[0].clone(),
        e.bhat.as_ref().unwrap()[0].clone(),
        3,
    );
    MethodCard::from_tableau(t).with_notes("coefficients depend on the middle root of 6g^3-18g^2+9g-1")
}

pub fn imex_row3_2_5() -> MethodCard {
    let a = mat(
        &[
            &[],
            &["1/2"],
            &["5062/13725", "4088/13725"],
            &["173067/636265", "495828/636265", "-24705/127253"],
            &["30859/262800", "-547/21900", "183/146", "-18179/52560"],
        ],
        5,
    );
    let g = mat(
        &[
            &["1/4"],
            &["-1/2", "1/4"],
            &["-4762/13725", "-2563/13725", "1/4"],
            &["-156792/636265", "-685353/636265", "82350/127253", "1/4"],
            &["22969/175200", "-3523/21900", "183/4672", "-18179/70080", "1/4"],
        ],
        5,
    );
    let b = vecf(&["5225/21024", "-407/2190", "6039/4672", "-127253/210240", "1/4"]);
    let bhat = vecf(&["9095/539616", "27387/56210", "421083/359744", "-812861/770880", "117/308"]);
    let t = imex_case1("imex-row3-2-5", MethodClass::Row, a.clone(), a, g, b, bhat, 3);
    MethodCard::from_tableau(t).with_notes("stiffly accurate; damps inconsistent initial values up to O(h delta)")
}

pub fn imex_ros4_3_6() -> MethodCard {
    let ae = mat(
        &[
            &[],
            &["1/2"],
            &["4761/11050", "2592/5525"],
            &["3779/99450", "12931/44200", "5/72"],
            &["-9468553/45647550", "18193697/30431700", "-92843/413100", "1352/2025"],
            &["5613193/5967000", "261179/884000", "18091/108000", "-13609/19500", "153/520"],
        ],
        6,
    );
    let ai = mat(
        &[
            &[],
            &["1/2"],
            &["87/140", "39/140"],
            &["-331/1260", "17/28", "1/18"],
            &["84025/231336", "-755/9639", "-425/1944", "4225/5508"],
            &["1091/2160", "29/32", "145/864", "-545/624", "153/520"],
        ],
        6,
    );
    let gi = mat(
        &[
            &["1/4"],
            &["-1/2", "1/4"],
            &["-183/700", "57/700", "1/4"],
            &["257/700", "-731/1400", "-1/8", "1/4"],
            &["33925/231336", "45835/77112", "2725/16524", "-1300/1377", "1/4"],
            &["-47/135", "-25/48", "-65/108", "335/312", "153/1040", "1/4"],
        ],
        6,
    );
    let b = vecf(&["113/720", "37/96", "-125/288", "125/624", "459/1040", "1/4"]);
    let bhat = vecf(&[
        "433321/3204900",
        "121913/569760",
        "-25667/1025568",
        "6024/15431",
        "965889/6172400",
        "1531/11870",
    ]);
    let t = imex_case1("imex-ros4-3-6", MethodClass::Ros, ae, ai, gi, b, bhat, 4);
    MethodCard::from_tableau(t).with_notes("stiffly accurate, L-stable Rosenbrock partner")
}

pub fn builtin(name: &str) -> Result<MethodCard, MethodError> {
    match name {
        "ros2" => Ok(ros2()),
        "imex-ros22" => Ok(imex_ros22()),
        "imex-row3-2-4" => Ok(imex_row3_2_4()),
        "imex-row3-2-5" => Ok(imex_row3_2_5()),
        "imex-ros4-3-6" => Ok(imex_ros4_3_6()),
        "erk-trapezoidal" => Ok(erk_trapezoidal()),
        "irk-trapezoidal" => Ok(irk_trapezoidal()),
        other => Err(MethodError::UnknownMethod(other.to_string())),
    }
}

/// Built-in in the form suited to two-partition (explicit, implicit)
/// problems. IMEX-ROS22 drops its implicit-trapezoidal process.
pub fn builtin_two_way(name: &str) -> Result<MethodCard, MethodError> {
    let card = if name == "imex-ros22" { imex_ros22_two_way() } else { builtin(name)? };
    if card.tableau.n_partitions() != 2 {
        return Err(MethodError::ShapeMismatch(format!(
            "{name} has {} partitions, expected 2",
            card.tableau.n_partitions()
        )));
    }
    Ok(card)
}

/// Couples an explicit and a linearly implicit single-partition tableau with
/// α^{E,I}=α^{E,E}, α^{I,E}=α^{I,I} and γ^{I,E}=γ^{I,I}.
pub fn compose_imex_special_case(
    erk: &PartitionedTableau,
    rosw: &PartitionedTableau,
    shared_b: bool,
) -> Result<PartitionedTableau, MethodError> {
    if erk.n_partitions() != 1 || rosw.n_partitions() != 1 {
        return Err(MethodError::ShapeMismatch("both inputs must have one partition".into()));
    }
    let s = erk.b[0].len();
    if rosw.b[0].len() != s {
        return Err(MethodError::ShapeMismatch(format!(
            "stage counts differ: {s} vs {}",
            rosw.b[0].len()
        )));
    }
    if erk.gamma[0][0].max_abs() != 0.0 {
        return Err(MethodError::ShapeMismatch("explicit tableau has nonzero gamma".into()));
    }
    if shared_b && erk.b[0] != rosw.b[0] {
        return Err(MethodError::ShapeMismatch("shared weights requested but b differs".into()));
    }
    let z = Matrix::zeros(s, s);
    let ae = erk.alpha[0][0].clone();
    let ai = rosw.alpha[0][0].clone();
    let gi = rosw.gamma[0][0].clone();
    let bhat = match (&erk.bhat, &rosw.bhat) {
        (Some(e), Some(i)) => Some(vec![e[0].clone(), i[0].clone()]),
        _ => None,
    };
    let embedded = match (erk.claimed_embedded_order, rosw.claimed_embedded_order, &bhat) {
        (Some(a), Some(b), Some(_)) => Some(a.min(b)),
        _ => None,
    };
    Ok(PartitionedTableau::new(
        format!("compose({},{})", erk.name, rosw.name),
        rosw.class,
        CouplingMode::Decoupled,
        vec![vec![ae.clone(), ae], vec![ai.clone(), ai]],
        vec![vec![z.clone(), z], vec![gi.clone(), gi]],
        vec![erk.b[0].clone(), rosw.b[0].clone()],
        bhat,
        erk.claimed_order.min(rosw.claimed_order),
        embedded,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_root() {
        let g = row324_gamma();
        assert!((g - 0.44).abs() < 0.005);
        assert!((((6.0 * g - 18.0) * g + 9.0) * g - 1.0).abs() <= 1e-15);
        // high-precision reference value of the middle root
        assert!((g - 0.435_866_521_508_458_999_416_019_5).abs() <= 2e-16);
    }

    #[test]
    fn fractions_parse() {
        assert_eq!(parse_fraction("-1/2"), Some(-0.5));
        assert_eq!(parse_fraction("0.25"), Some(0.25));
        assert_eq!(parse_fraction("1/0"), None);
        assert_eq!(parse_fraction("x"), None);
    }

    #[test]
    fn ros2_weights() {
        let g = 1.0 - std::f64::consts::SQRT_2 / 2.0;
        assert_eq!(builtin("ros2").unwrap().tableau.b[0], vec![1.0 - g, g]);
    }

    #[test]
    fn row325_weights() {
        let t = builtin("imex-row3-2-5").unwrap().tableau;
        let want = [5225.0 / 21024.0, -407.0 / 2190.0, 6039.0 / 4672.0, -127253.0 / 210240.0, 0.25];
        assert_eq!(t.b[1], want);
        let c = &t.derive_vectors().c[0][0];
        assert_eq!(&c[..2], &[0.0, 0.5]);
        assert!((c[2] - 9150.0 / 13725.0).abs() < 1e-15);
    }

    #[test]
    fn ros436_gamma_diagonal() {
        let t = builtin("imex-ros4-3-6").unwrap().tableau;
        assert!((0..6).all(|i| t.gamma[1][1][(i, i)] == 0.25));
    }

    #[test]
    fn unknown_method() {
        assert!(matches!(builtin("rk4"), Err(MethodError::UnknownMethod(_))));
    }

    #[test]
    fn roles() {
        assert_eq!(
            builtin("imex-ros22").unwrap().roles,
            vec![Role::Explicit, Role::DiagonallyImplicit, Role::LinearlyImplicit]
        );
        assert_eq!(
            builtin("imex-row3-2-5").unwrap().roles,
            vec![Role::Explicit, Role::LinearlyImplicit]
        );
        assert!(builtin("imex-ros22").unwrap().fixed_step_only());
    }

    #[test]
    fn compose_reproduces_two_way_forms() {
        let two = compose_imex_special_case(&erk_trapezoidal().tableau, &ros2().tableau, false).unwrap();
        let deg = imex_ros22_two_way().tableau;
        assert_eq!((two.alpha, two.gamma, two.b), (deg.alpha, deg.gamma, deg.b));

        let c = compose_imex_special_case(&row324_explicit_part(), &row324_implicit_part(), true).unwrap();
        let t = imex_row3_2_4().tableau;
        assert_eq!((c.alpha, c.gamma, c.b, c.bhat), (t.alpha, t.gamma, t.b, t.bhat));
    }

    #[test]
    fn compose_gamma_free_collapse() {
        let e = erk_trapezoidal().tableau;
        let c = compose_imex_special_case(&e, &e, true).unwrap();
        assert!(c.gamma.iter().flatten().all(|g| g.max_abs() == 0.0));
        assert!(c.alpha.iter().flatten().all(|a| *a == e.alpha[0][0]));
    }

    #[test]
    fn compose_shape_mismatch() {
        let r = compose_imex_special_case(&erk_trapezoidal().tableau, &imex_row3_2_5_implicit(), false);
        assert!(matches!(r, Err(MethodError::ShapeMismatch(_))));
    }

    fn imex_row3_2_5_implicit() -> PartitionedTableau {
        let t = imex_row3_2_5().tableau;
        PartitionedTableau::single("i", MethodClass::Row, t.alpha[1][1].clone(), t.gamma[1][1].clone(), t.b[1].clone(), None, 3, None)
    }

    #[test]
    fn builtins_are_referentially_transparent() {
        for name in BUILTIN_NAMES {
            assert_eq!(builtin(name).unwrap(), builtin(name).unwrap());
        }
    }
}
