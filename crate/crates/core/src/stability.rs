//! Linear stability of partitioned schemes on y' = Σ λ^{m} y.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{lu_factor, CMatrix, LinalgError};
use crate::tableau::PartitionedTableau;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("expected {expected} partition values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("singular stage system: {0}")]
    Singular(#[from] LinalgError),
    #[error("partition index {0} out of range")]
    BadPartition(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityPoint {
    pub z: Vec<Complex64>,
    pub r: Complex64,
    pub magnitude: f64,
}

/// Per-stage z, i.e. the diagonal of Z.
fn stage_z(t: &PartitionedTableau, z: &[Complex64]) -> Result<Vec<Complex64>, StabilityError> {
    if z.len() != t.n_partitions() {
        return Err(StabilityError::Arity {
            expected: t.n_partitions(),
            got: z.len(),
        });
    }
    Ok(t.stage_counts()
        .iter()
        .zip(z)
        .flat_map(|(&s, &zq)| std::iter::repeat_n(zq, s))
        .collect())
}

fn weighted_sum(b: &[f64], u: &[Complex64]) -> Complex64 {
    b.iter().zip(u).map(|(bi, ui)| ui * bi).sum()
}

/// R(Z) = 1 + bᵀ(I − Z B)⁻¹ Z 1.
pub fn stability_value(t: &PartitionedTableau, z: &[Complex64]) -> Result<Complex64, StabilityError> {
    let zs = stage_z(t, z)?;
    let g = t.assemble_global();
    let bm = g.b_mat.to_complex();
    let n = zs.len();
    let m = CMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        id - zs[i] * bm[(i, j)]
    });
    let u = lu_factor(&m)?.solve(&zs);
    Ok(Complex64::new(1.0, 0.0) + weighted_sum(&g.b, &u))
}

/// The same function via the second algebraic form 1 + bᵀ Z (I − B Z)⁻¹ 1.
pub fn stability_value_alt(t: &PartitionedTableau, z: &[Complex64]) -> Result<Complex64, StabilityError> {
    let zs = stage_z(t, z)?;
    let g = t.assemble_global();
    let bm = g.b_mat.to_complex();
    let n = zs.len();
    let m = CMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        id - bm[(i, j)] * zs[j]
    });
    let v = lu_factor(&m)?.solve(&vec![Complex64::new(1.0, 0.0); n]);
    let zv: Vec<Complex64> = zs.iter().zip(&v).map(|(a, b)| a * b).collect();
    Ok(Complex64::new(1.0, 0.0) + weighted_sum(&g.b, &zv))
}

pub fn stability_point(t: &PartitionedTableau, z: &[Complex64]) -> Result<StabilityPoint, StabilityError> {
    let r = stability_value(t, z)?;
    Ok(StabilityPoint {
        z: z.to_vec(),
        r,
        magnitude: r.norm(),
    })
}

/// Limit of R as z^{stiff} → ∞ with the other partitions held at `z_other`.
///
/// `z_other` holds either one value per non-stiff partition (in order) or one
/// value per partition, in which case the stiff entry is ignored.
pub fn stability_at_stiff_limit(
    t: &PartitionedTableau,
    stiff: usize,
    z_other: &[Complex64],
) -> Result<Complex64, StabilityError> {
    let np = t.n_partitions();
    if stiff >= np {
        return Err(StabilityError::BadPartition(stiff));
    }
    let full: Vec<Complex64> = if z_other.len() == np {
        z_other.to_vec()
    } else if z_other.len() + 1 == np {
        let mut v = z_other.to_vec();
        v.insert(stiff, Complex64::new(0.0, 0.0));
        v
    } else {
        return Err(StabilityError::Arity {
            expected: np - 1,
            got: z_other.len(),
        });
    };
    let zs = stage_z(t, &full)?;
    let g = t.assemble_global();
    let off = g.offsets[stiff];
    let s_stiff = t.b[stiff].len();
    let is_stiff = |i: usize| i >= off && i < off + s_stiff;
    let bm = g.b_mat.to_complex();
    let n = zs.len();
    // rows outside S: u_i − z_i (B u)_i = z_i; rows in S (divided by z): −(B u)_i = 1.
    let one = Complex64::new(1.0, 0.0);
    let m = CMatrix::from_fn(n, n, |i, j| {
        if is_stiff(i) {
            -bm[(i, j)]
        } else {
            let id = if i == j { one } else { Complex64::new(0.0, 0.0) };
            id - zs[i] * bm[(i, j)]
        }
    });
    let rhs: Vec<Complex64> = (0..n).map(|i| if is_stiff(i) { one } else { zs[i] }).collect();
    let u = lu_factor(&m)?.solve(&rhs);
    Ok(one + weighted_sum(&g.b, &u))
}

/// Samples `[lo, hi]` at `n` points; a single point sits at `lo`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.n {
            0 => vec![],
            1 => vec![self.lo],
            n => (0..n)
                .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Row-major |R| samples: one row per imaginary value, one column per real value.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub abs_r: Vec<f64>,
}

impl RegionGrid {
    pub fn get(&self, im_idx: usize, re_idx: usize) -> f64 {
        self.abs_r[im_idx * self.re.len() + re_idx]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,absR\n");
        for (r, &im) in self.im.iter().enumerate() {
            for (c, &re) in self.re.iter().enumerate() {
                out.push_str(&format!("{re:.16e},{im:.16e},{:.16e}\n", self.get(r, c)));
            }
        }
        out
    }
}

/// Sweeps partition `sweep` over the grid with all others pinned to `pins`
/// (one value per partition; the swept entry is ignored). Singular points are NaN.
pub fn scan_region(
    t: &PartitionedTableau,
    sweep: usize,
    pins: &[Complex64],
    re: Axis,
    im: Axis,
) -> Result<RegionGrid, StabilityError> {
    let np = t.n_partitions();
    if sweep >= np {
        return Err(StabilityError::BadPartition(sweep));
    }
    if pins.len() != np {
        return Err(StabilityError::Arity {
            expected: np,
            got: pins.len(),
        });
    }
    if re.n == 0 || im.n == 0 {
        return Err(StabilityError::InvalidGrid("grid needs at least one point per axis".into()));
    }
    let (rv, iv) = (re.values(), im.values());
    let abs_r: Vec<f64> = iv
        .par_iter()
        .flat_map_iter(|&y| {
            let rv = &rv;
            rv.iter().map(move |&x| {
                let mut z = pins.to_vec();
                z[sweep] = Complex64::new(x, y);
                stability_value(t, &z).map(|r| r.norm()).unwrap_or(f64::NAN)
            })
        })
        .collect();
    Ok(RegionGrid { re: rv, im: iv, abs_r })
}

/// Taylor coefficients of z ↦ R(z/N,…,z/N) from a discrete Cauchy integral,
/// so that the reference is exp(z) whatever the number of partitions.
pub fn taylor_coefficients(t: &PartitionedTableau, radius: f64, count: usize) -> Result<Vec<f64>, StabilityError> {
    let m = 64usize.max(4 * count);
    let np = t.n_partitions();
    let mut vals = Vec::with_capacity(m);
    for j in 0..m {
        let z = Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / m as f64);
        vals.push(stability_value(t, &vec![z / np as f64; np])?);
    }
    Ok((0..count)
        .map(|k| {
            let s: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64))
                .sum();
            s.re / (m as f64 * radius.powi(k as i32))
        })
        .collect())
}

/// Largest relative mismatch between the Taylor coefficients of R and those
/// of exp through `order`.
pub fn taylor_mismatch(t: &PartitionedTableau, order: u32) -> Result<f64, StabilityError> {
    let coeffs = taylor_coefficients(t, 1e-2, order as usize + 1)?;
    let mut fact = 1.0;
    let mut worst: f64 = 0.0;
    for (k, a) in coeffs.iter().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        worst = worst.max(((a - 1.0 / fact) * fact).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::methods;
    use crate::tableau::MethodClass;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zero_gives_one() {
        for name in methods::BUILTIN_NAMES {
            let t = methods::builtin(name).unwrap().tableau;
            let r = stability_value(&t, &vec![c(0.0); t.n_partitions()]).unwrap();
            assert_eq!(r, c(1.0));
        }
    }

    #[test]
    fn ros2_closed_form() {
        let t = methods::ros2().tableau;
        let gm = 1.0 - 1.0 / 2f64.sqrt();
        // frozen high-precision values of (1+(1-2γ)z)/(1-γz)^2
        let frozen = [
            (-0.1, 0.9048004636413377491252671),
            (-1.0, 0.3504402627602818347427882),
            (-10.0, -0.2035522279679721333864004),
        ];
        for (z, want) in frozen {
            let closed = (1.0 + (1.0 - 2.0 * gm) * z) / (1.0 - gm * z).powi(2);
            let r = stability_value(&t, &[c(z)]).unwrap();
            assert!((r.re - want).abs() < 1e-13, "{z}");
            assert!((closed - want).abs() < 1e-13);
            assert!(r.im.abs() < 1e-15);
        }
    }

    #[test]
    fn erk_trapezoid_at_minus_two() {
        let t = methods::erk_trapezoidal().tableau;
        let r = stability_value(&t, &[c(-2.0)]).unwrap();
        assert!((r - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn both_forms_agree() {
        for name in methods::BUILTIN_NAMES {
            let t = methods::builtin(name).unwrap().tableau;
            let z: Vec<Complex64> = (0..t.n_partitions()).map(|k| Complex64::new(-0.7 * (k + 1) as f64, 0.3)).collect();
            let a = stability_value(&t, &z).unwrap();
            let b = stability_value_alt(&t, &z).unwrap();
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()), "{name}");
        }
    }

    #[test]
    fn stiff_limit_matches_large_z() {
        let t = methods::ros2().tableau;
        let lim = stability_at_stiff_limit(&t, 0, &[]).unwrap();
        assert!(lim.norm() < 1e-12);
        let t = methods::imex_row3_2_5().tableau;
        let lim = stability_at_stiff_limit(&t, 1, &[c(-0.5)]).unwrap();
        let big = stability_value(&t, &[c(-0.5), c(-1e10)]).unwrap();
        assert!((lim - big).norm() < 1e-6);
    }

    #[test]
    fn region_single_point_and_lens() {
        let t = methods::erk_trapezoidal().tableau;
        let g = scan_region(&t, 0, &[c(0.0)], Axis::new(-2.0, 0.0, 1), Axis::new(0.0, 0.0, 1)).unwrap();
        assert_eq!(g.abs_r.len(), 1);
        assert!((g.abs_r[0] - 1.0).abs() < 1e-14);
        let g = scan_region(&t, 0, &[c(0.0)], Axis::new(-3.0, 1.0, 9), Axis::new(-3.0, 3.0, 7)).unwrap();
        assert_eq!(g.abs_r.len(), 63);
        assert!(g.get(3, 2) <= 1.0 + 1e-14);
        assert!(scan_region(&t, 0, &[c(0.0)], Axis::new(0.0, 1.0, 0), Axis::new(0.0, 0.0, 1)).is_err());
    }

    #[test]
    fn implicit_euler_like_is_a_stable() {
        let t = PartitionedTableau::single(
            "ie",
            MethodClass::Ros,
            Matrix::zeros(1, 1),
            Matrix::from_rows(&[vec![1.0]]),
            vec![1.0],
            None,
            1,
            None,
        );
        let g = scan_region(&t, 0, &[c(0.0)], Axis::new(-5.0, 0.0, 11), Axis::new(-5.0, 5.0, 11)).unwrap();
        assert!(g.abs_r.iter().all(|&v| v <= 1.0 + 1e-15));
    }

    #[test]
    fn taylor_matches_exp() {
        for name in methods::BUILTIN_NAMES {
            let card = methods::builtin(name).unwrap();
            let worst = taylor_mismatch(&card.tableau, card.tableau.claimed_order).unwrap();
            assert!(worst < 1e-6, "{name}: {worst}");
        }
    }
}
