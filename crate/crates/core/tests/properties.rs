use std::collections::HashSet;
use std::sync::Arc;

use gark::convergence::{fit_order, fit_problem, ConvergenceRow};
use gark::integrator_dae::{integrate_dae_fixed_with, step_dae};
use gark::integrator_ode::{
    integrate_fixed_with, step, step_imex_fast, JacFn, OdeProblem, Partition, RhsFn, StepOptions, Stepper,
};
use gark::linalg::{lu_factor, lu_solve, norm_inf, Matrix};
use gark::methods::{self, Role, BUILTIN_NAMES};
use gark::order_conditions::{check_gark_ros, check_gark_row, ROOT_TOLERANCE};
use gark::problems::*;
use gark::stability::{stability_at_stiff_limit, stability_value, taylor_mismatch};
use gark::tableau::PartitionedTableau;
use num_complex::Complex64;
use proptest::prelude::*;

fn lambda() -> impl Strategy<Value = Complex64> {
    (-20.0..0.0f64, -20.0..20.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn scaled(t: &PartitionedTableau, s: f64) -> PartitionedTableau {
    let mut out = t.clone();
    for row in out.alpha.iter_mut() {
        for blk in row.iter_mut() {
            *blk = blk.scaled(s);
        }
    }
    out
}

/// y' = cos(t)·y + (sin(t) − y), both parts carrying their time derivative.
fn forced_problem() -> OdeProblem {
    let f1: RhsFn = Arc::new(|t, y: &[f64], out: &mut [f64]| {
        out[0] = t.cos() * y[0];
        Ok(())
    });
    let j1: JacFn = Arc::new(|t, _, m: &mut Matrix| {
        m[(0, 0)] = t.cos();
        Ok(())
    });
    let t1: RhsFn = Arc::new(|t, y: &[f64], out: &mut [f64]| {
        out[0] = -t.sin() * y[0];
        Ok(())
    });
    let f2: RhsFn = Arc::new(|t, y: &[f64], out: &mut [f64]| {
        out[0] = t.sin() - y[0];
        Ok(())
    });
    let j2: JacFn = Arc::new(|_, _, m: &mut Matrix| {
        m[(0, 0)] = -1.0;
        Ok(())
    });
    let t2: RhsFn = Arc::new(|t, _: &[f64], out: &mut [f64]| {
        out[0] = t.cos();
        Ok(())
    });
    OdeProblem::new(
        "forced",
        vec![
            Partition::new(f1).with_jacobian(j1).with_time_derivative(t1),
            Partition::new(f2).with_jacobian(j2).with_time_derivative(t2),
        ],
        vec![0.7],
        (0.0, 1.0),
    )
}

#[test]
fn builtins_validate() {
    for name in BUILTIN_NAMES {
        let card = methods::builtin(name).unwrap();
        assert!(card.tableau.validate().is_valid(), "{name}");
        assert_eq!(card.roles.len(), card.tableau.n_partitions());
        for (q, role) in card.roles.iter().enumerate() {
            if *role == Role::Explicit {
                assert_eq!(card.tableau.gamma[q][q].max_abs(), 0.0, "{name}");
            }
        }
        assert_eq!(card, methods::builtin(name).unwrap());
    }
}

#[test]
fn global_assembly_reslices() {
    for name in BUILTIN_NAMES {
        let t = methods::builtin(name).unwrap().tableau;
        let g = t.assemble_global();
        let s = t.stage_counts();
        for q in 0..s.len() {
            for m in 0..s.len() {
                assert_eq!(g.a.block(g.offsets[q], g.offsets[m], s[q], s[m]), t.alpha[q][m]);
                assert_eq!(g.g.block(g.offsets[q], g.offsets[m], s[q], s[m]), t.gamma[q][m]);
            }
        }
    }
}

#[test]
fn row_order_implies_ros_order() {
    for name in ["imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6"] {
        let t = methods::builtin(name).unwrap().tableau;
        assert!(check_gark_row(&t, 3).max_residual <= ROOT_TOLERANCE);
        assert!(check_gark_ros(&t, 3).max_residual <= ROOT_TOLERANCE, "{name}");
    }
}

#[test]
fn logistic_orders() {
    let p = logistic_split(0.5);
    let exact = logistic_exact(0.5, 1.0);
    for name in ["imex-ros22", "imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6"] {
        let m = methods::builtin(name).unwrap();
        let q = fit_problem(&p, &m);
        let rows: Vec<ConvergenceRow> = [16, 32, 64, 128, 256]
            .into_iter()
            .map(|n| {
                let (tr, _) =
                    integrate_fixed_with(&q, &m, 0.0, 1.0, &q.y0, n, StepOptions::default(), false).unwrap();
                ConvergenceRow {
                    n_steps: n,
                    h: 1.0 / n as f64,
                    error: (tr.last().unwrap()[0] - exact).abs(),
                    error_x: None,
                    error_z: None,
                }
            })
            .collect();
        let p_obs = fit_order(&rows, 5);
        assert!((p_obs - m.tableau.claimed_order as f64).abs() <= 0.25, "{name} {p_obs}");
    }
}

#[test]
fn lu_count_matches_distinct_diagonals() {
    let p = brusselator(&BrusselatorConfig {
        interior_points: 10,
        ..Default::default()
    });
    for name in ["ros2", "imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6"] {
        let card = methods::builtin(name).unwrap();
        let t = &card.tableau;
        let q = if t.n_partitions() == 1 {
            dahlquist_split(&[Complex64::new(-3.0, 1.0)])
        } else {
            fit_problem(&p, &card)
        };
        let mut expected = HashSet::new();
        for (part, role) in card.roles.iter().enumerate() {
            if *role == Role::LinearlyImplicit {
                let g = &t.gamma[part][part];
                for i in 0..g.rows() {
                    if g[(i, i)] != 0.0 {
                        expected.insert((part, g[(i, i)].to_bits()));
                    }
                }
            }
        }
        let mut stepper = Stepper::new(&q, t, StepOptions::default()).unwrap();
        stepper.step(0.0, &q.y0, 1e-3).unwrap();
        assert_eq!(stepper.stats.lu_factorizations, expected.len(), "{name}");
    }
}

#[test]
fn imex_fast_matches_generic() {
    let p = brusselator(&BrusselatorConfig::default());
    for name in ["imex-ros22", "imex-row3-2-5", "imex-ros4-3-6"] {
        let m = methods::builtin(name).unwrap();
        let q = fit_problem(&p, &m);
        let a = step(&q, &m, 0.0, &q.y0, 1e-3).unwrap().y_next;
        let b = step_imex_fast(&q, &m, 0.0, &q.y0, 1e-3).unwrap().y_next;
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        assert!(norm_inf(&diff) <= 1e-12 * norm_inf(&a), "{name}");
    }
}

#[test]
fn stiff_accuracy_preserves_constraint() {
    let p = zla();
    let s0 = p.initial_state().unwrap();
    for name in ["imex-row3-2-5", "imex-ros4-3-6"] {
        let m = methods::builtin(name).unwrap();
        let (tr, _) = integrate_dae_fixed_with(&p, &m, 0.0, 20.0, 2000, &s0, true).unwrap();
        for s in &tr.states {
            assert!(s.constraint_residual <= 1e-10 * s.z.iter().map(|z| z.abs()).fold(0.0, f64::max), "{name}");
        }
    }
}

#[test]
fn stiff_limit_vanishes_for_stiffly_accurate() {
    for name in BUILTIN_NAMES {
        let t = methods::builtin(name).unwrap().tableau;
        if t.is_stiffly_accurate(1e-12) {
            let stiff = t.n_partitions() - 1;
            let zeros = vec![Complex64::new(0.0, 0.0); stiff];
            // A singular reduced matrix leaves the limit undefined.
            if let Ok(r) = stability_at_stiff_limit(&t, stiff, &zeros) {
                assert!(r.norm() <= 1e-12, "{name}");
            }
        }
        assert!(taylor_mismatch(&t, t.claimed_order).unwrap() <= 1e-6, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_step_is_stability_function(le in lambda(), li in lambda(), h in 0.01..0.5f64, k in 0..BUILTIN_NAMES.len()) {
        let m = methods::builtin(BUILTIN_NAMES[k]).unwrap();
        let np = m.tableau.n_partitions();
        let (p, z) = match np {
            1 => (dahlquist_split(&[le + li]), vec![(le + li) * h]),
            2 => (dahlquist_split(&[le, li]), vec![le * h, li * h]),
            _ => (fit_problem(&dahlquist_split(&[le, li]), &m), vec![le * h, Complex64::new(0.0, 0.0), li * h]),
        };
        let r = stability_value(&m.tableau, &z).unwrap();
        let y = step(&p, &m, 0.0, &p.y0, h).unwrap().y_next;
        prop_assert!((Complex64::new(y[0], y[1]) - r).norm() <= 1e-13 * r.norm().max(1.0));
    }

    #[test]
    fn stability_at_origin_is_one(k in 0..BUILTIN_NAMES.len()) {
        let t = methods::builtin(BUILTIN_NAMES[k]).unwrap().tableau;
        let z = vec![Complex64::new(0.0, 0.0); t.n_partitions()];
        prop_assert_eq!(stability_value(&t, &z).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn fit_order_ignores_row_order(errs in prop::collection::vec(1e-12..1.0f64, 3..9), seed in any::<u64>()) {
        let rows: Vec<ConvergenceRow> = errs.iter().enumerate().map(|(k, &e)| ConvergenceRow {
            n_steps: 10 << k,
            h: 1.0 / (10 << k) as f64,
            error: e,
            error_x: None,
            error_z: None,
        }).collect();
        let mut shuffled = rows.clone();
        shuffled.rotate_left((seed % rows.len() as u64) as usize);
        shuffled.reverse();
        prop_assert_eq!(fit_order(&rows, 5), fit_order(&shuffled, 5));
    }

    #[test]
    fn time_split_leaves_step_unchanged(tau in 0.0..1.0f64, h in 0.01..0.2f64, t0 in 0.0..3.0f64) {
        let p = forced_problem();
        for name in ["imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6"] {
            let m = methods::builtin(name).unwrap();
            prop_assume!(m.tableau.is_internally_consistent(1e-12));
            let run = |split: Vec<f64>| {
                let opts = StepOptions { time_split: Some(split), ..Default::default() };
                Stepper::new(&p, &m.tableau, opts).unwrap().step(t0, &[0.7], h).unwrap().y_next[0]
            };
            let a = run(vec![1.0, 0.0]);
            let b = run(vec![tau, 1.0 - tau]);
            prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0), "{} {} {}", name, a, b);
        }
    }

    #[test]
    fn lu_solves_recover_solution(n in 1usize..9, entries in prop::collection::vec(-1.0..1.0f64, 64), x in prop::collection::vec(-5.0..5.0f64, 8)) {
        let a = Matrix::from_fn(n, n, |i, j| entries[i * 8 + j] + if i == j { 4.0 } else { 0.0 });
        let x = &x[..n];
        let rhs = a.mul_vec(x);
        let sol = lu_solve(&lu_factor(&a).unwrap(), &rhs).unwrap();
        let err: Vec<f64> = sol.iter().zip(x).map(|(s, t)| s - t).collect();
        prop_assert!(norm_inf(&err) <= 1e-11 * norm_inf(x).max(1e-300));
        let csol = lu_solve(&lu_factor(&a.to_complex()).unwrap(), &rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>()).unwrap();
        for (c, r) in csol.iter().zip(&sol) {
            prop_assert!((c.re - r).abs() <= 1e-12 * r.abs().max(1.0) && c.im == 0.0);
        }
    }

    #[test]
    fn row_sums_scale_linearly(s in -3.0..3.0f64, k in 0..BUILTIN_NAMES.len()) {
        let t = methods::builtin(BUILTIN_NAMES[k]).unwrap().tableau;
        let d = t.derive_vectors();
        let ds = scaled(&t, s).derive_vectors();
        for (row, row_s) in d.c.iter().zip(&ds.c) {
            for (c, cs) in row.iter().zip(row_s) {
                for (x, y) in c.iter().zip(cs) {
                    prop_assert!((x * s - y).abs() <= 1e-14 * (1.0 + x.abs() * s.abs()));
                }
            }
        }
    }

    #[test]
    fn doubling_b_doubles_first_order_lhs(k in 0..BUILTIN_NAMES.len()) {
        let t = methods::builtin(BUILTIN_NAMES[k]).unwrap().tableau;
        let mut t2 = t.clone();
        for b in t2.b.iter_mut() {
            b.iter_mut().for_each(|v| *v *= 2.0);
        }
        let one = check_gark_ros(&t, 1);
        let two = check_gark_ros(&t2, 1);
        for (a, b) in one.entries.iter().zip(&two.entries) {
            prop_assert!((2.0 * a.lhs - b.lhs).abs() <= 1e-14);
        }
    }

    #[test]
    fn tableau_json_round_trips(s in 1e-3..1e3f64, k in 0..BUILTIN_NAMES.len()) {
        let t = scaled(&methods::builtin(BUILTIN_NAMES[k]).unwrap().tableau, s);
        prop_assert_eq!(PartitionedTableau::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn dae_step_keeps_constraint(h in 1e-4..0.01f64, k in 0usize..2) {
        let p = zla();
        let m = methods::builtin(["imex-row3-2-5", "imex-ros4-3-6"][k]).unwrap();
        let s0 = p.initial_state().unwrap();
        let s1 = step_dae(&p, &m, &s0, h).unwrap().state;
        prop_assert!(s1.constraint_residual <= 1e-10 * s1.z[0].abs());
    }
}
