//! End-to-end acceptance checks, run in sequence so each timing is honest.

use std::time::{Duration, Instant};

use gark::convergence::*;
use gark::integrator_dae::{step_dae, DaeState};
use gark::integrator_ode::{relative_difference, step, JacobianKind};
use gark::methods;
use gark::order_conditions::*;
use gark::problems::*;
use gark::stability::{stability_at_stiff_limit, stability_value, taylor_mismatch};
use gark::tableau::PartitionedTableau;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FOUR: [&str; 4] = ["imex-ros22", "imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6"];
const EXPECTED: [f64; 4] = [2.0, 3.0, 3.0, 4.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fits_within(tables: &[ConvergenceTable], tol: f64) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (t, want) in tables.iter().zip(EXPECTED) {
        let ok = t.failure.is_none() && (t.fitted_order - want).abs() <= tol;
        pass &= ok;
        parts.push(format!("{} {:.3}", t.method, t.fitted_order));
        if let Some(f) = &t.failure {
            parts.push(format!("({f})"));
        }
    }
    outcome(pass, parts.join(", "))
}

fn report_max(r: &ConditionReport) -> f64 {
    r.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
}

fn order_suite() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut tally = |name: &str, tol: f64, reports: Vec<ConditionReport>| {
        let mut all = ConditionReport::new(tol);
        for r in reports {
            all.merge(r);
        }
        let worst = report_max(&all);
        let ok = worst <= tol && !all.entries.is_empty();
        pass &= ok;
        parts.push(format!("{name} {} entries max {worst:.1e}", all.entries.len()));
    };

    let ros22 = methods::imex_ros22();
    let ros22_two = methods::imex_ros22_two_way();
    tally(
        "imex-ros22",
        DEFAULT_TOLERANCE,
        vec![
            check_gark_ros(&ros22.tableau, 2),
            check_imex_coupling(&ros22_two.tableau, 2, true, false).unwrap(),
            check_dae_algebraic(&ros22_two.tableau, 0, 1, 2, 2).unwrap(),
        ],
    );

    for (name, ic) in [("imex-row3-2-4", false), ("imex-row3-2-5", true)] {
        let t = methods::builtin(name).unwrap().tableau;
        let emb = embedded_view(&t).expect("embedded weights");
        let mut reports = vec![
            check_gark_row(&t, 3),
            check_gark_row(&emb, 2),
            check_imex_coupling(&t, 3, false, true).unwrap(),
            check_dae_algebraic(&t, 0, 1, 3, 2).unwrap(),
        ];
        if ic {
            let r = check_inconsistent_ic(&t, 0, 1).unwrap();
            reports.push(r.filter("ic.z"));
            reports.push(r.filter("ic.x1"));
        }
        tally(name, ROOT_TOLERANCE, reports);
    }

    let t = methods::imex_ros4_3_6().tableau;
    let emb = embedded_view(&t).expect("embedded weights");
    tally(
        "imex-ros4-3-6",
        DEFAULT_TOLERANCE,
        vec![
            check_gark_ros(&t, 4),
            check_gark_row(&t, 3),
            check_gark_ros(&emb, 3),
            check_imex_coupling(&t, 4, true, true).unwrap(),
            check_dae_algebraic(&t, 0, 1, 4, 3).unwrap(),
        ],
    );
    outcome(pass, parts.join("; "))
}

fn random_lambda(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(-rng.gen_range(0.0..10.0), rng.gen_range(-10.0..10.0))
}

fn linear_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a72);
    let mut worst: f64 = 0.0;
    for name in methods::BUILTIN_NAMES {
        let m = methods::builtin(name).unwrap();
        for _ in 0..200 {
            let (le, li) = (random_lambda(&mut rng), random_lambda(&mut rng));
            let h = rng.gen_range(0.01..1.0);
            let np = m.tableau.n_partitions();
            let (problem, z) = match np {
                1 => (dahlquist_split(&[le + li]), vec![(le + li) * h]),
                2 => (dahlquist_split(&[le, li]), vec![le * h, li * h]),
                _ => {
                    let p = fit_problem(&dahlquist_split(&[le, li]), &m);
                    (p, vec![le * h, Complex64::new(0.0, 0.0), li * h])
                }
            };
            let r = stability_value(&m.tableau, &z).unwrap();
            let y = step(&problem, &m, 0.0, &problem.y0, h).unwrap().y_next;
            let got = Complex64::new(y[0], y[1]);
            worst = worst.max((got - r).norm() / r.norm());
        }
    }
    outcome(worst <= 1e-12, format!("max relative deviation {worst:.2e} over {} methods", methods::BUILTIN_NAMES.len()))
}

fn brusselator_convergence() -> Outcome {
    let cfg = BrusselatorConfig {
        interior_points: 100,
        t_span: (0.0, 2.0),
        ..Default::default()
    };
    let p = brusselator(&cfg);
    let steps = ladder(10, 8, 2);
    let n_ref = 100 * steps.last().unwrap();
    let reference = ode_reference(&p, 0.0, 2.0, n_ref).unwrap();
    let tables: Vec<ConvergenceTable> = FOUR
        .iter()
        .map(|n| ode_convergence(&p, &methods::builtin(n).unwrap(), &steps, 0.0, 2.0, &reference))
        .collect();
    fits_within(&tables, 0.25)
}

/// Per-method ladder starts: the stiff kinetics leaves a narrow window
/// between explicit instability and the roundoff floor.
const ZLA_STARTS: [usize; 4] = [12800, 9051, 4525, 2263];
const ZLA_REFERENCE_STEPS: usize = 1_000_000;

fn zla_convergence() -> Outcome {
    let p = zla();
    let s0 = p.initial_state().unwrap();
    let reference = dae_reference(&p, 0.0, 180.0, ZLA_REFERENCE_STEPS, &s0).unwrap();
    let tables: Vec<ConvergenceTable> = FOUR
        .iter()
        .zip(ZLA_STARTS)
        .map(|(n, start)| {
            let steps = ladder_ratio(start, 8, std::f64::consts::SQRT_2);
            dae_convergence(&p, &methods::builtin(n).unwrap(), &steps, 0.0, 180.0, &s0, &reference)
        })
        .collect();
    fits_within(&tables, 0.3)
}

fn stiff_limit() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let probes = [
        Complex64::new(0.0, 0.0),
        Complex64::new(-0.5, 0.0),
        Complex64::new(-1.0, 1.0),
        Complex64::new(-0.2, -0.7),
    ];
    for name in ["ros2", "imex-row3-2-5", "imex-ros4-3-6"] {
        let t: PartitionedTableau = methods::builtin(name).unwrap().tableau;
        let stiff = t.n_partitions() - 1;
        let mut worst: f64 = 0.0;
        if stiff == 0 {
            worst = stability_at_stiff_limit(&t, 0, &[]).unwrap().norm();
        } else {
            for z in probes {
                worst = worst.max(stability_at_stiff_limit(&t, stiff, &[z]).unwrap().norm());
            }
        }
        let sa = t.is_stiffly_accurate(1e-12);
        let taylor = taylor_mismatch(&t, t.claimed_order).unwrap();
        let ok = worst <= 1e-12 && sa && taylor <= 1e-6;
        pass &= ok;
        parts.push(format!("{name} |R(inf)| {worst:.1e} sa {sa} taylor {taylor:.1e}"));
    }
    outcome(pass, parts.join("; "))
}

fn w_robustness() -> Outcome {
    let base = logistic_split(0.5);
    let exact = vec![logistic_exact(0.5, 1.0)];
    let j0 = base.analytic_jacobian(1, 0.0, &base.y0).unwrap().unwrap();
    let p = base.with_jacobian_kind(1, JacobianKind::Frozen(j0.scaled(1.3)));
    let steps = ladder(8, 8, 2);
    let row = ode_convergence(&p, &methods::imex_row3_2_5(), &steps, 0.0, 1.0, &exact).fitted_order;
    let ros = ode_convergence(&p, &methods::imex_ros22_two_way(), &steps, 0.0, 1.0, &exact).fitted_order;
    outcome(
        row >= 2.7 && ros <= 2.3 && row - ros >= 0.5,
        format!("imex-row3-2-5 {row:.3}, imex-ros22 {ros:.3}"),
    )
}

fn inconsistent_ic() -> Outcome {
    let p = zla();
    let m = methods::imex_row3_2_5();
    let s0 = p.initial_state().unwrap();
    let delta = 1e-4;
    let sd = DaeState::new(&p, s0.x.clone(), s0.z.iter().map(|z| z + delta).collect()).unwrap();
    let increment = |h: f64| {
        let a = step_dae(&p, &m, &sd, h).unwrap().state.z;
        let b = step_dae(&p, &m, &s0, h).unwrap().state.z;
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let floor = increment(1e-7);
    let hs = [0.02, 0.01, 0.005, 0.0025];
    let inc: Vec<f64> = hs.iter().map(|&h| increment(h) - floor).collect();
    let ratios: Vec<f64> = inc.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|&r| r >= 3.5);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(pass, format!("floor {floor:.1e}, halving ratios [{}]", shown.join(", ")))
}

fn jacobian_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    let bruss = brusselator(&BrusselatorConfig::default());
    for _ in 0..20 {
        let y: Vec<f64> = (0..bruss.dim).map(|_| rng.gen_range(0.2..4.0)).collect();
        for m in 0..bruss.n_partitions() {
            let a = bruss.analytic_jacobian(m, 0.0, &y).unwrap().unwrap();
            let fd = bruss.fd_jacobian(m, 0.0, &y).unwrap();
            worst = worst.max(relative_difference(&fd, &a));
        }
    }
    let z = zla();
    for _ in 0..20 {
        let x: Vec<f64> = z.x0.iter().map(|v| v.max(1e-3) * rng.gen_range(0.5..2.0)).collect();
        let zz: Vec<f64> = z.z0.iter().map(|v| v * rng.gen_range(0.5..2.0)).collect();
        let a = z.analytic_jacobians(&x, &zz).unwrap().unwrap();
        let fd = z.fd_jacobians(&x, &zz).unwrap();
        for (f, an) in [(&fd.fx, &a.fx), (&fd.fz, &a.fz), (&fd.gx, &a.gx), (&fd.gz, &a.gz)] {
            if an.max_abs() > 0.0 {
                worst = worst.max(relative_difference(f, an));
            }
        }
    }
    outcome(worst <= 1e-6, format!("max relative difference {worst:.2e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("order-condition suite", order_suite, Duration::from_secs(1)),
        ("linear oracle", linear_oracle, Duration::from_secs(5)),
        ("brusselator convergence", brusselator_convergence, Duration::from_secs(120)),
        ("zla convergence", zla_convergence, Duration::from_secs(60)),
        ("stiff limit and stiff accuracy", stiff_limit, Duration::MAX),
        ("W-robustness", w_robustness, Duration::MAX),
        ("inconsistent initial values", inconsistent_ic, Duration::MAX),
        ("jacobian verification", jacobian_check, Duration::MAX),
    ];
    let mut failed = Vec::new();
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= *budget;
        let pass = o.pass && in_time;
        let budget_note = if *budget == Duration::MAX {
            String::new()
        } else {
            format!(" / {:?}", budget)
        };
        println!(
            "criterion {}: {} {name} [{:.2?}{budget_note}] {}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            took,
            o.detail
        );
        if !pass {
            failed.push(k + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
