mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gark::convergence::{
    dae_convergence, dae_method, dae_reference, fit_problem, ladder_ratio, ode_convergence, ode_reference,
    tables_to_csv, ConvergenceTable, FIT_TAIL, REFERENCE_METHOD,
};
use gark::integrator_dae::{integrate_dae_adaptive, integrate_dae_fixed_with};
use gark::integrator_ode::{integrate_adaptive, integrate_fixed_with, StepController, StepOptions, StepStats};
use gark::methods::{self, MethodCard};
use gark::order_conditions::{
    check_dae_algebraic, check_gark_ros, check_gark_row, check_imex_coupling, embedded_view, ConditionReport,
    OrderError, DEFAULT_TOLERANCE,
};
use gark::stability::{scan_region, Axis};
use gark::tableau::{MethodClass, PartitionedTableau};
use num_complex::Complex64;
use serde::Serialize;

use config::{build_problem, Problem, RunConfig};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
enum Failure {
    Conditions,
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Conditions => 1,
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

type Outcome = Result<(), Failure>;

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Input(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

#[derive(Parser)]
#[command(name = "gark", version, about = "Partitioned Rosenbrock method toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate order-condition residuals for a built-in method or tableau file.
    Check(CheckArgs),
    /// Run a step-size ladder and fit observed orders.
    Converge(ConvergeArgs),
    /// Integrate a problem and write the trajectory.
    Integrate(IntegrateArgs),
    /// Scan |R| over a rectangle of the complex plane.
    Stability(StabilityArgs),
    /// Print a built-in method as tableau JSON.
    ExportTableau(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Ros,
    Row,
}

#[derive(Args)]
struct CheckArgs {
    /// Built-in name or path to a tableau JSON file.
    method: String,
    /// Order to check (defaults to the claimed order).
    #[arg(long)]
    order: Option<u32>,
    /// Condition family (defaults to the method's class).
    #[arg(long, value_enum)]
    class: Option<ClassArg>,
    /// Also check the embedded weights at the embedded order.
    #[arg(long)]
    embedded: bool,
    /// Also check the explicit/implicit coupling conditions.
    #[arg(long)]
    imex: bool,
    /// Also check the index-1 DAE conditions.
    #[arg(long)]
    dae: bool,
    #[arg(long)]
    order_x: Option<u32>,
    #[arg(long)]
    order_z: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// brusselator, zla, logistic or dahlquist.
    problem: Option<String>,
    /// Comma-separated method names.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Step count of the coarsest rung.
    #[arg(long)]
    n0: Option<usize>,
    #[arg(long)]
    rungs: Option<usize>,
    /// Growth of the step count between rungs.
    #[arg(long)]
    ratio: Option<f64>,
    /// Reference run step count (default: 100 times the finest rung).
    #[arg(long)]
    ref_steps: Option<usize>,
    /// CSV destination for the error table.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run-config JSON; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct IntegrateArgs {
    problem: Option<String>,
    #[arg(long)]
    method: Option<String>,
    /// Fixed step size.
    #[arg(long, conflicts_with = "n_steps")]
    h: Option<f64>,
    /// Fixed number of steps.
    #[arg(long)]
    n_steps: Option<usize>,
    /// Adaptive run with this absolute tolerance.
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Trajectory CSV destination (default stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Statistics JSON destination (default stderr).
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    method: String,
    /// Zero-based partition swept over the grid (default: the last one).
    #[arg(long)]
    sweep: Option<usize>,
    /// Real axis as lo:hi:n.
    #[arg(long, default_value = "-10:2:121", allow_hyphen_values = true)]
    re: String,
    /// Imaginary axis as lo:hi:n.
    #[arg(long, default_value = "-10:10:201", allow_hyphen_values = true)]
    im: String,
    /// One value per partition, comma separated, each `re` or `re:im`;
    /// the swept entry is ignored. Defaults to zeros.
    #[arg(long, allow_hyphen_values = true)]
    pin: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    method: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("GARK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Converge(a) => cmd_converge(a),
        Command::Integrate(a) => cmd_integrate(a),
        Command::Stability(a) => cmd_stability(a),
        Command::ExportTableau(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Conditions => {}
                Failure::Input(e) => eprintln!("error: {e:#}"),
                Failure::Runtime(e) => eprintln!("runtime failure: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Built-in name or a tableau JSON file.
fn resolve_method(spec: &str) -> Result<MethodCard, Failure> {
    if let Ok(card) = methods::builtin(spec) {
        return Ok(card);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(input(anyhow!(
            "{spec:?} is neither a built-in ({}) nor a readable file",
            methods::BUILTIN_NAMES.join(", ")
        )));
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {spec}")).map_err(input)?;
    let t = PartitionedTableau::from_json(&text)
        .and_then(PartitionedTableau::validated)
        .map_err(input)?;
    Ok(MethodCard::from_tableau(t))
}

/// Two-partition (explicit, implicit) form used by the coupling and DAE checks.
fn two_way(card: &MethodCard) -> MethodCard {
    methods::builtin_two_way(card.name()).unwrap_or_else(|_| card.clone())
}

fn cmd_check(a: CheckArgs) -> Outcome {
    let card = resolve_method(&a.method)?;
    let t = &card.tableau;
    let order = a.order.unwrap_or(t.claimed_order);
    if !(1..=4).contains(&order) {
        return Err(input(anyhow!("order must be between 1 and 4")));
    }
    let class = match a.class {
        Some(ClassArg::Ros) => MethodClass::Ros,
        Some(ClassArg::Row) => MethodClass::Row,
        None => t.class,
    };
    let family = |t: &PartitionedTableau, p: u32| match class {
        MethodClass::Ros => check_gark_ros(t, p),
        MethodClass::Row => check_gark_row(t, p),
    };
    let mut report = ConditionReport::new(a.tol);
    report.merge(family(t, order));
    if a.embedded {
        let e = embedded_view(t).ok_or_else(|| input(anyhow!("{} has no embedded weights", card.name())))?;
        let p = e.claimed_order;
        report.merge(family(&e, p));
    }
    if a.imex || a.dae {
        let pair = two_way(&card);
        let pt = &pair.tableau;
        if a.imex {
            let exact = class == MethodClass::Ros;
            let r = match check_imex_coupling(pt, order, exact, true) {
                Err(OrderError::StructureMismatch(_)) => check_imex_coupling(pt, order, exact, false),
                other => other,
            };
            report.merge(r.map_err(input)?);
        }
        if a.dae {
            let ox = a.order_x.unwrap_or(order);
            let oz = a.order_z.unwrap_or(order.saturating_sub(1).max(1));
            report.merge(check_dae_algebraic(pt, 0, 1, ox, oz).map_err(input)?);
        }
    }
    emit(a.out.as_deref(), &(report.to_json() + "\n"))?;
    if report.pass {
        Ok(())
    } else {
        for e in report.failures() {
            eprintln!("failed {} {:?}: residual {:e}", e.id, e.indices, e.residual);
        }
        Err(Failure::Conditions)
    }
}

#[derive(Serialize)]
struct ReferenceMeta {
    method: &'static str,
    n_steps: usize,
    h: f64,
}

#[derive(Serialize)]
struct FitSummary {
    method: String,
    fitted_order: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_order_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_order_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

#[derive(Serialize)]
struct ConvergeOutput {
    config: RunConfig,
    fit_tail: usize,
    reference: ReferenceMeta,
    fits: Vec<FitSummary>,
}

fn cmd_converge(a: ConvergeArgs) -> Outcome {
    let base = RunConfig::load(a.config.as_deref()).map_err(input)?;
    let cfg = RunConfig {
        problem: a.problem.or(base.problem.clone()),
        methods: a.methods.or(base.methods.clone()),
        t_final: a.t_final.or(base.t_final),
        n0: a.n0.or(base.n0),
        rungs: a.rungs.or(base.rungs),
        ratio: a.ratio.or(base.ratio),
        ref_steps: a.ref_steps.or(base.ref_steps),
        ..base
    };
    let name = cfg.problem.clone().ok_or_else(|| input(anyhow!("no problem given")))?;
    let problem = build_problem(&name, &cfg).map_err(input)?;
    let names = cfg.methods.clone().unwrap_or_else(|| {
        ["imex-ros22", "imex-row3-2-4", "imex-row3-2-5", "imex-ros4-3-6"]
            .map(String::from)
            .to_vec()
    });
    let cards = names.iter().map(|n| resolve_method(n)).collect::<Result<Vec<_>, _>>()?;
    let (t0, tf_default) = problem.t_span();
    let tf = cfg.t_final.unwrap_or(tf_default);
    let n0 = cfg.n0.unwrap_or(10);
    let rungs = cfg.rungs.unwrap_or(10);
    let ratio = cfg.ratio.unwrap_or(2.0);
    if !(tf > t0) || n0 == 0 || rungs < 2 || !(ratio > 1.0) {
        return Err(input(anyhow!("need t_final > t0, n0 >= 1, rungs >= 2 and ratio > 1")));
    }
    let steps = ladder_ratio(n0, rungs, ratio);
    let n_ref = cfg.ref_steps.unwrap_or(100 * steps[steps.len() - 1]);
    let tables: Vec<ConvergenceTable> = match &problem {
        Problem::Ode(p) => {
            for c in &cards {
                let q = fit_problem(p, c);
                if q.n_partitions() != c.tableau.n_partitions() {
                    return Err(input(anyhow!("{} does not fit the {}-process problem", c.name(), p.n_partitions())));
                }
            }
            let reference = ode_reference(p, t0, tf, n_ref).map_err(runtime)?;
            cards.iter().map(|c| ode_convergence(p, c, &steps, t0, tf, &reference)).collect()
        }
        Problem::Dae(p) => {
            for c in &cards {
                if dae_method(c).tableau.n_partitions() != 2 {
                    return Err(input(anyhow!("{} has no two-process form for DAE runs", c.name())));
                }
            }
            let s0 = p.initial_state().map_err(runtime)?;
            let reference = dae_reference(p, t0, tf, n_ref, &s0).map_err(runtime)?;
            cards.iter().map(|c| dae_convergence(p, c, &steps, t0, tf, &s0, &reference)).collect()
        }
    };
    emit(a.out.as_deref(), &tables_to_csv(&tables))?;
    let dae = matches!(problem, Problem::Dae(_));
    let summary = ConvergeOutput {
        config: RunConfig {
            t_final: Some(tf),
            n0: Some(n0),
            rungs: Some(rungs),
            ratio: Some(ratio),
            ref_steps: Some(n_ref),
            methods: Some(names),
            ..cfg
        },
        fit_tail: FIT_TAIL,
        reference: ReferenceMeta {
            method: REFERENCE_METHOD,
            n_steps: n_ref,
            h: (tf - t0) / n_ref as f64,
        },
        fits: tables
            .iter()
            .map(|t| FitSummary {
                method: t.method.clone(),
                fitted_order: t.fitted_order,
                fitted_order_x: dae.then(|| t.fitted_order_of(|r| r.error_x)),
                fitted_order_z: dae.then(|| t.fitted_order_of(|r| r.error_z)),
                failure: t.failure.clone(),
            })
            .collect(),
    };
    let meta = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    if a.out.is_some() {
        println!("{meta}");
    } else {
        eprintln!("{meta}");
    }
    match tables.iter().find_map(|t| t.failure.as_ref().map(|f| (t.method.clone(), f.clone()))) {
        Some((m, f)) => Err(runtime(anyhow!("{m}: {f}"))),
        None => Ok(()),
    }
}

fn cmd_integrate(a: IntegrateArgs) -> Outcome {
    let base = RunConfig::load(a.config.as_deref()).map_err(input)?;
    let cfg = RunConfig {
        problem: a.problem.or(base.problem.clone()),
        method: a.method.or(base.method.clone()),
        h: a.h.or(base.h),
        n_steps: a.n_steps.or(base.n_steps),
        atol: a.atol.or(base.atol),
        rtol: a.rtol.or(base.rtol),
        t_final: a.t_final.or(base.t_final),
        ..base
    };
    let name = cfg.problem.clone().ok_or_else(|| input(anyhow!("no problem given")))?;
    let problem = build_problem(&name, &cfg).map_err(input)?;
    let card = resolve_method(cfg.method.as_deref().unwrap_or("imex-ros4-3-6"))?;
    let (t0, tf_default) = problem.t_span();
    let tf = cfg.t_final.unwrap_or(tf_default);
    if !(tf > t0) {
        return Err(input(anyhow!("t_final must exceed {t0}")));
    }
    let adaptive = cfg.atol.is_some() || cfg.rtol.is_some();
    let n_steps = match (cfg.h, cfg.n_steps) {
        (Some(h), _) if h > 0.0 => ((tf - t0) / h).round().max(1.0) as usize,
        (Some(_), _) => return Err(input(anyhow!("h must be positive"))),
        (None, Some(n)) if n > 0 => n,
        (None, Some(_)) => return Err(input(anyhow!("n_steps must be positive"))),
        (None, None) if adaptive => 0,
        (None, None) => return Err(input(anyhow!("give --h, --n-steps or --atol/--rtol"))),
    };
    let ctrl = StepController::with_tolerances(cfg.atol.unwrap_or(1e-6), cfg.rtol.unwrap_or(1e-6));
    let (csv, stats): (String, StepStats) = match &problem {
        Problem::Ode(p) => {
            let q = fit_problem(p, &card);
            if q.n_partitions() != card.tableau.n_partitions() {
                return Err(input(anyhow!("{} does not fit the {}-process problem", card.name(), p.n_partitions())));
            }
            if adaptive {
                let r = integrate_adaptive(&q, &card, t0, tf, &q.y0, &ctrl).map_err(runtime)?;
                (r.trajectory.to_csv(), r.stats)
            } else {
                let (tr, st) = integrate_fixed_with(&q, &card, t0, tf, &q.y0, n_steps, StepOptions::default(), true)
                    .map_err(runtime)?;
                (tr.to_csv(), st)
            }
        }
        Problem::Dae(p) => {
            let m = dae_method(&card);
            let s0 = p.initial_state().map_err(runtime)?;
            let (tr, st) = if adaptive {
                integrate_dae_adaptive(p, &m, t0, tf, &s0, &ctrl).map_err(runtime)?
            } else {
                integrate_dae_fixed_with(p, &m, t0, tf, n_steps, &s0, true).map_err(runtime)?
            };
            (tr.to_csv(), st)
        }
    };
    emit(a.out.as_deref(), &csv)?;
    let stats_json = serde_json::to_string_pretty(&stats).map_err(runtime)? + "\n";
    match a.stats.as_deref() {
        Some(p) => fs::write(p, stats_json).with_context(|| format!("writing {}", p.display())).map_err(runtime),
        None => {
            eprint!("{stats_json}");
            Ok(())
        }
    }
}

fn parse_axis(s: &str) -> anyhow::Result<Axis> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("axis {s:?} must look like lo:hi:n");
    }
    let lo: f64 = parts[0].parse().with_context(|| format!("bad bound in {s:?}"))?;
    let hi: f64 = parts[1].parse().with_context(|| format!("bad bound in {s:?}"))?;
    let n: usize = parts[2].parse().with_context(|| format!("bad count in {s:?}"))?;
    Ok(Axis::new(lo, hi, n))
}

fn parse_complex(s: &str) -> anyhow::Result<Complex64> {
    let mut it = s.split(':');
    let re: f64 = it.next().unwrap_or("").trim().parse().with_context(|| format!("bad value {s:?}"))?;
    let im: f64 = match it.next() {
        Some(v) => v.trim().parse().with_context(|| format!("bad value {s:?}"))?,
        None => 0.0,
    };
    if it.next().is_some() {
        bail!("bad value {s:?}");
    }
    Ok(Complex64::new(re, im))
}

fn cmd_stability(a: StabilityArgs) -> Outcome {
    let card = resolve_method(&a.method)?;
    let t = &card.tableau;
    let np = t.n_partitions();
    let sweep = a.sweep.unwrap_or(np - 1);
    let re = parse_axis(&a.re).map_err(input)?;
    let im = parse_axis(&a.im).map_err(input)?;
    let pins = match &a.pin {
        Some(s) => s.split(',').map(parse_complex).collect::<anyhow::Result<Vec<_>>>().map_err(input)?,
        None => vec![Complex64::new(0.0, 0.0); np],
    };
    let grid = scan_region(t, sweep, &pins, re, im).map_err(input)?;
    emit(a.out.as_deref(), &grid.to_csv())
}

fn cmd_export(a: ExportArgs) -> Outcome {
    let card = resolve_method(&a.method)?;
    emit(a.out.as_deref(), &(card.tableau.to_json() + "\n"))
}
