use std::fs;
use std::path::Path;

use amtl_core::data::{default_rank, gen_synthetic, load_csv_dir, write_csv_dir, SyntheticSpec};
use amtl_core::model::{loss_gradient, loss_value, LossKind, MtlProblem};
use amtl_core::numerics::{thin_svd, DenseMatrix};
use amtl_core::operators::optimality_residual;
use amtl_core::runtime::{run, CostModel, DelayModel, Mode, RunConfig};
use amtl_core::scheduler::StepPolicy;
use amtl_core::trace::{
    compare_report, export_csv, write_comparison, write_summaries, RunResult, RunSummary,
};
use anyhow::{bail, Context, Result};

use crate::args::{Axis, BenchArgs, CompareArgs, GenArgs, RunArgs, SolverArgs, SyntheticArgs};

fn synthetic_spec(syn: &SyntheticArgs, lambda: f64, seed: u64) -> SyntheticSpec {
    let (t, n, d) = (syn.tasks as usize, syn.samples as usize, syn.dim as usize);
    let mut spec = SyntheticSpec::new(t, n, d, seed);
    spec.true_rank = syn.rank.map_or_else(|| default_rank(d, t), |r| r as usize);
    spec.noise_sigma = syn.noise;
    spec.loss_kind = syn.loss.into();
    spec.regularizer = syn.regularizer.into();
    spec.lambda = lambda;
    spec
}

fn load_problem(data: Option<&Path>, syn: &SyntheticArgs, solver: &SolverArgs) -> Result<MtlProblem> {
    match data {
        Some(dir) => {
            let p = load_csv_dir(dir)?;
            match solver.lambda {
                Some(lambda) => Ok(MtlProblem::with_l2(
                    p.tasks().to_vec(),
                    lambda,
                    p.regularizer(),
                    p.l2_augment(),
                )?),
                None => Ok(p),
            }
        }
        None => {
            let seed = solver.data_seed.unwrap_or(solver.seed);
            Ok(gen_synthetic(&synthetic_spec(syn, solver.lambda.unwrap_or(1.0), seed))?)
        }
    }
}

fn run_config(problem: &MtlProblem, solver: &SolverArgs, mode: Mode) -> Result<RunConfig> {
    let t_count = problem.task_count();
    let eta = solver.eta_scale / problem.lipschitz()?;
    let policy = StepPolicy::new(eta, solver.eta_min, solver.c, solver.tau_max.unwrap_or(2 * t_count))
        .with_dynamic(solver.dynamic_step)
        .with_window(solver.window);
    let mut delay = DelayModel::new(solver.offset, solver.jitter.unwrap_or(solver.offset), solver.seed);
    if let Some(t) = solver.slow_task {
        delay = delay.with_slow_task(t, solver.slow_factor);
    }
    let mut config = RunConfig::new(mode, solver.iterations as usize, policy, solver.seed)
        .with_delay(delay)
        .with_clock(solver.clock.into());
    config.cost_model = CostModel {
        grad_per_flop: solver.kappa,
        prox_per_flop: solver.kappa_svd,
    };
    config.sample_every = solver.sample_every;
    config.real_time_scale = solver.time_scale;
    Ok(config)
}

/// Printed summary: a subset of the `summary.csv` fields.
fn print_summary(s: &RunSummary) {
    println!(
        "mode={} T={} d={} n={} makespan={:.9} final_objective={} measured_tau={}",
        s.mode,
        s.t_count,
        s.dim,
        s.samples,
        s.makespan(),
        s.final_objective,
        s.measured_tau
    );
}

pub fn gen(args: &GenArgs) -> Result<()> {
    let problem = gen_synthetic(&synthetic_spec(&args.synthetic, args.lambda, args.seed))?;
    write_csv_dir(&problem, &args.out)?;
    println!("wrote {} tasks to {}", problem.task_count(), args.out.display());
    Ok(())
}

pub fn run_cmd(args: &RunArgs) -> Result<()> {
    let problem = load_problem(args.data.as_deref(), &args.synthetic, &args.solver)?;
    let config = run_config(&problem, &args.solver, args.mode.into())?;
    let result = run(&problem, &config)?;
    if let Some(out) = &args.out {
        export_csv(&result, out)?;
    }
    print_summary(&result.summary());
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let problem = load_problem(args.data.as_deref(), &args.synthetic, &args.solver)?;
    let mut solver = args.solver.clone();
    solver.sample_every = Some(solver.sample_every.unwrap_or(1));
    let amtl = run(&problem, &run_config(&problem, &solver, Mode::Amtl)?)?;
    let smtl = run(&problem, &run_config(&problem, &solver, Mode::Smtl)?)?;
    export_csv(&amtl, args.out.join("amtl"))?;
    export_csv(&smtl, args.out.join("smtl"))?;
    let report = compare_report(&amtl, &smtl)?;
    write_comparison(&report, args.out.join("comparison.csv"))?;
    print_summary(&amtl.summary());
    print_summary(&smtl.summary());
    println!(
        "makespan_ratio={:.6} objective_difference={}",
        report.makespan_ratio, report.objective_difference
    );
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let base = args.solver.data_seed.unwrap_or(args.solver.seed);
    let mut rows = Vec::with_capacity(2 * args.values.len());
    for (i, &value) in args.values.iter().enumerate() {
        let mut syn = args.synthetic.clone();
        match args.axis {
            Axis::Tasks => syn.tasks = value,
            Axis::Samples => syn.samples = value,
            Axis::Dim => syn.dim = value,
        }
        let lambda = args.solver.lambda.unwrap_or(1.0);
        let problem = gen_synthetic(&synthetic_spec(&syn, lambda, base + i as u64))?;
        for mode in [Mode::Amtl, Mode::Smtl] {
            let result = run(&problem, &run_config(&problem, &args.solver, mode)?)?;
            let summary = result.summary();
            print_summary(&summary);
            rows.push(summary);
        }
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_summaries(&rows, &args.out.join("sweep.csv"))?;
    Ok(())
}

fn check(name: &str, ok: bool, detail: String) -> bool {
    println!("selftest {name}: {} ({detail})", if ok { "ok" } else { "FAILED" });
    ok
}

fn quick_run(problem: &MtlProblem, mode: Mode, iterations: usize, offset: f64) -> Result<RunResult> {
    let eta = 1.0 / problem.lipschitz()?;
    let t = problem.task_count();
    let config = RunConfig::new(mode, iterations, StepPolicy::new(eta, 1e-4, 0.9, 2 * t), 1)
        .with_delay(DelayModel::new(offset, offset, 1));
    Ok(run(problem, &config)?)
}

pub fn selftest() -> Result<()> {
    let mut all = true;

    let a = DenseMatrix::from_fn(8, 5, |i, j| ((i * 7 + j * 3) as f64).sin());
    let err = thin_svd(&a)?.recompose().sub(&a)?.frobenius_norm();
    all &= check("svd", err <= 1e-10, format!("reconstruction error {err:.2e}"));

    let mut worst = 0.0f64;
    for kind in [LossKind::Squared, LossKind::Logistic] {
        let mut spec = SyntheticSpec::new(2, 10, 4, 3);
        spec.loss_kind = kind;
        let p = gen_synthetic(&spec)?;
        let w: Vec<f64> = (0..4).map(|i| (i as f64 + 0.5).cos()).collect();
        let g = loss_gradient(p.task(0), &w)?;
        for i in 0..4 {
            let h = 1e-6;
            let (mut plus, mut minus) = (w.clone(), w.clone());
            plus[i] += h;
            minus[i] -= h;
            let fd = (loss_value(p.task(0), &plus)? - loss_value(p.task(0), &minus)?) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
    }
    all &= check("gradient", worst <= 1e-6, format!("max relative error {worst:.2e}"));

    let p = gen_synthetic(&SyntheticSpec::new(3, 20, 5, 4))?;
    let res = quick_run(&p, Mode::Amtl, 500, 0.0)?;
    let resid = optimality_residual(&p, &res.final_w, 1.0 / p.lipschitz()?)?;
    all &= check("convergence", resid <= 1e-4, format!("residual {resid:.2e}"));

    let again = quick_run(&p, Mode::Amtl, 500, 0.0)?;
    all &= check("determinism", again.events == res.events, "repeated run".into());

    let p = gen_synthetic(&SyntheticSpec::new(5, 20, 10, 5))?;
    let amtl = quick_run(&p, Mode::Amtl, 10, 5.0)?;
    let smtl = quick_run(&p, Mode::Smtl, 10, 5.0)?;
    all &= check(
        "makespan",
        amtl.makespan_ns < smtl.makespan_ns,
        format!("amtl {:.3} s vs smtl {:.3} s", amtl.makespan(), smtl.makespan()),
    );

    if !all {
        bail!("selftest failed");
    }
    Ok(())
}
