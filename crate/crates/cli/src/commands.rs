use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wslabel::io::{self as wio, ConfigEcho, DatasetBundle, RunReport, SolverDiagnostics};
use wslabel::{
    best_approximator, bf_decompose, consistency_run, ds_decompose, ds_dominance_threshold,
    e_step, estimate_polytope_from_pool, evaluate, gen_ocds, inconsistency_demo, majority_vote,
    m_step, ocds_closed_form_gap, run_em, solve, BfSolution, ConstraintSystem, EmOptions, Error,
    PolytopeSpec, RulePredictionMatrix, SoftLabeling, SynthConfig,
};

use crate::args::{
    BestApproxArgs, Command, DataArgs, DecomposeArgs, DemoArgs, DsEmArgs, EstimateArgs, EvalArgs,
    InitArg, MvArgs, PoolArgs, SolveArgs, SynthArgs,
};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(Error::Io(e))
    }
}

type Outcome = std::result::Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Solve(a) => cmd_solve(a),
        Command::BestApprox(a) => cmd_best_approx(a),
        Command::DsEm(a) => cmd_ds_em(a),
        Command::Mv(a) => cmd_mv(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Synth(a) => cmd_synth(a),
        Command::DemoInconsistency(a) => cmd_demo(a),
    }
}

fn load(data: &DataArgs, labels: Option<&Path>, pool: Option<&Path>) -> Result<DatasetBundle, Failure> {
    Ok(DatasetBundle::load(&data.preds, data.k, labels, pool)?)
}

fn file_error(path: &Path, source: io::Error) -> Failure {
    Failure::Data(Error::File { path: path.display().to_string(), source })
}

fn write_file(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Outcome {
    fs::write(path.as_ref(), contents).map_err(|e| file_error(path.as_ref(), e))
}

fn emit_labeling(path: Option<&Path>, g: &SoftLabeling) -> Outcome {
    match path {
        Some(p) => wio::save_labeling(p, g)?,
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            wio::write_labeling(&mut out, g)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn save_report(path: Option<&Path>, report: &RunReport) -> Outcome {
    if let Some(p) = path {
        report.save(p)?;
    }
    Ok(())
}

fn diagnostics(sol: &BfSolution) -> SolverDiagnostics {
    SolverDiagnostics {
        value: sol.value,
        iterations: sol.iterations,
        grad_norm: sol.grad_norm,
        converged: sol.converged,
        diverged: sol.diverged,
    }
}

fn summarize(sol: &BfSolution) {
    eprintln!(
        "value={:.16e} iterations={} grad_norm={:.3e} converged={} diverged={}",
        sol.value, sol.iterations, sol.grad_norm, sol.converged, sol.diverged
    );
}

fn not_converged(sol: &BfSolution) -> Failure {
    let why = if sol.diverged { "weights diverged, the bounds are probably infeasible" } else { "iteration limit reached" };
    Failure::Data(Error::NotConverged(format!(
        "{why}: gradient norm {:e} after {} iterations",
        sol.grad_norm, sol.iterations
    )))
}

fn labels_for(bundle: &DatasetBundle) -> Result<Option<SoftLabeling>, Failure> {
    Ok(bundle.labels.as_ref().map(|l| l.to_soft(bundle.k)).transpose()?)
}

/// Draws `size` distinct pool points, keeping their original order.
fn subsample(
    pool: &RulePredictionMatrix,
    labels: &[usize],
    size: usize,
    seed: u64,
) -> Result<(RulePredictionMatrix, Vec<usize>), Failure> {
    if size == 0 || size > pool.n() {
        return Err(Failure::Data(Error::InvalidInput(format!(
            "sample size {size} not in 1..={}",
            pool.n()
        ))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, pool.n(), size).into_vec();
    idx.sort_unstable();
    let labels = idx.iter().map(|&i| labels[i]).collect();
    Ok((pool.select(&idx)?, labels))
}

fn pool_bounds(bundle: &DatasetBundle, args: &PoolArgs) -> Result<PolytopeSpec, Failure> {
    let (pool, labels) = bundle.pool.as_ref().expect("pool loaded by caller");
    let spec = match args.sample_size {
        Some(size) => {
            let (pool, labels) = subsample(pool, labels, size, args.seed)?;
            estimate_polytope_from_pool(&bundle.preds, &pool, &labels, args.conf)?
        }
        None => estimate_polytope_from_pool(&bundle.preds, pool, labels, args.conf)?,
    };
    Ok(spec)
}

fn cmd_solve(a: SolveArgs) -> Outcome {
    let bundle = load(&a.data, a.labels.as_deref(), a.pool.labeled.as_deref())?;
    let mut config = ConfigEcho { tol: Some(a.solver.tol), ..ConfigEcho::default() };
    let spec = match &a.bounds {
        Some(path) => {
            config.eps_source = Some(format!("file:{}", path.display()));
            wio::load_bounds(path)?
        }
        None => {
            config.eps_source = Some("wilson".into());
            config.confidence = Some(a.pool.conf);
            if a.pool.sample_size.is_some() {
                config.seed = Some(a.pool.seed);
            }
            pool_bounds(&bundle, &a.pool)?
        }
    };
    let sys = ConstraintSystem::build(&bundle.preds)?;
    let sol = solve(&sys, &spec, &a.solver.options())?;
    summarize(&sol);
    emit_labeling(a.out_pred.as_deref(), &sol.prediction)?;

    let mut report = RunReport::new("bf");
    report.config = config;
    report.solver = Some(diagnostics(&sol));
    if let Some(eta) = labels_for(&bundle)? {
        report.loss = Some(evaluate(&sol.prediction, &eta)?);
    }
    save_report(a.report.as_deref(), &report)?;
    if sol.converged {
        Ok(())
    } else {
        Err(not_converged(&sol))
    }
}

fn cmd_best_approx(a: BestApproxArgs) -> Outcome {
    let bundle = load(&a.data, Some(&a.labels), None)?;
    let eta = labels_for(&bundle)?.expect("labels given");
    let sys = ConstraintSystem::build(&bundle.preds)?;
    let sol = best_approximator(&sys, &eta, &a.solver.options())?;
    summarize(&sol);
    emit_labeling(a.out_pred.as_deref(), &sol.prediction)?;

    let mut report = RunReport::new("best_approx");
    report.config.tol = Some(a.solver.tol);
    report.config.eps_source = Some("exact".into());
    report.solver = Some(diagnostics(&sol));
    report.loss = Some(evaluate(&sol.prediction, &eta)?);
    save_report(a.report.as_deref(), &report)?;
    if sol.converged {
        Ok(())
    } else {
        Err(not_converged(&sol))
    }
}

fn cmd_ds_em(a: DsEmArgs) -> Outcome {
    let bundle = load(&a.data, a.labels.as_deref(), None)?;
    let init = match a.init {
        InitArg::Mv => majority_vote(&bundle.preds),
        InitArg::Uniform => SoftLabeling::uniform(bundle.preds.n(), bundle.k),
    };
    let trace = run_em(&bundle.preds, &init, &EmOptions { tol: a.tol, max_iter: a.max_iter })?;
    eprintln!(
        "log_likelihood={:.16e} iterations={} converged={}",
        trace.log_likelihood.last().copied().unwrap_or(f64::NAN),
        trace.iterations,
        trace.converged
    );
    emit_labeling(a.out_pred.as_deref(), &trace.prediction)?;
    if let Some(path) = &a.out_params {
        wio::save_ds_params(path, &trace.params)?;
    }

    let mut report = RunReport::new("ds_em");
    report.config.tol = Some(a.tol);
    if let Some(eta) = labels_for(&bundle)? {
        report.loss = Some(evaluate(&trace.prediction, &eta)?);
    }
    save_report(a.report.as_deref(), &report)?;
    if trace.converged {
        Ok(())
    } else {
        Err(Failure::Data(Error::NotConverged(format!(
            "EM still moving after {} iterations",
            trace.iterations
        ))))
    }
}

fn cmd_mv(a: MvArgs) -> Outcome {
    let bundle = load(&a.data, a.labels.as_deref(), None)?;
    let g = majority_vote(&bundle.preds);
    emit_labeling(a.out_pred.as_deref(), &g)?;
    let mut report = RunReport::new("mv");
    if let Some(eta) = labels_for(&bundle)? {
        report.loss = Some(evaluate(&g, &eta)?);
    }
    save_report(a.report.as_deref(), &report)
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let g = wio::load_labeling(&a.pred)?;
    let eta = wio::load_labels(&a.labels, g.k())?.to_soft(g.k())?;
    let loss = evaluate(&g, &eta)?;
    print!("{}", wio::to_toml(&loss)?);
    let mut report = RunReport::new("eval");
    report.loss = Some(loss);
    save_report(a.report.as_deref(), &report)
}

fn cmd_decompose(a: DecomposeArgs) -> Outcome {
    if a.pred.is_none() && a.ds_params.is_none() {
        return Err(Failure::Usage("decompose needs --pred, --ds-params or both".into()));
    }
    let bundle = load(&a.data, Some(&a.labels), None)?;
    let eta = labels_for(&bundle)?.expect("labels given");
    let sys = ConstraintSystem::build(&bundle.preds)?;
    let star = best_approximator(&sys, &eta, &a.solver.options())?;
    if !star.converged {
        return Err(not_converged(&star));
    }
    let g_star = &star.prediction;

    let mut report = RunReport::new("decompose");
    report.config.tol = Some(a.solver.tol);
    report.solver = Some(diagnostics(&star));
    let mut out = String::new();
    if let Some(path) = &a.pred {
        let g_bf = wio::load_labeling(path)?;
        let d = bf_decompose(&eta, &g_bf, g_star)?;
        out += &format!("bf total={:.16e} model={:.16e} approx={:.16e}\n", d.total, d.model, d.approx);
        report.loss = Some(evaluate(&g_bf, &eta)?);
        report.bf_decomposition = Some(d);
    }
    if let Some(path) = &a.ds_params {
        let params = wio::load_ds_params(path)?;
        let g_ds = e_step(&bundle.preds, &params)?;
        let g_ds_star = e_step(&bundle.preds, &m_step(&bundle.preds, &eta)?)?;
        let d = ds_decompose(&eta, &g_ds, &g_ds_star, g_star)?;
        let gap = ocds_closed_form_gap(&bundle.preds, &eta, &params)?;
        let threshold = ds_dominance_threshold(&eta, &g_ds, &g_ds_star, g_star, &star.theta)?;
        out += &format!(
            "ds total={:.16e} model={:.16e} approx1={:.16e} approx2={:.16e}\n\
             ds closed_form_gap={gap:.16e} dominance_threshold={threshold:.16e}\n",
            d.total, d.model, d.approx1, d.approx2
        );
        report.ds_decomposition = Some(d);
        report.ds_closed_form_gap = Some(gap);
    }
    print!("{out}");
    save_report(a.report.as_deref(), &report)
}

fn cmd_estimate(a: EstimateArgs) -> Outcome {
    let Some(pool) = a.pool.labeled.as_deref() else {
        return Err(Failure::Usage("estimate needs --labeled".into()));
    };
    let bundle = load(&a.data, None, Some(pool))?;
    let spec = pool_bounds(&bundle, &a.pool)?;
    match &a.out {
        Some(path) => wio::save_bounds(path, &spec)?,
        None => print!("{}", wio::bounds_to_string(&spec)?),
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Outcome {
    let mut config = SynthConfig::new(a.n, a.p, a.k, a.seed);
    config.dirichlet_alpha = a.alpha.clone().unwrap_or_else(|| vec![1.0; a.k]);
    config.beta = (a.beta_a, a.beta_b);
    let data = gen_ocds(&config)?;
    if let Some(path) = &a.out_preds {
        wio::save_predictions(path, &data.preds)?;
    }
    if let Some(path) = &a.out_labels {
        let mut buf = Vec::new();
        wio::write_hard_labels(&mut buf, &data.true_labels)?;
        write_file(path, buf)?;
    }
    if let Some(path) = &a.out_eta {
        wio::save_labeling(path, &data.eta)?;
    }
    if let Some(prefixes) = &a.prefixes {
        let points = consistency_run(&data, prefixes, &a.solver.options())?;
        println!("n,avg_kl,iterations");
        for pt in points {
            println!("{},{:.16e},{}", pt.n, pt.avg_kl, pt.iterations);
        }
    }
    Ok(())
}

fn cmd_demo(a: DemoArgs) -> Outcome {
    let report = inconsistency_demo(&a.solver.options())?;
    println!("pattern,count,g_star,g_ds_star,expected_star,expected_ds_star");
    for row in &report.rows {
        let (e_star, e_ds) = row.expected_label1();
        println!(
            "({},{}),{},{:.16},{:.16},{:.4},{:.4}",
            row.pattern.0, row.pattern.1, row.count, row.g_star, row.g_ds_star, e_star, e_ds
        );
    }
    println!("displacement={:.16}", report.displacement);
    println!("moved={}", report.moved);
    println!("solver_converged={}", report.solver_converged);

    if let Some(dir) = &a.export {
        let inst = wslabel::appendix_instance();
        fs::create_dir_all(dir).map_err(|e| file_error(dir, e))?;
        wio::save_predictions(dir.join("preds.csv"), &inst.preds)?;
        let mut buf = Vec::new();
        wio::write_hard_labels(&mut buf, &inst.true_labels)?;
        write_file(dir.join("labels.csv"), buf)?;
        let mut buf = Vec::new();
        wio::write_labeled_pool(&mut buf, &inst.preds, &inst.true_labels)?;
        write_file(dir.join("labeled.csv"), buf)?;
    }
    if let Some(path) = &a.report {
        write_file(path, wio::to_toml(&report)?)?;
    }
    if report.solver_converged {
        Ok(())
    } else {
        Err(Failure::Data(Error::NotConverged("best approximator of the instance".into())))
    }
}
