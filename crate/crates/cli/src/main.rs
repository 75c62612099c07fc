mod args;
mod bench;
mod config;
mod output;
mod problem;
mod run;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::Parser;
use rayon::prelude::*;
use svmcut::data::{synth_gaussian, synth_group_gaussian, write_svmlight};

use args::{BenchArgs, Cli, Command, EvalArgs, PathArgs, SolveArgs, SynthArgs};
use bench::{ara_table, parse_methods, render, Entry};
use output::{emit, evaluate, load_solution, read_records, save_solution, Record};
use problem::{load_config, load_problem, parse_synth, resolve_problem, Problem};
use run::{path_grid, resolve_run, solve, solve_path, Outcome, RunSpec};

const DEFAULT_POINTS: usize = 20;
const DEFAULT_RATIO: f64 = 0.7;
const DEFAULT_REPS: usize = 10;

/// Exit status of a finished command.
enum Status {
    Certified,
    Flagged,
}

fn record(command: &str, problem: &Problem, run: &RunSpec, seed: u64, lambda: f64, out: &Outcome) -> Result<Record> {
    let sol = &out.solution;
    let reg = problem.reg_at(lambda)?;
    Ok(Record {
        command: command.to_string(),
        model: problem.model.name(),
        strategy: run.strategy.name(),
        init: run.init.name(),
        method: None,
        rep: None,
        point: None,
        seed,
        n: problem.data.n(),
        p: problem.data.p(),
        epsilon: run.epsilon,
        lambda,
        lambda_max: problem.lambda_max,
        objective: sol.objective,
        lp_objective: sol.lp_objective,
        certified: sol.certified,
        samples: sol.samples.len(),
        features: sol.features.len(),
        groups: matches!(reg, problem::Reg::Group(..)).then_some(sol.groups.len()),
        cuts: sol.diagnostics.cuts,
        outer_rounds: sol.diagnostics.outer_rounds,
        pivots: sol.diagnostics.pivots,
        nonzeros: sol.beta.iter().filter(|&&b| b != 0.0).count(),
        seconds: sol.diagnostics.seconds,
        init_seconds: out.init_seconds,
    })
}

fn status_of<'a>(mut certified: impl Iterator<Item = &'a Record>) -> Status {
    if certified.all(|r| r.certified) {
        Status::Certified
    } else {
        Status::Flagged
    }
}

fn cmd_solve(a: SolveArgs) -> Result<Status> {
    let cfg = load_config(a.problem.config.as_deref())?;
    let spec = resolve_problem(&a.problem, &cfg)?;
    let run = resolve_run(&a.run, &cfg)?;
    let problem = load_problem(&spec, spec.seed)?;
    let out = solve(&problem, problem.lambda, &run, spec.seed)?;
    if let Some(path) = &a.out {
        save_solution(path, &out.solution)?;
    }
    let rec = record("solve", &problem, &run, spec.seed, problem.lambda, &out)?;
    emit(std::slice::from_ref(&rec), a.metrics.as_deref())?;
    Ok(status_of(std::iter::once(&rec)))
}

fn cmd_path(a: PathArgs) -> Result<Status> {
    let cfg = load_config(a.problem.config.as_deref())?;
    let spec = resolve_problem(&a.problem, &cfg)?;
    let run = resolve_run(&a.run, &cfg)?;
    let points = cfg.pick_or(a.points, "points", DEFAULT_POINTS)?;
    let ratio = cfg.pick_or(a.ratio, "ratio", DEFAULT_RATIO)?;
    let problem = load_problem(&spec, spec.seed)?;
    let grid = path_grid(&problem, points, ratio)?;
    let outcomes = solve_path(&problem, &grid, &run, spec.seed)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut records = Vec::with_capacity(grid.len());
    for (k, (&lambda, out)) in grid.iter().zip(&outcomes).enumerate() {
        if let Some(dir) = &a.out {
            save_solution(&dir.join(format!("point-{k:03}.sol")), &out.solution)?;
        }
        let mut rec = record("path", &problem, &run, spec.seed, lambda, out)?;
        rec.point = Some(k);
        records.push(rec);
    }
    emit(&records, a.metrics.as_deref())?;
    Ok(status_of(records.iter()))
}

fn bench_table(records: &[Record]) -> Result<String> {
    let entries = records
        .iter()
        .map(|r| {
            Ok(Entry {
                method: r.method.clone().context("record without a method field")?,
                rep: r.rep.context("record without a rep field")?,
                point: r.point.unwrap_or(0),
                objective: r.objective,
                seconds: r.seconds + r.init_seconds,
                certified: r.certified,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(render(&ara_table(&entries)?))
}

fn cmd_bench(a: BenchArgs) -> Result<Status> {
    if let Some(path) = &a.replay {
        let records = read_records(path)?;
        print!("{}", bench_table(&records)?);
        return Ok(status_of(records.iter()));
    }
    let cfg = load_config(a.problem.config.as_deref())?;
    let spec = resolve_problem(&a.problem, &cfg)?;
    let base = resolve_run(&a.run, &cfg)?;
    let methods = parse_methods(&cfg.pick_or(a.methods.clone(), "methods", base.strategy.name())?)?;
    let reps = cfg.pick_or(a.reps, "reps", DEFAULT_REPS)?;
    ensure!(reps > 0, "--reps must be at least 1");
    let points = cfg.pick(a.points, "points")?;
    let ratio = cfg.pick_or(a.ratio, "ratio", DEFAULT_RATIO)?;
    let jobs = cfg.pick_or(a.jobs, "jobs", 0)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let per_rep = pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| -> Result<Vec<Record>> {
                let seed = spec.seed.wrapping_add(rep as u64);
                let problem = load_problem(&spec, seed)?;
                let mut records = Vec::new();
                for m in &methods {
                    let run = RunSpec {
                        strategy: m.strategy,
                        epsilon: m.epsilon.unwrap_or(base.epsilon),
                        ..base.clone()
                    };
                    let (grid, outcomes) = match points {
                        Some(k) => {
                            let grid = path_grid(&problem, k, ratio)?;
                            let outcomes = solve_path(&problem, &grid, &run, seed)?;
                            (grid, outcomes)
                        }
                        None => (vec![problem.lambda], vec![solve(&problem, problem.lambda, &run, seed)?]),
                    };
                    for (k, (&lambda, out)) in grid.iter().zip(&outcomes).enumerate() {
                        let mut rec = record("bench", &problem, &run, seed, lambda, out)?;
                        rec.method = Some(m.label.clone());
                        rec.rep = Some(rep);
                        rec.point = Some(k);
                        records.push(rec);
                    }
                }
                Ok(records)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let records: Vec<Record> = per_rep.into_iter().flatten().collect();
    if let Some(path) = &a.metrics {
        emit(&records, Some(path))?;
    }
    print!("{}", bench_table(&records)?);
    Ok(status_of(records.iter()))
}

fn cmd_synth(a: SynthArgs) -> Result<Status> {
    let cfg = parse_synth(&a.spec, a.seed)?;
    let (d, groups) = if cfg.groups.is_some() {
        let (d, g) = synth_group_gaussian(&cfg)?;
        (d, Some(g))
    } else {
        (synth_gaussian(&cfg)?, None)
    };
    write_file(&a.out, |w| Ok(write_svmlight(&d, w)?))?;
    match (a.groups_out, groups) {
        (Some(path), Some(g)) => write_file(&path, |w| Ok(g.write(w)?))?,
        (Some(_), None) => anyhow::bail!("--groups-out needs a grouped spec (groups=GxS)"),
        _ => {}
    }
    let (pos, neg) = d.class_counts();
    eprintln!("wrote n={} p={} (+1: {pos}, -1: {neg}) to {}", d.n(), d.p(), a.out.display());
    Ok(Status::Certified)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<Status> {
    let cfg = load_config(a.problem.config.as_deref())?;
    let spec = resolve_problem(&a.problem, &cfg)?;
    let problem = load_problem(&spec, spec.seed)?;
    let (beta, beta0) = load_solution(&a.solution, problem.data.p())?;
    let eval = evaluate(&problem.data, &problem.reg()?, &beta, beta0);
    println!("{}", serde_json::to_string(&eval)?);
    Ok(Status::Certified)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Path(a) => cmd_path(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(Status::Certified) => ExitCode::SUCCESS,
        Ok(Status::Flagged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
