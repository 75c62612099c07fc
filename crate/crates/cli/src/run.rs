//! Working-set initialization and dispatch to the core drivers.

use std::time::Instant;

use anyhow::{bail, ensure, Result};
use svmcut::data::{Dataset, GroupStructure, SlopeWeights};
use svmcut::first_order::{FoConfig, Penalty};
use svmcut::group::{
    group_path_init, group_regularization_path, solve_group_colcon, solve_group_colgen,
    solve_group_congen, solve_group_full,
};
use svmcut::heuristics::{
    correlation_screen, first_order_fit, group_correlation_screen, init_columns_from_beta,
    init_constraints_from_beta, random_subset, subsample_average_fit,
};
use svmcut::l1::{
    geometric_grid, path_init_columns, regularization_path, solve_colcon, solve_colgen, solve_congen, solve_full,
    CutgenConfig, SvmSolution, WorkingSet,
};
use svmcut::slope::{solve_slope, SlopeConfig, SlopeMode};

use crate::args::{Init, Model, RunArgs, Strategy};
use crate::config::Config;
use crate::problem::{Problem, Reg};

const SCREEN_FACTOR: usize = 10;
const SFO_MU: f64 = 0.1;
const SLOPE_COLUMNS_PER_ROUND: usize = 10;

/// Run flags merged with the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub strategy: Strategy,
    pub init: Init,
    pub epsilon: f64,
    pub init_size: usize,
    pub init_rows: usize,
    pub init_cap: usize,
    pub max_outer: usize,
}

pub fn resolve_run(args: &RunArgs, cfg: &Config) -> Result<RunSpec> {
    let defaults = CutgenConfig::default();
    let spec = RunSpec {
        strategy: cfg.pick_or(args.strategy, "strategy", Strategy::Colgen)?,
        init: cfg.pick_or(args.init, "init", Init::Corr)?,
        epsilon: cfg.pick_or(args.epsilon, "epsilon", defaults.epsilon)?,
        init_size: cfg.pick_or(args.init_size, "init-size", 10)?,
        init_rows: cfg.pick_or(args.init_rows, "init-rows", 100)?,
        init_cap: cfg.pick_or(args.init_cap, "init-cap", 200)?,
        max_outer: cfg.pick_or(args.max_outer, "max-outer", defaults.max_outer)?,
    };
    ensure!(spec.epsilon > 0.0, "--epsilon must be positive");
    ensure!(spec.init_size > 0, "--init-size must be at least 1");
    ensure!(spec.init_rows > 0, "--init-rows must be at least 1");
    ensure!(spec.init_cap > 0, "--init-cap must be at least 1");
    ensure!(spec.max_outer > 0, "--max-outer must be at least 1");
    Ok(spec)
}

/// A solve plus the time spent building its initial working set.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub solution: SvmSolution,
    pub init_seconds: f64,
}

struct Start {
    /// Features, or groups for the group model.
    columns: Vec<usize>,
    samples: Vec<usize>,
    beta: Option<Vec<f64>>,
}

fn width(problem: &Problem) -> usize {
    match &problem.groups {
        Some(g) if problem.model == Model::Group => g.len(),
        _ => problem.data.p(),
    }
}

fn screen(problem: &Problem, m: usize) -> Result<Vec<usize>> {
    let m = m.min(width(problem));
    Ok(match (&problem.model, &problem.groups) {
        (Model::Group, Some(g)) => group_correlation_screen(&problem.data, g, m)?,
        _ => correlation_screen(&problem.data, m)?,
    })
}

/// Restricts the problem to the most correlated features when `p` is much
/// larger than `n`, so the first-order fit works on a small design.
fn screened_penalty(d: &Dataset, reg: &Reg) -> Result<(Vec<usize>, Penalty)> {
    let (n, p) = (d.n(), d.p());
    let limit = SCREEN_FACTOR * n;
    Ok(match reg {
        Reg::L1(l) if p > limit => (correlation_screen(d, limit)?, Penalty::L1(*l)),
        Reg::L1(l) => ((0..p).collect(), Penalty::L1(*l)),
        Reg::Group(gs, l) if p > limit => {
            let chosen = group_correlation_screen(d, gs, n.min(gs.len()))?;
            let mut cols: Vec<usize> = chosen.iter().flat_map(|&g| gs.group(g).iter().copied()).collect();
            cols.sort_unstable();
            let mut pos = vec![usize::MAX; p];
            for (k, &j) in cols.iter().enumerate() {
                pos[j] = k;
            }
            let sub: Vec<Vec<usize>> = chosen.iter().map(|&g| gs.group(g).iter().map(|&j| pos[j]).collect()).collect();
            let groups = GroupStructure::new(sub, cols.len())?;
            (cols, Penalty::Group { groups, lambda: *l })
        }
        Reg::Group(gs, l) => (
            (0..p).collect(),
            Penalty::Group {
                groups: (*gs).clone(),
                lambda: *l,
            },
        ),
        Reg::Slope(w) if p > limit => (
            correlation_screen(d, limit)?,
            Penalty::Slope(SlopeWeights::new(w.as_slice()[..limit].to_vec())?),
        ),
        Reg::Slope(w) => ((0..p).collect(), Penalty::Slope(w.clone())),
    })
}

/// First-order estimate on the (screened) problem, embedded in `R^p`.
fn first_order_start(d: &Dataset, reg: &Reg, subsample: bool, seed: u64) -> Result<(Vec<f64>, f64)> {
    let (cols, penalty) = screened_penalty(d, reg)?;
    let owned;
    let sd = if cols.len() < d.p() {
        let rows: Vec<usize> = (0..d.n()).collect();
        owned = d.select(&rows, &cols);
        &owned
    } else {
        d
    };
    let cfg = FoConfig::continuation(0.2, 5, 0.7);
    let (b, b0) = if subsample {
        let n = sd.n();
        let n0 = (SCREEN_FACTOR * sd.p()).min(n);
        let q_max = (n / n0).max(1);
        let fit = subsample_average_fit(sd, &penalty, n0, SFO_MU, q_max, &cfg, seed)?;
        (fit.beta, fit.beta0)
    } else {
        let fit = first_order_fit(sd, &penalty, &cfg, None)?;
        (fit.beta, fit.beta0)
    };
    let mut beta = vec![0.0; d.p()];
    for (&j, v) in cols.iter().zip(b) {
        beta[j] = v;
    }
    Ok((beta, b0))
}

fn start(problem: &Problem, reg: &Reg, run: &RunSpec, seed: u64) -> Result<Start> {
    let d = &problem.data;
    let random_rows = || random_subset(d.n(), run.init_rows, seed.wrapping_add(1));
    Ok(match run.init {
        Init::Random => Start {
            columns: random_subset(width(problem), run.init_size, seed),
            samples: random_rows(),
            beta: None,
        },
        Init::Corr => Start {
            columns: screen(problem, run.init_size)?,
            samples: random_rows(),
            beta: None,
        },
        Init::Path => Start {
            columns: match &problem.groups {
                Some(g) if problem.model == Model::Group => group_path_init(d, g, run.init_size.min(g.len())),
                _ => path_init_columns(d, run.init_size.min(d.p())),
            },
            samples: random_rows(),
            beta: None,
        },
        Init::Fo | Init::Sfo => {
            let (beta, beta0) = first_order_start(d, reg, run.init == Init::Sfo, seed)?;
            let mut columns = match reg {
                Reg::Group(gs, _) => {
                    let gnorm: Vec<f64> = gs
                        .groups()
                        .iter()
                        .map(|g| g.iter().map(|&j| beta[j].abs()).fold(0.0, f64::max))
                        .collect();
                    init_columns_from_beta(&gnorm, run.init_cap)?
                }
                _ => init_columns_from_beta(&beta, run.init_cap)?,
            };
            if columns.is_empty() {
                columns = screen(problem, run.init_size)?;
            }
            let mut samples = init_constraints_from_beta(d, &beta, beta0)?;
            if samples.is_empty() {
                samples = random_rows();
            }
            Start {
                columns,
                samples,
                beta: Some(beta),
            }
        }
    })
}

fn cutgen(run: &RunSpec) -> CutgenConfig {
    CutgenConfig {
        epsilon: run.epsilon,
        max_outer: run.max_outer,
        max_added_per_round: None,
    }
}

/// Solves the problem at `lambda` with the requested strategy.
pub fn solve(problem: &Problem, lambda: f64, run: &RunSpec, seed: u64) -> Result<Outcome> {
    let d = &problem.data;
    let reg = problem.reg_at(lambda)?;
    if let (Reg::Slope(_), Strategy::Congen) = (&reg, run.strategy) {
        bail!("constraint generation alone is not available for the slope model; use full, colgen or colcon");
    }
    let clock = Instant::now();
    let init = match run.strategy {
        Strategy::Full => Start {
            columns: Vec::new(),
            samples: Vec::new(),
            beta: None,
        },
        _ => start(problem, &reg, run, seed)?,
    };
    let init_seconds = clock.elapsed().as_secs_f64();
    let cg = cutgen(run);
    let Start { columns, samples, beta } = init;
    let solution = match reg {
        Reg::L1(l) => match run.strategy {
            Strategy::Full => solve_full(d, l)?,
            Strategy::Colgen => solve_colgen(d, l, &columns, &cg)?,
            Strategy::Congen => solve_congen(d, l, &samples, &cg)?,
            Strategy::Colcon => solve_colcon(d, l, &WorkingSet::new(samples, columns), &cg)?,
        },
        Reg::Group(gs, l) => match run.strategy {
            Strategy::Full => solve_group_full(d, gs, l)?,
            Strategy::Colgen => solve_group_colgen(d, gs, l, &columns, &cg)?,
            Strategy::Congen => solve_group_congen(d, gs, l, &samples, &cg)?,
            Strategy::Colcon => solve_group_colcon(d, gs, l, &columns, &samples, &cg)?,
        },
        Reg::Slope(w) => {
            let mode = match run.strategy {
                Strategy::Full => SlopeMode::Cuts,
                Strategy::Colgen => SlopeMode::Columns,
                Strategy::Colcon => SlopeMode::Both,
                Strategy::Congen => unreachable!("rejected above"),
            };
            let cfg = SlopeConfig {
                cutgen: CutgenConfig {
                    max_added_per_round: Some(SLOPE_COLUMNS_PER_ROUND),
                    ..cg
                },
                mode,
                max_cuts: None,
            };
            solve_slope(d, &w, &columns, beta.as_deref(), &cfg)?
        }
    };
    Ok(Outcome { solution, init_seconds })
}

/// Grid `lambda_max * ratio^k` for `k < points`.
pub fn path_grid(problem: &Problem, points: usize, ratio: f64) -> Result<Vec<f64>> {
    ensure!(points > 0, "--points must be at least 1");
    ensure!(ratio > 0.0 && ratio < 1.0, "--ratio must lie in (0, 1)");
    ensure!(problem.scalable(), "a path needs scalable slope weights (two-level or bh-log)");
    Ok(geometric_grid(problem.lambda_max, points, ratio))
}

/// Solves along `grid`. Column generation on the L1 and group models uses
/// the warm-started path driver; everything else solves each point afresh.
pub fn solve_path(problem: &Problem, grid: &[f64], run: &RunSpec, seed: u64) -> Result<Vec<Outcome>> {
    let warm = run.strategy == Strategy::Colgen && problem.model != Model::Slope;
    if !warm {
        return grid.iter().map(|&l| solve(problem, l, run, seed)).collect();
    }
    let d = &problem.data;
    let cg = cutgen(run);
    let sols = match &problem.groups {
        Some(g) if problem.model == Model::Group => group_regularization_path(d, g, grid, run.init_size, &cg)?,
        _ => regularization_path(d, grid, run.init_size, &cg)?,
    };
    Ok(sols
        .into_iter()
        .map(|solution| Outcome {
            solution,
            init_seconds: 0.0,
        })
        .collect())
}
