//! L1-regularized SVM: restricted LP construction, column and constraint
//! pricing, and the column / constraint / combined generation drivers.

use std::time::Instant;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lp::{LpModel, RowSense, INF};
use crate::master::Master;

/// Active samples `I` and features `J`, both sorted and duplicate free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WorkingSet {
    samples: Vec<usize>,
    features: Vec<usize>,
}

fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

impl WorkingSet {
    pub fn new(samples: Vec<usize>, features: Vec<usize>) -> Self {
        WorkingSet {
            samples: sorted_unique(samples),
            features: sorted_unique(features),
        }
    }

    pub fn full(n: usize, p: usize) -> Self {
        WorkingSet {
            samples: (0..n).collect(),
            features: (0..p).collect(),
        }
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn add_samples(&mut self, new: &[usize]) {
        self.samples = sorted_unique(self.samples.iter().chain(new).copied().collect());
    }

    pub fn add_features(&mut self, new: &[usize]) {
        self.features = sorted_unique(self.features.iter().chain(new).copied().collect());
    }

    fn check(&self, d: &Dataset) -> Result<()> {
        if self.samples.last().is_some_and(|&i| i >= d.n()) {
            return Err(Error::Dimension("sample index out of range".into()));
        }
        if self.features.last().is_some_and(|&j| j >= d.p()) {
            return Err(Error::Dimension("feature index out of range".into()));
        }
        Ok(())
    }
}

/// Settings of the cutting-plane drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct CutgenConfig {
    /// Pricing tolerance on reduced costs.
    pub epsilon: f64,
    pub max_outer: usize,
    /// Optional cap on columns (and constraints) added per round.
    pub max_added_per_round: Option<usize>,
}

impl Default for CutgenConfig {
    fn default() -> Self {
        CutgenConfig {
            epsilon: 1e-2,
            max_outer: 1000,
            max_added_per_round: None,
        }
    }
}

impl CutgenConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        CutgenConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon {} must be positive", self.epsilon)));
        }
        if self.max_outer == 0 {
            return Err(Error::domain("max_outer must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub outer_rounds: usize,
    pub samples: usize,
    pub features: usize,
    pub pivots: usize,
    pub cuts: usize,
    pub seconds: f64,
}

/// Output of every driver. For Slope runs `eta` holds the epigraph value.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution {
    /// Length-`p` coefficients, zero off the working set.
    pub beta: Vec<f64>,
    pub beta0: f64,
    /// Final `I`, sorted.
    pub samples: Vec<usize>,
    /// Hinge slack per entry of `samples`.
    pub xi: Vec<f64>,
    /// Hinge-row dual per entry of `samples`.
    pub duals: Vec<f64>,
    /// Final `J`, sorted.
    pub features: Vec<usize>,
    /// Active groups, sorted (group models only).
    pub groups: Vec<usize>,
    pub eta: Option<f64>,
    /// Hinge loss plus penalty recomputed on the full data.
    pub objective: f64,
    /// Optimal value of the last restricted LP.
    pub lp_objective: f64,
    /// True when the driver stopped because no pricing step fired.
    pub certified: bool,
    pub diagnostics: Diagnostics,
}

impl SvmSolution {
    /// Length-`n` dual vector, zero outside `samples`.
    pub fn duals_full(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (&i, &q) in self.samples.iter().zip(&self.duals) {
            out[i] = q;
        }
        out
    }
}

/// `sum_i (1 - y_i (x_i^T beta + beta0))_+ + lambda ||beta||_1`.
pub fn l1_objective(d: &Dataset, beta: &[f64], beta0: f64, lambda: f64) -> f64 {
    d.hinge_loss(beta, beta0) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Builds `M(I, J)`. Column layout: `xi` for each sample of `I` in order,
/// then `beta+_j` and `beta-_j` for each `j` in `J`, then the free
/// intercept. Row `k` is the hinge constraint of the `k`-th sample.
pub fn build_restricted(d: &Dataset, lambda: f64, ws: &WorkingSet) -> Result<LpModel> {
    ws.check(d)?;
    if ws.samples.is_empty() {
        return Err(Error::domain("restricted model needs at least one sample"));
    }
    let nr = ws.samples.len();
    let mut row_of = vec![usize::MAX; d.n()];
    for (k, &i) in ws.samples.iter().enumerate() {
        row_of[i] = k;
    }
    let mut m = LpModel::new();
    for _ in 0..nr {
        m.add_row(RowSense::Ge, 1.0, &[])?;
    }
    for k in 0..nr {
        m.add_column(1.0, 0.0, INF, vec![(k, 1.0)])?;
    }
    let x = d.features();
    for &j in &ws.features {
        let mut plus = Vec::new();
        x.for_each_in_col(j, |i, v| {
            if row_of[i] != usize::MAX {
                plus.push((row_of[i], d.y(i) * v));
            }
        });
        let minus = plus.iter().map(|&(r, v)| (r, -v)).collect();
        m.add_column(lambda, 0.0, INF, plus)?;
        m.add_column(lambda, 0.0, INF, minus)?;
    }
    let b0 = ws.samples.iter().enumerate().map(|(k, &i)| (k, d.y(i))).collect();
    m.add_column(0.0, -INF, INF, b0)?;
    Ok(m)
}

/// Dual solution of the problem for any `lambda >= lambda_max`: the larger
/// class gets `N_small / N_large`, the smaller class 1.
pub fn lambda_max_duals(d: &Dataset) -> Vec<f64> {
    let (np, nm) = d.class_counts();
    let (wp, wm) = if np >= nm {
        (if np == 0 { 0.0 } else { nm as f64 / np as f64 }, 1.0)
    } else {
        (1.0, np as f64 / nm as f64)
    };
    d.labels().iter().map(|&y| if y > 0.0 { wp } else { wm }).collect()
}

/// Indices of the `k` largest scores, ties broken by lower index, returned
/// sorted by index.
pub(crate) fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// The `j0` columns with the most negative reduced cost at `lambda_max`.
pub fn path_init_columns(d: &Dataset, j0: usize) -> Vec<usize> {
    let q = d.signed_correlations(&lambda_max_duals(d));
    let mags: Vec<f64> = q.iter().map(|v| v.abs()).collect();
    top_k(&mags, j0)
}

fn membership(len: usize, active: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; len];
    for &a in active {
        mask[a] = true;
    }
    mask
}

/// Keeps the `cap` entries with the largest violation, then sorts by index.
fn truncate_by_violation(mut cands: Vec<(usize, f64)>, cap: Option<usize>) -> Vec<usize> {
    if let Some(cap) = cap {
        if cands.len() > cap {
            cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            cands.truncate(cap);
        }
    }
    let mut out: Vec<usize> = cands.into_iter().map(|c| c.0).collect();
    out.sort_unstable();
    out
}

/// Columns outside `active` whose reduced cost `lambda - |sum_i y_i x_ij pi_i|`
/// is below `-epsilon`. `duals` has length `n` (zero for inactive samples).
pub fn price_columns(
    d: &Dataset,
    duals: &[f64],
    lambda: f64,
    active: &[usize],
    epsilon: f64,
    cap: Option<usize>,
) -> Vec<usize> {
    let q = d.signed_correlations(duals);
    let mask = membership(d.p(), active);
    let cands = q
        .iter()
        .enumerate()
        .filter(|&(j, _)| !mask[j])
        .map(|(j, v)| (j, v.abs() - lambda))
        .filter(|&(_, viol)| viol > epsilon)
        .collect();
    truncate_by_violation(cands, cap)
}

/// Samples outside `active` with `1 - y_i (x_i^T beta + beta0) > epsilon`.
pub fn price_constraints(
    d: &Dataset,
    beta: &[f64],
    beta0: f64,
    active: &[usize],
    epsilon: f64,
    cap: Option<usize>,
) -> Vec<usize> {
    let scores = d.features().mul(beta);
    let mask = membership(d.n(), active);
    let cands = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| !mask[i])
        .map(|(i, s)| (i, 1.0 - d.y(i) * (s + beta0)))
        .filter(|&(_, viol)| viol > epsilon)
        .collect();
    truncate_by_violation(cands, cap)
}

/// Adds the lowest-index sample of any class missing from `samples`.
pub(crate) fn ensure_both_classes(d: &Dataset, mut samples: Vec<usize>) -> Vec<usize> {
    for class in [1.0, -1.0] {
        if !samples.iter().any(|&i| d.y(i) == class) {
            if let Some(i) = (0..d.n()).find(|&i| d.y(i) == class) {
                samples.push(i);
            }
        }
    }
    sorted_unique(samples)
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda {lambda} must be a nonnegative number")));
    }
    Ok(())
}

pub(crate) fn collect_solution(
    master: &Master,
    objective: f64,
    eta: Option<f64>,
    certified: bool,
    diagnostics: Diagnostics,
) -> SvmSolution {
    let rows = master.active_rows();
    let mut features = master.features().to_vec();
    features.sort_unstable();
    SvmSolution {
        beta: master.beta().to_vec(),
        beta0: master.beta0(),
        samples: rows.iter().map(|r| r.0).collect(),
        xi: rows.iter().map(|r| r.1).collect(),
        duals: rows.iter().map(|r| r.2).collect(),
        features,
        groups: Vec::new(),
        eta,
        objective,
        lp_objective: master.last().map_or(f64::NAN, |s| s.objective),
        certified,
        diagnostics: Diagnostics {
            samples: master.num_samples(),
            features: master.num_features(),
            ..diagnostics
        },
    }
}

/// Outer loop shared by the L1 drivers: solve, price constraints and/or
/// columns against the same solution, add, repeat.
fn drive(master: &mut Master, lambda: f64, cfg: &CutgenConfig, cols: bool, rows: bool) -> Result<SvmSolution> {
    let start = Instant::now();
    let pivots0 = master.pivots();
    let d = master.data();
    let mut rounds = 0;
    let certified = loop {
        rounds += 1;
        master.solve()?;
        let new_rows = if rows {
            price_constraints(
                d,
                master.beta(),
                master.beta0(),
                master.samples(),
                cfg.epsilon,
                cfg.max_added_per_round,
            )
        } else {
            Vec::new()
        };
        let new_cols = if cols {
            price_columns(
                d,
                &master.duals_full(),
                lambda,
                master.features(),
                cfg.epsilon,
                cfg.max_added_per_round,
            )
        } else {
            Vec::new()
        };
        log::debug!(
            "round {rounds}: |I|={} |J|={} adding {} rows, {} columns",
            master.num_samples(),
            master.num_features(),
            new_rows.len(),
            new_cols.len()
        );
        if new_rows.is_empty() && new_cols.is_empty() {
            break true;
        }
        if rounds >= cfg.max_outer {
            log::warn!("stopping after {rounds} rounds without certification");
            break false;
        }
        master.add_samples(&new_rows)?;
        master.add_features(&new_cols, lambda, |_| Vec::new())?;
    };
    let objective = l1_objective(d, master.beta(), master.beta0(), lambda);
    let diag = Diagnostics {
        outer_rounds: rounds,
        pivots: master.pivots() - pivots0,
        seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(collect_solution(master, objective, None, certified, diag))
}

/// Solves the full problem `M([n], [p])` in one LP.
pub fn solve_full(d: &Dataset, lambda: f64) -> Result<SvmSolution> {
    check_lambda(lambda)?;
    let all: Vec<usize> = (0..d.n()).collect();
    let mut master = Master::new(d, &all)?;
    master.add_features(&(0..d.p()).collect::<Vec<_>>(), lambda, |_| Vec::new())?;
    drive(&mut master, lambda, &CutgenConfig::default(), false, false)
}

/// Column generation over all samples, starting from columns `j_init`.
pub fn solve_colgen(d: &Dataset, lambda: f64, j_init: &[usize], cfg: &CutgenConfig) -> Result<SvmSolution> {
    check_lambda(lambda)?;
    cfg.validate()?;
    WorkingSet::new(vec![], j_init.to_vec()).check(d)?;
    let all: Vec<usize> = (0..d.n()).collect();
    let mut master = Master::new(d, &all)?;
    master.add_features(&sorted_unique(j_init.to_vec()), lambda, |_| Vec::new())?;
    drive(&mut master, lambda, cfg, true, false)
}

/// Constraint generation over all columns, starting from samples `i_init`.
pub fn solve_congen(d: &Dataset, lambda: f64, i_init: &[usize], cfg: &CutgenConfig) -> Result<SvmSolution> {
    check_lambda(lambda)?;
    cfg.validate()?;
    WorkingSet::new(i_init.to_vec(), vec![]).check(d)?;
    let samples = ensure_both_classes(d, i_init.to_vec());
    let mut master = Master::new(d, &samples)?;
    master.add_features(&(0..d.p()).collect::<Vec<_>>(), lambda, |_| Vec::new())?;
    drive(&mut master, lambda, cfg, false, true)
}

/// Combined column and constraint generation from `ws_init`.
pub fn solve_colcon(d: &Dataset, lambda: f64, ws_init: &WorkingSet, cfg: &CutgenConfig) -> Result<SvmSolution> {
    check_lambda(lambda)?;
    cfg.validate()?;
    ws_init.check(d)?;
    let samples = ensure_both_classes(d, ws_init.samples.clone());
    let mut master = Master::new(d, &samples)?;
    master.add_features(&ws_init.features, lambda, |_| Vec::new())?;
    drive(&mut master, lambda, cfg, true, true)
}

/// Column-generation path over a strictly decreasing `grid`, starting from
/// the `j0` best-priced columns at `lambda_max`. Each point warm-starts the
/// working set and basis from the previous one.
pub fn regularization_path(d: &Dataset, grid: &[f64], j0: usize, cfg: &CutgenConfig) -> Result<Vec<SvmSolution>> {
    cfg.validate()?;
    check_grid(grid)?;
    if j0 == 0 {
        return Err(Error::domain("j0 must be at least 1"));
    }
    let all: Vec<usize> = (0..d.n()).collect();
    let mut master = Master::new(d, &all)?;
    master.add_features(&path_init_columns(d, j0.min(d.p())), grid[0], |_| Vec::new())?;
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        master.set_feature_costs(lambda);
        out.push(drive(&mut master, lambda, cfg, true, false)?);
    }
    Ok(out)
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain("lambda grid is empty"));
    }
    for &l in grid {
        check_lambda(l)?;
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("lambda grid must be strictly decreasing"));
    }
    Ok(())
}

/// `lambda_max * ratio^k` for `k = 0..len`.
pub fn geometric_grid(lambda_max: f64, len: usize, ratio: f64) -> Vec<f64> {
    (0..len).map(|k| lambda_max * ratio.powi(k as i32)).collect()
}

/// Averaged relative accuracy in percent: the mean of `(f - f*) / f*`.
pub fn ara(values: &[f64], best: &[f64]) -> Result<f64> {
    if values.len() != best.len() || values.is_empty() {
        return Err(Error::Dimension("need one best value per replication".into()));
    }
    if let Some(b) = best.iter().find(|&&b| !(b > 0.0)) {
        return Err(Error::domain(format!("reference objective {b} must be positive")));
    }
    let sum: f64 = values.iter().zip(best).map(|(f, b)| (f - b) / b).sum();
    Ok(100.0 * sum / values.len() as f64)
}
