//! Slope-regularized SVM by simultaneous epigraph-cut separation and column
//! generation.
//!
//! The penalty enters through an epigraph variable `eta >= w^T |beta_J|`,
//! one row per cut `w`, where every cut is a rearrangement of the largest
//! `|J|` Slope weights. New columns extend every cut with the next unused
//! weights in pricing order. A small-scale exact LP with `O(p^2)` variables
//! serves as a reference.

use std::time::Instant;

use crate::data::{Dataset, SlopeWeights};
use crate::error::{Error, Result};
use crate::l1::{check_lambda, collect_solution, CutgenConfig, Diagnostics, SvmSolution};
use crate::lp::{self, LpModel, LpStatus, RowSense, INF};
use crate::master::Master;

/// Largest `p` accepted by [`slope_oracle_small`].
pub const ORACLE_MAX_P: usize = 50;

/// `sum_j lambda_j |beta|_(j)` with magnitudes sorted decreasingly.
/// Coordinates beyond the weight count get weight zero.
pub fn slope_norm(beta: &[f64], w: &SlopeWeights) -> f64 {
    let mut mags: Vec<f64> = beta.iter().map(|b| b.abs()).filter(|&b| b > 0.0).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().enumerate().map(|(k, m)| w.get_or_zero(k) * m).sum()
}

/// `sum_i hinge_i + slope_norm(beta)`.
pub fn slope_objective(d: &Dataset, beta: &[f64], beta0: f64, w: &SlopeWeights) -> f64 {
    d.hinge_loss(beta, beta0) + slope_norm(beta, w)
}

/// Epigraph cuts over an ordered column set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutPool {
    columns: Vec<usize>,
    cuts: Vec<Vec<f64>>,
}

impl CutPool {
    /// Empty pool over `columns`, which must be distinct.
    pub fn new(columns: Vec<usize>) -> Result<Self> {
        let mut sorted = columns.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("cut pool columns must be distinct"));
        }
        Ok(CutPool {
            columns,
            cuts: Vec::new(),
        })
    }

    /// Columns in cut-coordinate order.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn cuts(&self) -> &[Vec<f64>] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn push(&mut self, cut: Vec<f64>) -> Result<()> {
        if cut.len() != self.columns.len() {
            return Err(Error::Dimension(format!(
                "cut has {} entries for {} columns",
                cut.len(),
                self.columns.len()
            )));
        }
        self.cuts.push(cut);
        Ok(())
    }
}

/// Weights of the cut maximizing `w^T mags`: the `k`-th largest magnitude
/// gets `lambda_k`, ties broken by `key`.
fn cut_for(mags: &[f64], key: &[usize], w: &SlopeWeights) -> Vec<f64> {
    let mut order: Vec<usize> = (0..mags.len()).collect();
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(key[a].cmp(&key[b])));
    let mut cut = vec![0.0; mags.len()];
    for (rank, &pos) in order.iter().enumerate() {
        cut[pos] = w.get_or_zero(rank);
    }
    cut
}

fn sorted_norm(mags: &[f64], cut: &[f64]) -> f64 {
    mags.iter().zip(cut).map(|(m, c)| m * c).sum()
}

/// Returns the most violated cut for `beta` if `eta + epsilon` falls short
/// of the Slope norm, otherwise `None`. Ties in `|beta|` go to the lower
/// position.
pub fn separate_cut(beta: &[f64], eta: f64, w: &SlopeWeights, epsilon: f64) -> Option<Vec<f64>> {
    let mags: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    let key: Vec<usize> = (0..beta.len()).collect();
    let cut = cut_for(&mags, &key, w);
    (eta + epsilon < sorted_norm(&mags, &cut)).then_some(cut)
}

/// Appends `new_columns` to the pool; every cut gives the `k`-th new column
/// the weight `lambda_{|J|+k}`.
pub fn extend_cuts(pool: &mut CutPool, new_columns: &[usize], w: &SlopeWeights) -> Result<()> {
    let mut all = pool.columns.clone();
    all.extend_from_slice(new_columns);
    CutPool::new(all)?;
    let base = pool.columns.len();
    for cut in &mut pool.cuts {
        cut.extend((0..new_columns.len()).map(|k| w.get_or_zero(base + k)));
    }
    pool.columns.extend_from_slice(new_columns);
    Ok(())
}

/// Builds `M_S(C_t^J, J)` over all samples. Column layout: `xi` per sample,
/// the `beta+`/`beta-` pair of each pool column in pool order, the free
/// intercept, then `eta >= 0`. Rows: hinge rows, then one row per cut.
pub fn build_slope_restricted(d: &Dataset, w: &SlopeWeights, pool: &CutPool) -> Result<LpModel> {
    check_weights(d, w)?;
    if pool.is_empty() {
        return Err(Error::domain("cut pool is empty; the epigraph variable would be unconstrained"));
    }
    if let Some(&j) = pool.columns.iter().find(|&&j| j >= d.p()) {
        return Err(Error::Dimension(format!("feature {j} out of range")));
    }
    let n = d.n();
    let mut m = LpModel::new();
    for _ in 0..n {
        m.add_row(RowSense::Ge, 1.0, &[])?;
    }
    for _ in &pool.cuts {
        m.add_row(RowSense::Ge, 0.0, &[])?;
    }
    for i in 0..n {
        m.add_column(1.0, 0.0, INF, vec![(i, 1.0)])?;
    }
    let x = d.features();
    for (k, &j) in pool.columns.iter().enumerate() {
        let mut plus = Vec::new();
        x.for_each_in_col(j, |i, v| plus.push((i, d.y(i) * v)));
        let mut minus: Vec<(usize, f64)> = plus.iter().map(|&(r, v)| (r, -v)).collect();
        for (l, cut) in pool.cuts.iter().enumerate() {
            if cut[k] != 0.0 {
                plus.push((n + l, -cut[k]));
                minus.push((n + l, -cut[k]));
            }
        }
        m.add_column(0.0, 0.0, INF, plus)?;
        m.add_column(0.0, 0.0, INF, minus)?;
    }
    m.add_column(0.0, -INF, INF, (0..n).map(|i| (i, d.y(i))).collect())?;
    m.add_column(1.0, 0.0, INF, (0..pool.len()).map(|l| (n + l, 1.0)).collect())?;
    Ok(m)
}

fn check_weights(d: &Dataset, w: &SlopeWeights) -> Result<()> {
    if w.len() != d.p() {
        return Err(Error::Dimension(format!("{} slope weights for {} features", w.len(), d.p())));
    }
    Ok(())
}

/// Columns outside `active` with `|q_j| >= lambda_{|J|+1} + epsilon`, in
/// decreasing order of `|q_j|` (ties by index), truncated to `cap`.
pub fn price_slope_columns(
    d: &Dataset,
    duals: &[f64],
    w: &SlopeWeights,
    active: &[usize],
    epsilon: f64,
    cap: Option<usize>,
) -> Vec<usize> {
    if active.len() >= d.p() {
        return Vec::new();
    }
    let threshold = w.get_or_zero(active.len()) + epsilon;
    let q = d.signed_correlations(duals);
    let mut mask = vec![false; d.p()];
    for &j in active {
        mask[j] = true;
    }
    let mut cands: Vec<usize> = (0..d.p()).filter(|&j| !mask[j] && q[j].abs() >= threshold).collect();
    cands.sort_by(|&a, &b| q[b].abs().total_cmp(&q[a].abs()).then(a.cmp(&b)));
    if let Some(cap) = cap {
        cands.truncate(cap);
    }
    cands
}

/// `max_k (sum of the k largest |q_j| - sum_{j<=k} lambda_j)` over all
/// columns, with the maximizing `k` (0 when every prefix is nonpositive).
pub fn slope_dual_violation(q: &[f64], w: &SlopeWeights) -> (f64, usize) {
    let mut mags: Vec<f64> = q.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut best = (0.0, 0);
    let mut acc = 0.0;
    for (k, m) in mags.iter().enumerate() {
        acc += m - w.get_or_zero(k);
        if acc > best.0 {
            best = (acc, k + 1);
        }
    }
    best
}

/// Exact dual-norm pricing: when the prefix violation over all columns
/// exceeds `epsilon`, the inactive columns inside the violating prefix, in
/// decreasing order of `|q_j|` and truncated to `cap`.
pub fn price_slope_prefix(
    d: &Dataset,
    duals: &[f64],
    w: &SlopeWeights,
    active: &[usize],
    epsilon: f64,
    cap: Option<usize>,
) -> Vec<usize> {
    let q = d.signed_correlations(duals);
    let (viol, k) = slope_dual_violation(&q, w);
    if viol <= epsilon {
        return Vec::new();
    }
    let mut mask = vec![false; d.p()];
    for &j in active {
        mask[j] = true;
    }
    let mut order: Vec<usize> = (0..d.p()).collect();
    order.sort_by(|&a, &b| q[b].abs().total_cmp(&q[a].abs()).then(a.cmp(&b)));
    let mut out: Vec<usize> = order[..k].iter().copied().filter(|&j| !mask[j]).collect();
    if let Some(cap) = cap {
        out.truncate(cap);
    }
    out
}

/// Which generation steps run in [`solve_slope`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeMode {
    /// Cut separation over all `p` columns.
    Cuts,
    /// Column generation; each restricted problem is solved to cut
    /// convergence before pricing.
    Columns,
    /// One cut and one column batch per round.
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeConfig {
    pub cutgen: CutgenConfig,
    pub mode: SlopeMode,
    /// Defaults to `10 * p` when `None`.
    pub max_cuts: Option<usize>,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        SlopeConfig {
            cutgen: CutgenConfig {
                max_added_per_round: Some(10),
                ..CutgenConfig::default()
            },
            mode: SlopeMode::Both,
            max_cuts: None,
        }
    }
}

impl SlopeConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        let mut cfg = Self::default();
        cfg.cutgen.epsilon = epsilon;
        cfg
    }
}

struct SlopeMaster<'a> {
    master: Master<'a>,
    w: &'a SlopeWeights,
    pool: CutPool,
    eta_col: usize,
    cut_rows: Vec<usize>,
}

impl<'a> SlopeMaster<'a> {
    fn new(d: &'a Dataset, w: &'a SlopeWeights, columns: Vec<usize>) -> Result<Self> {
        let all: Vec<usize> = (0..d.n()).collect();
        let mut master = Master::new(d, &all)?;
        let eta_col = master.add_column(1.0, 0.0, INF, vec![])?;
        master.add_features(&columns, 0.0, |_| Vec::new())?;
        Ok(SlopeMaster {
            master,
            w,
            pool: CutPool::new(columns)?,
            eta_col,
            cut_rows: Vec::new(),
        })
    }

    fn magnitudes(&self) -> Vec<f64> {
        let beta = self.master.beta();
        self.pool.columns.iter().map(|&j| beta[j].abs()).collect()
    }

    fn eta(&self) -> f64 {
        self.master.last().map_or(0.0, |s| s.primal[self.eta_col])
    }

    /// The cut for the current solution when it is violated by more than
    /// `epsilon`.
    fn separate(&self, epsilon: f64) -> Option<Vec<f64>> {
        let mags = self.magnitudes();
        let cut = cut_for(&mags, &self.pool.columns, self.w);
        (self.eta() + epsilon < sorted_norm(&mags, &cut)).then_some(cut)
    }

    fn add_cut(&mut self, cut: Vec<f64>) -> Result<()> {
        let mut entries = vec![(self.eta_col, 1.0)];
        for (&j, &c) in self.pool.columns.iter().zip(&cut) {
            if c != 0.0 {
                let (plus, minus) = self.master.feature_columns(j).expect("pool column");
                entries.push((plus, -c));
                entries.push((minus, -c));
            }
        }
        self.cut_rows.push(self.master.add_row(RowSense::Ge, 0.0, entries)?);
        self.pool.push(cut)
    }

    fn add_columns(&mut self, new: &[usize]) -> Result<()> {
        let base = self.pool.columns.len();
        let rows = self.cut_rows.clone();
        let w = self.w;
        self.master.add_features(new, 0.0, |j| {
            let k = new.iter().position(|&c| c == j).expect("new column");
            let weight = w.get_or_zero(base + k);
            if weight == 0.0 {
                Vec::new()
            } else {
                rows.iter().map(|&r| (r, -weight)).collect()
            }
        })?;
        extend_cuts(&mut self.pool, new, self.w)
    }

    fn price(&self, cfg: &CutgenConfig) -> Vec<usize> {
        let d = self.master.data();
        let duals = self.master.duals_full();
        let cols = price_slope_columns(
            d,
            &duals,
            self.w,
            &self.pool.columns,
            cfg.epsilon,
            cfg.max_added_per_round,
        );
        if !cols.is_empty() {
            return cols;
        }
        let fallback = price_slope_prefix(
            d,
            &duals,
            self.w,
            &self.pool.columns,
            cfg.epsilon,
            cfg.max_added_per_round,
        );
        if !fallback.is_empty() {
            log::debug!("prefix check added {} columns missed by the threshold rule", fallback.len());
        }
        fallback
    }
}

/// Column-and-cut generation for the Slope-SVM. `j_init` seeds the columns
/// (ignored in [`SlopeMode::Cuts`], which uses all of them); the first cut
/// orders the columns by `|beta_init|`, or by index when no initializer is
/// given.
pub fn solve_slope(
    d: &Dataset,
    w: &SlopeWeights,
    j_init: &[usize],
    beta_init: Option<&[f64]>,
    cfg: &SlopeConfig,
) -> Result<SvmSolution> {
    cfg.cutgen.validate()?;
    check_weights(d, w)?;
    w.as_slice().iter().try_for_each(|&l| check_lambda(l))?;
    if let Some(b) = beta_init {
        if b.len() != d.p() {
            return Err(Error::Dimension(format!("initializer has {} entries, expected {}", b.len(), d.p())));
        }
    }
    let columns: Vec<usize> = if cfg.mode == SlopeMode::Cuts {
        (0..d.p()).collect()
    } else {
        if j_init.is_empty() {
            return Err(Error::domain("initial column set is empty"));
        }
        if let Some(&j) = j_init.iter().find(|&&j| j >= d.p()) {
            return Err(Error::Dimension(format!("feature {j} out of range")));
        }
        let mut c = j_init.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    let start = Instant::now();
    let mut sm = SlopeMaster::new(d, w, columns)?;
    let mags: Vec<f64> = match beta_init {
        Some(b) => sm.pool.columns.iter().map(|&j| b[j].abs()).collect(),
        None => vec![0.0; sm.pool.columns.len()],
    };
    let first = cut_for(&mags, &sm.pool.columns.clone(), w);
    sm.add_cut(first)?;
    let max_cuts = cfg.max_cuts.unwrap_or(10 * d.p()).max(1);
    let eps = cfg.cutgen.epsilon;
    let mut rounds = 0;
    let certified = loop {
        rounds += 1;
        sm.master.solve()?;
        let cut = sm.separate(eps);
        let cols = match (cfg.mode, &cut) {
            (SlopeMode::Cuts, _) | (SlopeMode::Columns, Some(_)) => Vec::new(),
            _ => sm.price(&cfg.cutgen),
        };
        log::debug!(
            "round {rounds}: |J|={} cuts={} eta={:.6} new cut: {} new columns: {}",
            sm.pool.columns.len(),
            sm.pool.len(),
            sm.eta(),
            cut.is_some(),
            cols.len()
        );
        if cut.is_none() && cols.is_empty() {
            break true;
        }
        if rounds >= cfg.cutgen.max_outer {
            log::warn!("stopping after {rounds} rounds without certification");
            break false;
        }
        if let Some(cut) = cut {
            if sm.pool.len() >= max_cuts {
                log::warn!("cut pool reached {max_cuts} cuts; stopping");
                break false;
            }
            sm.add_cut(cut)?;
        }
        if !cols.is_empty() {
            sm.add_columns(&cols)?;
        }
    };
    let master = &sm.master;
    let objective = slope_objective(d, master.beta(), master.beta0(), w);
    let diag = Diagnostics {
        outer_rounds: rounds,
        pivots: master.pivots(),
        cuts: sm.pool.len(),
        seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(collect_solution(master, objective, Some(sm.eta()), certified, diag))
}

/// Optimal Slope-SVM objective from the exact formulation with `O(p^2)`
/// variables: with `kappa_m = lambda_m - lambda_{m+1} >= 0`, the norm is
/// `sum_m kappa_m * topsum_m(|beta|)`, and each top-`m` sum is
/// `min m theta_m + sum_j v_mj` subject to `v_mj >= |beta_j| - theta_m`,
/// `v_mj >= 0`.
pub fn slope_oracle_small(d: &Dataset, w: &SlopeWeights) -> Result<f64> {
    check_weights(d, w)?;
    let p = d.p();
    if p > ORACLE_MAX_P {
        return Err(Error::domain(format!("oracle is limited to p <= {ORACLE_MAX_P}, got {p}")));
    }
    let n = d.n();
    let mut m = LpModel::new();
    for _ in 0..n {
        m.add_row(RowSense::Ge, 1.0, &[])?;
    }
    for i in 0..n {
        m.add_column(1.0, 0.0, INF, vec![(i, 1.0)])?;
    }
    let mut abs_cols = Vec::with_capacity(p);
    let x = d.features();
    for j in 0..p {
        let mut plus = Vec::new();
        x.for_each_in_col(j, |i, v| plus.push((i, d.y(i) * v)));
        let minus = plus.iter().map(|&(r, v)| (r, -v)).collect();
        abs_cols.push((m.add_column(0.0, 0.0, INF, plus)?, m.add_column(0.0, 0.0, INF, minus)?));
    }
    m.add_column(0.0, -INF, INF, (0..n).map(|i| (i, d.y(i))).collect())?;
    for k in 0..p {
        let kappa = w.get(k) - w.get_or_zero(k + 1);
        if kappa <= 0.0 {
            continue;
        }
        let first_row = m.num_rows();
        for &(plus, minus) in &abs_cols {
            m.add_row(RowSense::Ge, 0.0, &[(plus, -1.0), (minus, -1.0)])?;
        }
        let links: Vec<(usize, f64)> = (0..p).map(|j| (first_row + j, 1.0)).collect();
        m.add_column(kappa * (k + 1) as f64, -INF, INF, links)?;
        for j in 0..p {
            m.add_column(kappa, 0.0, INF, vec![(first_row + j, 1.0)])?;
        }
    }
    let (sol, _) = lp::solve(&m, None)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::NotOptimal(sol.status));
    }
    Ok(sol.objective)
}
