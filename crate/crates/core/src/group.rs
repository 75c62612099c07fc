//! Group-SVM with an L1/L-infinity penalty `lambda * sum_g ||beta_g||_inf`.
//!
//! Each active group contributes a bound variable `v_g` with cost `lambda`
//! and one linking row `v_g - beta+_j - beta-_j >= 0` per member. Column
//! generation works on whole groups; constraint generation is shared with
//! the L1 drivers.

use std::time::Instant;

use crate::data::{Dataset, GroupStructure};
use crate::error::{Error, Result};
use crate::l1::{
    check_grid, check_lambda, collect_solution, ensure_both_classes, lambda_max_duals, price_constraints, top_k,
    CutgenConfig, Diagnostics, SvmSolution,
};
use crate::lp::{LpModel, RowSense, INF};
use crate::master::Master;

/// `sum_i hinge_i + lambda * sum_g max_{j in g} |beta_j|`.
pub fn group_objective(d: &Dataset, groups: &GroupStructure, beta: &[f64], beta0: f64, lambda: f64) -> f64 {
    d.hinge_loss(beta, beta0) + lambda * group_norm(groups, beta)
}

pub fn group_norm(groups: &GroupStructure, beta: &[f64]) -> f64 {
    groups
        .groups()
        .iter()
        .map(|g| g.iter().map(|&j| beta[j].abs()).fold(0.0, f64::max))
        .sum()
}

fn check_groups(d: &Dataset, groups: &GroupStructure, active: &[usize]) -> Result<()> {
    if groups.p() != d.p() {
        return Err(Error::Dimension(format!(
            "group structure covers {} features, data has {}",
            groups.p(),
            d.p()
        )));
    }
    if let Some(&g) = active.iter().find(|&&g| g >= groups.len()) {
        return Err(Error::Dimension(format!("group {g} out of range")));
    }
    Ok(())
}

fn sorted_unique(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Builds the restricted group model over samples `samples` and groups
/// `active_groups`. Column layout: `xi` per sample, then for each group
/// `v_g` followed by the `beta+`/`beta-` pair of each member, then the free
/// intercept. Rows: hinge rows, then one linking row per active member.
pub fn build_group_restricted(
    d: &Dataset,
    groups: &GroupStructure,
    lambda: f64,
    active_groups: &[usize],
    samples: &[usize],
) -> Result<LpModel> {
    check_groups(d, groups, active_groups)?;
    if samples.is_empty() {
        return Err(Error::domain("restricted model needs at least one sample"));
    }
    if let Some(&i) = samples.iter().find(|&&i| i >= d.n()) {
        return Err(Error::Dimension(format!("sample {i} out of range")));
    }
    let samples = sorted_unique(samples.to_vec());
    let active_groups = sorted_unique(active_groups.to_vec());
    let nr = samples.len();
    let mut row_of = vec![usize::MAX; d.n()];
    for (k, &i) in samples.iter().enumerate() {
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
    for &g in &active_groups {
        let first_link = m.num_rows();
        let members = groups.group(g);
        for _ in members {
            m.add_row(RowSense::Ge, 0.0, &[])?;
        }
        let links: Vec<(usize, f64)> = (0..members.len()).map(|k| (first_link + k, 1.0)).collect();
        m.add_column(lambda, 0.0, INF, links)?;
        for (k, &j) in members.iter().enumerate() {
            let mut plus = Vec::new();
            x.for_each_in_col(j, |i, v| {
                if row_of[i] != usize::MAX {
                    plus.push((row_of[i], d.y(i) * v));
                }
            });
            let mut minus: Vec<(usize, f64)> = plus.iter().map(|&(r, v)| (r, -v)).collect();
            plus.push((first_link + k, -1.0));
            minus.push((first_link + k, -1.0));
            m.add_column(0.0, 0.0, INF, plus)?;
            m.add_column(0.0, 0.0, INF, minus)?;
        }
    }
    let b0 = samples.iter().enumerate().map(|(k, &i)| (k, d.y(i))).collect();
    m.add_column(0.0, -INF, INF, b0)?;
    Ok(m)
}

/// `sum_{j in g} |q_j|` for every group, with `q = X^T (y * duals)`.
pub fn group_scores(d: &Dataset, groups: &GroupStructure, duals: &[f64]) -> Vec<f64> {
    let q = d.signed_correlations(duals);
    groups
        .groups()
        .iter()
        .map(|g| g.iter().map(|&j| q[j].abs()).sum())
        .collect()
}

/// Inactive groups whose reduced cost `lambda - sum_{j in g} |q_j|` is
/// below `-epsilon`, sorted by index. With `cap`, only the most violated
/// groups are kept.
pub fn price_groups(
    d: &Dataset,
    groups: &GroupStructure,
    duals: &[f64],
    lambda: f64,
    active_groups: &[usize],
    epsilon: f64,
    cap: Option<usize>,
) -> Vec<usize> {
    let scores = group_scores(d, groups, duals);
    let mut active = vec![false; groups.len()];
    for &g in active_groups {
        active[g] = true;
    }
    let mut cands: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|&(g, &s)| !active[g] && s - lambda > epsilon)
        .map(|(g, &s)| (g, s - lambda))
        .collect();
    if let Some(cap) = cap {
        if cands.len() > cap {
            cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            cands.truncate(cap);
        }
    }
    sorted_unique(cands.into_iter().map(|c| c.0).collect())
}

/// The `j0` groups with the most negative reduced cost at `lambda_max`.
pub fn group_path_init(d: &Dataset, groups: &GroupStructure, j0: usize) -> Vec<usize> {
    top_k(&group_scores(d, groups, &lambda_max_duals(d)), j0)
}

struct GroupMaster<'a> {
    master: Master<'a>,
    groups: &'a GroupStructure,
    v_col: Vec<Option<usize>>,
    active: Vec<usize>,
}

impl<'a> GroupMaster<'a> {
    fn new(d: &'a Dataset, groups: &'a GroupStructure, samples: &[usize]) -> Result<Self> {
        Ok(GroupMaster {
            master: Master::new(d, samples)?,
            groups,
            v_col: vec![None; groups.len()],
            active: Vec::new(),
        })
    }

    fn add_groups(&mut self, new: &[usize], lambda: f64) -> Result<()> {
        for &g in new {
            if self.v_col[g].is_some() {
                continue;
            }
            let v = self.master.add_column(lambda, 0.0, INF, vec![])?;
            let members = self.groups.group(g);
            let mut link = Vec::with_capacity(members.len());
            for &j in members {
                link.push((j, self.master.add_row(RowSense::Ge, 0.0, vec![(v, 1.0)])?));
            }
            self.master.add_features(members, 0.0, |j| {
                let row = link.iter().find(|l| l.0 == j).expect("member").1;
                vec![(row, -1.0)]
            })?;
            self.v_col[g] = Some(v);
            self.active.push(g);
        }
        Ok(())
    }

    fn set_lambda(&mut self, lambda: f64) {
        for &g in &self.active {
            self.master.set_cost(self.v_col[g].expect("active group"), lambda);
        }
    }

    fn drive(&mut self, lambda: f64, cfg: &CutgenConfig, cols: bool, rows: bool) -> Result<SvmSolution> {
        let start = Instant::now();
        let pivots0 = self.master.pivots();
        let d = self.master.data();
        let mut rounds = 0;
        let certified = loop {
            rounds += 1;
            self.master.solve()?;
            let new_rows = if rows {
                price_constraints(
                    d,
                    self.master.beta(),
                    self.master.beta0(),
                    self.master.samples(),
                    cfg.epsilon,
                    cfg.max_added_per_round,
                )
            } else {
                Vec::new()
            };
            let new_groups = if cols {
                price_groups(
                    d,
                    self.groups,
                    &self.master.duals_full(),
                    lambda,
                    &self.active,
                    cfg.epsilon,
                    cfg.max_added_per_round,
                )
            } else {
                Vec::new()
            };
            log::debug!(
                "round {rounds}: |I|={} groups={} adding {} rows, {} groups",
                self.master.num_samples(),
                self.active.len(),
                new_rows.len(),
                new_groups.len()
            );
            if new_rows.is_empty() && new_groups.is_empty() {
                break true;
            }
            if rounds >= cfg.max_outer {
                log::warn!("stopping after {rounds} rounds without certification");
                break false;
            }
            self.master.add_samples(&new_rows)?;
            self.add_groups(&new_groups, lambda)?;
        };
        let objective = group_objective(d, self.groups, self.master.beta(), self.master.beta0(), lambda);
        let diag = Diagnostics {
            outer_rounds: rounds,
            pivots: self.master.pivots() - pivots0,
            seconds: start.elapsed().as_secs_f64(),
            ..Default::default()
        };
        let mut sol = collect_solution(&self.master, objective, None, certified, diag);
        sol.groups = sorted_unique(self.active.clone());
        Ok(sol)
    }
}

fn prepare(d: &Dataset, groups: &GroupStructure, lambda: f64, active: &[usize], cfg: &CutgenConfig) -> Result<()> {
    check_lambda(lambda)?;
    cfg.validate()?;
    check_groups(d, groups, active)
}

/// Solves the full group model in one LP.
pub fn solve_group_full(d: &Dataset, groups: &GroupStructure, lambda: f64) -> Result<SvmSolution> {
    let cfg = CutgenConfig::default();
    prepare(d, groups, lambda, &[], &cfg)?;
    let all: Vec<usize> = (0..d.n()).collect();
    let mut gm = GroupMaster::new(d, groups, &all)?;
    gm.add_groups(&(0..groups.len()).collect::<Vec<_>>(), lambda)?;
    gm.drive(lambda, &cfg, false, false)
}

/// Group column generation over all samples, starting from `g_init`.
pub fn solve_group_colgen(
    d: &Dataset,
    groups: &GroupStructure,
    lambda: f64,
    g_init: &[usize],
    cfg: &CutgenConfig,
) -> Result<SvmSolution> {
    prepare(d, groups, lambda, g_init, cfg)?;
    let all: Vec<usize> = (0..d.n()).collect();
    let mut gm = GroupMaster::new(d, groups, &all)?;
    gm.add_groups(&sorted_unique(g_init.to_vec()), lambda)?;
    gm.drive(lambda, cfg, true, false)
}

/// Constraint generation over all groups, starting from samples `i_init`.
pub fn solve_group_congen(
    d: &Dataset,
    groups: &GroupStructure,
    lambda: f64,
    i_init: &[usize],
    cfg: &CutgenConfig,
) -> Result<SvmSolution> {
    prepare(d, groups, lambda, &[], cfg)?;
    if let Some(&i) = i_init.iter().find(|&&i| i >= d.n()) {
        return Err(Error::Dimension(format!("sample {i} out of range")));
    }
    let mut gm = GroupMaster::new(d, groups, &ensure_both_classes(d, i_init.to_vec()))?;
    gm.add_groups(&(0..groups.len()).collect::<Vec<_>>(), lambda)?;
    gm.drive(lambda, cfg, false, true)
}

/// Combined group and constraint generation.
pub fn solve_group_colcon(
    d: &Dataset,
    groups: &GroupStructure,
    lambda: f64,
    g_init: &[usize],
    i_init: &[usize],
    cfg: &CutgenConfig,
) -> Result<SvmSolution> {
    prepare(d, groups, lambda, g_init, cfg)?;
    if let Some(&i) = i_init.iter().find(|&&i| i >= d.n()) {
        return Err(Error::Dimension(format!("sample {i} out of range")));
    }
    let mut gm = GroupMaster::new(d, groups, &ensure_both_classes(d, i_init.to_vec()))?;
    gm.add_groups(&sorted_unique(g_init.to_vec()), lambda)?;
    gm.drive(lambda, cfg, true, true)
}

/// Group column-generation path over a strictly decreasing `grid`.
pub fn group_regularization_path(
    d: &Dataset,
    groups: &GroupStructure,
    grid: &[f64],
    j0: usize,
    cfg: &CutgenConfig,
) -> Result<Vec<SvmSolution>> {
    cfg.validate()?;
    check_grid(grid)?;
    check_groups(d, groups, &[])?;
    if j0 == 0 {
        return Err(Error::domain("j0 must be at least 1"));
    }
    let all: Vec<usize> = (0..d.n()).collect();
    let mut gm = GroupMaster::new(d, groups, &all)?;
    gm.add_groups(&group_path_init(d, groups, j0.min(groups.len())), grid[0])?;
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        gm.set_lambda(lambda);
        out.push(gm.drive(lambda, cfg, true, false)?);
    }
    Ok(out)
}
