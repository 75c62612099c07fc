//! Bounded-variable primal revised simplex.
//!
//! Phase 1 minimizes the sum of basic bound violations (composite costs of
//! -1/+1 recomputed every iteration) starting from whatever basis it is
//! given, so warm starts that became infeasible after rows were appended
//! continue from their old basis. Pricing is Dantzig (partial on large
//! models). A long run of degenerate pivots triggers a one-off random
//! widening of the bounds, removed again before optimality is declared;
//! Bland's rule is the fallback if stalling recurs afterwards.
//! The ratio test is the two-pass Harris test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::factor::BasisFactor;
use super::{Basis, LpError, LpModel, LpSolution, LpStatus, SolverOptions, VarStatus};

const NONE: usize = usize::MAX;
const PIV_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const PARTIAL_PRICING_MIN: usize = 4000;
const PERTURB: f64 = 1e-6;
const PERTURB_SEED: u64 = 0x5eed;

enum Step {
    Flip(f64),
    Pivot { pos: usize, t: f64, to_upper: bool },
    Unbounded,
}

pub(super) struct Simplex<'a> {
    model: &'a LpModel,
    opts: &'a SolverOptions,
    m: usize,
    ncols: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    pos: Vec<usize>,
    factor: BasisFactor,
    iterations: usize,
    price_start: usize,
    fixed: Vec<bool>,
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    perturbed_once: bool,
}

fn nonbasic_value(s: VarStatus, lower: f64, upper: f64) -> f64 {
    match s {
        VarStatus::AtLower => lower,
        VarStatus::AtUpper => upper,
        _ => 0.0,
    }
}

impl<'a> Simplex<'a> {
    pub(super) fn new(model: &'a LpModel, opts: &'a SolverOptions, basis: &Basis) -> Result<Self, LpError> {
        let m = model.num_rows();
        let ncols = model.num_cols();
        let mut lower = Vec::with_capacity(ncols + m);
        let mut upper = Vec::with_capacity(ncols + m);
        let mut cost = Vec::with_capacity(ncols + m);
        for c in model.columns() {
            lower.push(c.lower);
            upper.push(c.upper);
            cost.push(c.cost);
        }
        for r in model.rows() {
            let (lo, hi) = r.logical_bounds();
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
        }
        let status: Vec<VarStatus> = basis.cols.iter().chain(&basis.rows).copied().collect();
        let x = status
            .iter()
            .enumerate()
            .map(|(v, &s)| nonbasic_value(s, lower[v], upper[v]))
            .collect();
        let head: Vec<usize> = (0..ncols + m).filter(|&v| status[v] == VarStatus::Basic).collect();
        let mut pos = vec![NONE; ncols + m];
        for (k, &v) in head.iter().enumerate() {
            pos[v] = k;
        }
        // placeholder factor, replaced below
        let factor = BasisFactor::new(0, &[])?;
        let mut s = Simplex {
            model,
            opts,
            m,
            ncols,
            lower,
            upper,
            cost,
            x,
            status,
            head,
            pos,
            factor,
            iterations: 0,
            price_start: 0,
            fixed: Vec::new(),
            saved_bounds: None,
            perturbed_once: false,
        };
        s.fixed = (0..ncols + m).map(|v| s.lower[v] == s.upper[v]).collect();
        s.refactor()?;
        Ok(s)
    }

    fn column(&self, v: usize) -> Vec<(usize, f64)> {
        if v < self.ncols {
            self.model.column(v).entries.clone()
        } else {
            vec![(v - self.ncols, -1.0)]
        }
    }

    #[inline]
    fn col_dot(&self, v: usize, y: &[f64]) -> f64 {
        if v < self.ncols {
            self.model.column(v).entries.iter().map(|&(r, a)| y[r] * a).sum()
        } else {
            -y[v - self.ncols]
        }
    }

    /// Refactorizes the current basis and recomputes basic values. A
    /// singular basis is replaced by the all-logical one.
    fn refactor(&mut self) -> Result<(), LpError> {
        let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&v| self.column(v)).collect();
        match BasisFactor::new(self.m, &cols) {
            Ok(f) => self.factor = f,
            Err(e) => {
                log::debug!("refactorization failed ({e}); restarting from slack basis");
                self.reset_to_slack();
                let cols: Vec<Vec<(usize, f64)>> = self.head.iter().map(|&v| self.column(v)).collect();
                self.factor = BasisFactor::new(self.m, &cols)?;
            }
        }
        self.compute_basics();
        Ok(())
    }

    /// Widens every finite bound by a small pseudo-random amount so that a
    /// stalled degenerate vertex becomes nondegenerate.
    fn perturb(&mut self) -> Result<(), LpError> {
        log::debug!("perturbing bounds after {} iterations", self.iterations);
        self.saved_bounds = Some((self.lower.clone(), self.upper.clone()));
        self.perturbed_once = true;
        let mut rng = ChaCha8Rng::seed_from_u64(PERTURB_SEED);
        for v in 0..self.ncols + self.m {
            if self.fixed[v] && self.status[v] != VarStatus::Basic {
                continue;
            }
            let (l, u) = (self.lower[v], self.upper[v]);
            if l.is_finite() {
                self.lower[v] = l - PERTURB * (1.0 + l.abs()) * rng.gen_range(1.0..2.0);
            }
            if u.is_finite() {
                self.upper[v] = u + PERTURB * (1.0 + u.abs()) * rng.gen_range(1.0..2.0);
            }
            if self.status[v] != VarStatus::Basic {
                self.x[v] = nonbasic_value(self.status[v], self.lower[v], self.upper[v]);
            }
        }
        self.refactor()
    }

    /// Restores the original bounds; the next iterations repair any
    /// resulting infeasibility.
    fn unperturb(&mut self) -> Result<(), LpError> {
        let (lower, upper) = self.saved_bounds.take().expect("perturbed");
        self.lower = lower;
        self.upper = upper;
        for v in 0..self.ncols + self.m {
            if self.status[v] == VarStatus::AtLower || self.status[v] == VarStatus::AtUpper {
                if self.fixed[v] {
                    self.status[v] = VarStatus::AtLower;
                }
                self.x[v] = nonbasic_value(self.status[v], self.lower[v], self.upper[v]);
            }
        }
        self.refactor()
    }

    fn reset_to_slack(&mut self) {
        for v in 0..self.ncols {
            if self.status[v] == VarStatus::Basic {
                let (l, u, xv) = (self.lower[v], self.upper[v], self.x[v]);
                let s = if l.is_finite() && (!u.is_finite() || (xv - l).abs() <= (u - xv).abs()) {
                    VarStatus::AtLower
                } else if u.is_finite() {
                    VarStatus::AtUpper
                } else {
                    VarStatus::Free
                };
                self.status[v] = s;
                if s != VarStatus::Free {
                    self.x[v] = nonbasic_value(s, l, u);
                }
            }
        }
        for r in 0..self.m {
            self.status[self.ncols + r] = VarStatus::Basic;
        }
        self.head = (self.ncols..self.ncols + self.m).collect();
        self.pos = vec![NONE; self.ncols + self.m];
        for (k, &v) in self.head.iter().enumerate() {
            self.pos[v] = k;
        }
    }

    fn compute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for v in 0..self.ncols + self.m {
            if self.status[v] == VarStatus::Basic || self.x[v] == 0.0 {
                continue;
            }
            let xv = self.x[v];
            if v < self.ncols {
                for &(r, a) in &self.model.column(v).entries {
                    rhs[r] -= a * xv;
                }
            } else {
                rhs[v - self.ncols] += xv;
            }
        }
        let xb = self.factor.ftran(&rhs);
        for (k, &v) in self.head.iter().enumerate() {
            self.x[v] = xb[k];
        }
    }

    fn violation(&self, v: usize) -> f64 {
        (self.lower[v] - self.x[v]).max(self.x[v] - self.upper[v]).max(0.0)
    }

    fn phase1_cost(&self, v: usize) -> f64 {
        let tol = self.opts.feas_tol;
        if self.x[v] < self.lower[v] - tol {
            -1.0
        } else if self.x[v] > self.upper[v] + tol {
            1.0
        } else {
            0.0
        }
    }

    /// Score and direction of `v` as an entering candidate.
    #[inline]
    fn candidate(&self, v: usize, y: &[f64], phase1: bool) -> Option<(f64, f64)> {
        let s = self.status[v];
        if s == VarStatus::Basic || self.fixed[v] {
            return None;
        }
        let c = if phase1 { 0.0 } else { self.cost[v] };
        let d = c - self.col_dot(v, y);
        let tol = self.opts.opt_tol;
        match s {
            VarStatus::AtLower if d < -tol => Some((-d, 1.0)),
            VarStatus::AtUpper if d > tol => Some((d, -1.0)),
            VarStatus::Free if d.abs() > tol => Some((d.abs(), -d.signum())),
            _ => None,
        }
    }

    fn price(&mut self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let nvar = self.ncols + self.m;
        if bland {
            return (0..nvar).find_map(|v| self.candidate(v, y, phase1).map(|(_, d)| (v, d)));
        }
        let mut best: Option<(usize, f64, f64)> = None;
        let consider = |v: usize, best: &mut Option<(usize, f64, f64)>| {
            if let Some((score, dir)) = self.candidate(v, y, phase1) {
                if best.map_or(true, |b| score > b.1) {
                    *best = Some((v, score, dir));
                }
            }
        };
        if nvar < PARTIAL_PRICING_MIN {
            for v in 0..nvar {
                consider(v, &mut best);
            }
        } else {
            let seg = (nvar / 8).max(PARTIAL_PRICING_MIN / 2);
            let mut scanned = 0;
            let mut v = self.price_start % nvar;
            while scanned < nvar {
                let end = (scanned + seg).min(nvar);
                while scanned < end {
                    consider(v, &mut best);
                    v = (v + 1) % nvar;
                    scanned += 1;
                }
                if best.is_some() {
                    break;
                }
            }
            self.price_start = v;
        }
        best.map(|(v, _, d)| (v, d))
    }

    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Step {
        let tol = self.opts.feas_tol;
        // (position, exact ratio, relaxed ratio, leaves at upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() < PIV_TOL {
                continue;
            }
            let v = self.head[i];
            let rate = -dir * a;
            let (xv, l, u) = (self.x[v], self.lower[v], self.upper[v]);
            if rate < 0.0 {
                if xv < l - tol {
                    continue;
                }
                if xv > u + tol {
                    let r = (xv - u) / -rate;
                    cands.push((i, r, r, true));
                } else if l.is_finite() {
                    cands.push((i, ((xv - l) / -rate).max(0.0), (xv - l + tol) / -rate, false));
                }
            } else {
                if xv > u + tol {
                    continue;
                }
                if xv < l - tol {
                    let r = (l - xv) / rate;
                    cands.push((i, r, r, false));
                } else if u.is_finite() {
                    cands.push((i, ((u - xv) / rate).max(0.0), (u - xv + tol) / rate, true));
                }
            }
        }
        let chosen = if bland {
            let min = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= min + 1e-12 * (1.0 + min.abs()))
                .min_by_key(|c| self.head[c.0])
                .copied()
        } else {
            let theta = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= theta)
                .max_by(|a, b| alpha[a.0].abs().total_cmp(&alpha[b.0].abs()))
                .copied()
        };
        let range = self.upper[q] - self.lower[q];
        match chosen {
            Some((_, t, _, _)) if range.is_finite() && range <= t => Step::Flip(range),
            Some((pos, t, _, to_upper)) => Step::Pivot { pos, t, to_upper },
            None if range.is_finite() => Step::Flip(range),
            None => Step::Unbounded,
        }
    }

    pub(super) fn run(mut self) -> Result<(LpSolution, Basis), LpError> {
        let max_iter = self
            .opts
            .max_iter
            .unwrap_or_else(|| (20 * (self.m + self.ncols)).max(10_000));
        let mut degenerate = 0usize;
        let mut fresh = true;
        let status = loop {
            if self.factor.eta_count() >= self.opts.refactor_every {
                self.refactor()?;
                fresh = true;
            }
            let phase1 = self.head.iter().any(|&v| self.violation(v) > self.opts.feas_tol);
            let cb: Vec<f64> = self
                .head
                .iter()
                .map(|&v| if phase1 { self.phase1_cost(v) } else { self.cost[v] })
                .collect();
            let y = self.factor.btran(&cb);
            if degenerate >= self.opts.bland_after && !self.perturbed_once {
                self.perturb()?;
                degenerate = 0;
                fresh = true;
                continue;
            }
            let bland = degenerate >= self.opts.bland_after;
            let Some((q, dir)) = self.price(&y, phase1, bland) else {
                if !fresh {
                    self.refactor()?;
                    fresh = true;
                    continue;
                }
                if self.saved_bounds.is_some() {
                    self.unperturb()?;
                    degenerate = 0;
                    continue;
                }
                break if phase1 {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            if self.iterations >= max_iter {
                break LpStatus::IterationLimit;
            }
            let mut a = vec![0.0; self.m];
            for (r, v) in self.column(q) {
                a[r] += v;
            }
            let alpha = self.factor.ftran(&a);
            let step = self.ratio_test(q, dir, &alpha, bland);
            let t = match step {
                Step::Unbounded if phase1 => {
                    // cannot happen in exact arithmetic; resync and retry
                    if fresh {
                        return Err(LpError::Factorization(
                            "phase 1 found an unbounded ray; basis is numerically unstable".into(),
                        ));
                    }
                    self.refactor()?;
                    fresh = true;
                    continue;
                }
                Step::Unbounded => break LpStatus::Unbounded,
                Step::Flip(t) | Step::Pivot { t, .. } => t,
            };
            self.iterations += 1;
            fresh = false;
            if t > 0.0 {
                self.x[q] += dir * t;
                for (i, &ai) in alpha.iter().enumerate() {
                    if ai != 0.0 {
                        self.x[self.head[i]] -= dir * ai * t;
                    }
                }
            }
            match step {
                Step::Flip(_) => {
                    let up = dir > 0.0;
                    self.status[q] = if up { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[q] = if up { self.upper[q] } else { self.lower[q] };
                }
                Step::Pivot { pos, to_upper, .. } => {
                    let leaving = self.head[pos];
                    self.x[leaving] = if to_upper {
                        self.upper[leaving]
                    } else {
                        self.lower[leaving]
                    };
                    self.status[leaving] = if to_upper {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    self.pos[leaving] = NONE;
                    self.head[pos] = q;
                    self.pos[q] = pos;
                    self.status[q] = VarStatus::Basic;
                    self.factor.push_eta(pos, &alpha);
                }
                Step::Unbounded => unreachable!(),
            }
            if t <= DEGENERATE_STEP {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
        };
        Ok(self.finish(status))
    }

    fn finish(self, status: LpStatus) -> (LpSolution, Basis) {
        let cb: Vec<f64> = self.head.iter().map(|&v| self.cost[v]).collect();
        let duals = self.factor.btran(&cb);
        let reduced_costs: Vec<f64> = (0..self.ncols)
            .map(|j| self.cost[j] - self.col_dot(j, &duals))
            .collect();
        let primal: Vec<f64> = self.x[..self.ncols].to_vec();
        let objective = self.model.objective_value(&primal);
        let basis = Basis {
            cols: self.status[..self.ncols].to_vec(),
            rows: self.status[self.ncols..].to_vec(),
        };
        log::trace!(
            "simplex: {:?} after {} iterations (kernel {})",
            status,
            self.iterations,
            self.factor.kernel_size()
        );
        (
            LpSolution {
                status,
                primal,
                duals,
                reduced_costs,
                objective,
                pivot_count: self.iterations,
            },
            basis,
        )
    }
}

/// Duals of `basis` without running the simplex. Fails on a singular basis.
pub(super) fn basis_duals(m: &LpModel, basis: &Basis) -> Result<Vec<f64>, LpError> {
    let ncols = m.num_cols();
    let head: Vec<usize> = basis
        .cols
        .iter()
        .chain(&basis.rows)
        .enumerate()
        .filter(|(_, &s)| s == VarStatus::Basic)
        .map(|(v, _)| v)
        .collect();
    let cols: Vec<Vec<(usize, f64)>> = head
        .iter()
        .map(|&v| {
            if v < ncols {
                m.column(v).entries.clone()
            } else {
                vec![(v - ncols, -1.0)]
            }
        })
        .collect();
    let factor = BasisFactor::new(m.num_rows(), &cols)?;
    let cb: Vec<f64> = head
        .iter()
        .map(|&v| if v < ncols { m.column(v).cost } else { 0.0 })
        .collect();
    Ok(factor.btran(&cb))
}
