//! Linear programming substrate for the restricted master problems.
//!
//! Models are always minimizations. Each row `i` gets a logical variable
//! `r_i = a_i^T x` whose bounds encode the row sense, so the simplex works on
//! `A x - r = 0` with bounds only. Warm starts are expressed as a [`Basis`]
//! of per-column and per-row statuses; a basis taken from a smaller model is
//! padded when columns or rows have been appended since.

mod dump;
mod factor;
mod simplex;

use thiserror::Error;

pub use dump::write_lp;

pub const INF: f64 = f64::INFINITY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("basis factorization failed: {0}")]
    Factorization(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    /// `(row, coefficient)` pairs.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub sense: RowSense,
    pub rhs: f64,
}

impl Row {
    fn logical_bounds(&self) -> (f64, f64) {
        match self.sense {
            RowSense::Ge => (self.rhs, INF),
            RowSense::Le => (-INF, self.rhs),
            RowSense::Eq => (self.rhs, self.rhs),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    columns: Vec<Column>,
    rows: Vec<Row>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Appends a column; `entries` refer to existing rows.
    pub fn add_column(
        &mut self,
        cost: f64,
        lower: f64,
        upper: f64,
        entries: Vec<(usize, f64)>,
    ) -> Result<usize, LpError> {
        if !cost.is_finite() {
            return Err(LpError::Invalid(format!("column cost {cost} is not finite")));
        }
        if lower > upper || lower == INF || upper == -INF || lower.is_nan() || upper.is_nan() {
            return Err(LpError::Invalid(format!("bad bounds [{lower}, {upper}]")));
        }
        if let Some(&(r, _)) = entries.iter().find(|e| e.0 >= self.rows.len()) {
            return Err(LpError::Dimension(format!(
                "column entry on row {r}, model has {} rows",
                self.rows.len()
            )));
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(LpError::Invalid("non-finite coefficient".into()));
        }
        self.columns.push(Column {
            cost,
            lower,
            upper,
            entries,
        });
        Ok(self.columns.len() - 1)
    }

    /// Appends a row; `entries` are `(column, coefficient)` pairs on
    /// existing columns.
    pub fn add_row(&mut self, sense: RowSense, rhs: f64, entries: &[(usize, f64)]) -> Result<usize, LpError> {
        if !rhs.is_finite() {
            return Err(LpError::Invalid(format!("row rhs {rhs} is not finite")));
        }
        if let Some(&(j, _)) = entries.iter().find(|e| e.0 >= self.columns.len()) {
            return Err(LpError::Dimension(format!(
                "row entry on column {j}, model has {} columns",
                self.columns.len()
            )));
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(LpError::Invalid("non-finite coefficient".into()));
        }
        let i = self.rows.len();
        self.rows.push(Row { sense, rhs });
        for &(j, v) in entries {
            if v != 0.0 {
                self.columns[j].entries.push((i, v));
            }
        }
        Ok(i)
    }

    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.columns[j].cost = cost;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum()
    }

    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.rows.len()];
        for (col, &v) in self.columns.iter().zip(x) {
            if v != 0.0 {
                for &(r, a) in &col.entries {
                    act[r] += a * v;
                }
            }
        }
        act
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let act = self.row_activity(x);
        let rows = self.rows.iter().zip(&act).map(|(row, &a)| {
            let (lo, hi) = row.logical_bounds();
            (lo - a).max(a - hi).max(0.0)
        });
        let cols = self
            .columns
            .iter()
            .zip(x)
            .map(|(c, &v)| (c.lower - v).max(v - c.upper).max(0.0));
        rows.chain(cols).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic with no finite bound, held at zero.
    Free,
}

/// A structural column or a row logical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Var {
    Col(usize),
    Row(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    cols: Vec<VarStatus>,
    rows: Vec<VarStatus>,
}

fn resting_status(lower: f64, upper: f64) -> VarStatus {
    if lower.is_finite() {
        VarStatus::AtLower
    } else if upper.is_finite() {
        VarStatus::AtUpper
    } else {
        VarStatus::Free
    }
}

impl Basis {
    /// All row logicals basic, structurals at their resting bound.
    pub fn slack(m: &LpModel) -> Self {
        Basis {
            cols: m.columns.iter().map(|c| resting_status(c.lower, c.upper)).collect(),
            rows: vec![VarStatus::Basic; m.rows.len()],
        }
    }

    pub fn col_status(&self, j: usize) -> VarStatus {
        self.cols[j]
    }

    pub fn row_status(&self, i: usize) -> VarStatus {
        self.rows[i]
    }

    pub fn set_col_status(&mut self, j: usize, s: VarStatus) {
        self.cols[j] = s;
    }

    pub fn set_row_status(&mut self, i: usize, s: VarStatus) {
        self.rows[i] = s;
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Basic variables, structurals first, each group in index order.
    pub fn basic_vars(&self) -> Vec<Var> {
        let cols = (0..self.cols.len())
            .filter(|&j| self.cols[j] == VarStatus::Basic)
            .map(Var::Col);
        let rows = (0..self.rows.len())
            .filter(|&i| self.rows[i] == VarStatus::Basic)
            .map(Var::Row);
        cols.chain(rows).collect()
    }

    /// Pads for columns/rows appended since this basis was produced and
    /// repairs statuses that no longer match the bounds. Returns `None` if
    /// the basic count does not match the row count.
    fn fitted(&self, m: &LpModel) -> Option<Basis> {
        if self.cols.len() > m.num_cols() || self.rows.len() > m.num_rows() {
            return None;
        }
        let mut cols = self.cols.clone();
        for c in &m.columns[cols.len()..] {
            cols.push(resting_status(c.lower, c.upper));
        }
        for (s, c) in cols.iter_mut().zip(&m.columns) {
            *s = repair(*s, c.lower, c.upper);
        }
        let mut rows = self.rows.clone();
        rows.resize(m.num_rows(), VarStatus::Basic);
        for (s, r) in rows.iter_mut().zip(&m.rows) {
            let (lo, hi) = r.logical_bounds();
            *s = repair(*s, lo, hi);
        }
        let basics = cols.iter().chain(&rows).filter(|&&s| s == VarStatus::Basic).count();
        (basics == m.num_rows()).then_some(Basis { cols, rows })
    }
}

fn repair(s: VarStatus, lower: f64, upper: f64) -> VarStatus {
    match s {
        VarStatus::Basic => VarStatus::Basic,
        VarStatus::AtLower if lower.is_finite() => VarStatus::AtLower,
        VarStatus::AtUpper if upper.is_finite() => VarStatus::AtUpper,
        _ => resting_status(lower, upper),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// One value per structural column.
    pub primal: Vec<f64>,
    /// One dual per row (`>= 0` on binding `Ge` rows at optimality).
    pub duals: Vec<f64>,
    /// `c_j - q^T A_j` per structural column.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub pivot_count: usize,
}

impl LpSolution {
    /// `q^T b` plus the bound contributions of nonbasic structurals; equals
    /// the objective at an optimal basis.
    pub fn dual_objective(&self, m: &LpModel) -> f64 {
        let rows: f64 = self.duals.iter().zip(&m.rows).map(|(q, r)| q * r.rhs).sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .zip(&self.primal)
            .map(|(d, x)| d * x)
            .sum();
        rows + bounds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Defaults to `max(10_000, 20 * (rows + cols))` when `None`.
    pub max_iter: Option<usize>,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before the bounds are perturbed (first
    /// time) or Bland's rule takes over (afterwards).
    pub bland_after: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            max_iter: None,
            refactor_every: 100,
            bland_after: 50,
        }
    }
}

/// Solves `m`, warm-starting from `warm` when given.
pub fn solve(m: &LpModel, warm: Option<&Basis>) -> Result<(LpSolution, Basis), LpError> {
    solve_with(m, warm, &SolverOptions::default())
}

pub fn solve_with(
    m: &LpModel,
    warm: Option<&Basis>,
    opts: &SolverOptions,
) -> Result<(LpSolution, Basis), LpError> {
    let start = warm.and_then(|b| {
        let fitted = b.fitted(m);
        if fitted.is_none() {
            log::debug!("warm basis does not fit the model; using slack basis");
        }
        fitted
    });
    let basis = start.unwrap_or_else(|| Basis::slack(m));
    simplex::Simplex::new(m, opts, &basis)?.run()
}

/// Appends columns; they enter nonbasic at their resting bound so the
/// returned basis stays valid (and primal feasible if it was).
pub fn add_columns(m: &mut LpModel, cols: Vec<Column>, basis: &Basis) -> Result<Basis, LpError> {
    let mut b = basis.clone();
    for c in cols {
        let status = resting_status(c.lower, c.upper);
        m.add_column(c.cost, c.lower, c.upper, c.entries)?;
        b.cols.push(status);
    }
    Ok(b)
}

/// Appends rows given as `(sense, rhs, (column, coef) entries)`; each new
/// logical enters the basis.
pub fn add_rows(
    m: &mut LpModel,
    rows: Vec<(RowSense, f64, Vec<(usize, f64)>)>,
    basis: &Basis,
) -> Result<Basis, LpError> {
    let mut b = basis.clone();
    b.cols.resize(m.num_cols(), VarStatus::AtLower);
    for (sense, rhs, entries) in rows {
        m.add_row(sense, rhs, &entries)?;
        b.rows.push(VarStatus::Basic);
    }
    Ok(b)
}

/// `c_j - q^T A_j` for structural `j` under `basis`.
pub fn reduced_cost(m: &LpModel, basis: &Basis, j: usize) -> Result<f64, LpError> {
    let fitted = basis
        .fitted(m)
        .ok_or_else(|| LpError::Dimension("basis does not fit model".into()))?;
    let duals = simplex::basis_duals(m, &fitted)?;
    let col = &m.columns[j];
    Ok(col.cost - col.entries.iter().map(|&(r, a)| duals[r] * a).sum::<f64>())
}

/// Row duals `q = c_B^T B^{-1}` of a basis.
pub fn basis_duals(m: &LpModel, basis: &Basis) -> Result<Vec<f64>, LpError> {
    let fitted = basis
        .fitted(m)
        .ok_or_else(|| LpError::Dimension("basis does not fit model".into()))?;
    simplex::basis_duals(m, &fitted)
}
