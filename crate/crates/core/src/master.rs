//! Restricted SVM linear program shared by the cutting-plane drivers.
//!
//! The model always holds the intercept, one hinge row and slack per active
//! sample, and a `beta+`/`beta-` column pair per active feature. Drivers add
//! their own extra columns (group bounds, the Slope epigraph variable) and
//! extra rows (group links, Slope cuts) through the raw helpers. The basis is
//! carried between solves so every re-solve is warm-started.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lp::{self, Basis, Column, LpModel, LpSolution, LpStatus, RowSense, VarStatus, INF};

const NONE: usize = usize::MAX;
const CHOP: f64 = 1e-10;

pub(crate) struct Master<'a> {
    data: &'a Dataset,
    model: LpModel,
    basis: Basis,
    samples: Vec<usize>,
    hinge_rows: Vec<usize>,
    xi_cols: Vec<usize>,
    slot_of_sample: Vec<usize>,
    beta0_col: usize,
    features: Vec<usize>,
    cols_of_feature: Vec<Option<(usize, usize)>>,
    beta: Vec<f64>,
    beta0: f64,
    pivots: usize,
    last: Option<LpSolution>,
}

impl<'a> Master<'a> {
    pub(crate) fn new(data: &'a Dataset, samples: &[usize]) -> Result<Self> {
        let mut model = LpModel::new();
        let beta0_col = model.add_column(0.0, -INF, INF, vec![])?;
        let basis = Basis::slack(&model);
        let mut m = Master {
            data,
            model,
            basis,
            samples: Vec::new(),
            hinge_rows: Vec::new(),
            xi_cols: Vec::new(),
            slot_of_sample: vec![NONE; data.n()],
            beta0_col,
            features: Vec::new(),
            cols_of_feature: vec![None; data.p()],
            beta: vec![0.0; data.p()],
            beta0: 0.0,
            pivots: 0,
            last: None,
        };
        m.add_samples(samples)?;
        Ok(m)
    }

    pub(crate) fn data(&self) -> &'a Dataset {
        self.data
    }

    pub(crate) fn has_sample(&self, i: usize) -> bool {
        self.slot_of_sample[i] != NONE
    }

    pub(crate) fn has_feature(&self, j: usize) -> bool {
        self.cols_of_feature[j].is_some()
    }

    pub(crate) fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub(crate) fn num_features(&self) -> usize {
        self.features.len()
    }

    /// Active samples in insertion order.
    pub(crate) fn samples(&self) -> &[usize] {
        &self.samples
    }

    /// Active features in insertion order.
    pub(crate) fn features(&self) -> &[usize] {
        &self.features
    }

    pub(crate) fn feature_columns(&self, j: usize) -> Option<(usize, usize)> {
        self.cols_of_feature[j]
    }

    pub(crate) fn pivots(&self) -> usize {
        self.pivots
    }

    /// Full-length coefficients of the last solve (zero off the working set).
    pub(crate) fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub(crate) fn beta0(&self) -> f64 {
        self.beta0
    }

    pub(crate) fn last(&self) -> Option<&LpSolution> {
        self.last.as_ref()
    }

    /// Adds hinge rows for samples not yet active. A new slack enters the
    /// basis when the current solution violates the sample's margin, so the
    /// warm start stays primal feasible; otherwise the row logical does.
    pub(crate) fn add_samples(&mut self, samples: &[usize]) -> Result<()> {
        let x = self.data.features();
        for &i in samples {
            if i >= self.data.n() {
                return Err(Error::Dimension(format!("sample {i} out of range")));
            }
            if self.has_sample(i) {
                continue;
            }
            let y = self.data.y(i);
            let xi = self.model.add_column(1.0, 0.0, INF, vec![])?;
            let mut entries = vec![(xi, 1.0), (self.beta0_col, y)];
            let mut score = self.beta0;
            x.for_each_in_row(i, |j, v| {
                if let Some((plus, minus)) = self.cols_of_feature[j] {
                    entries.push((plus, y * v));
                    entries.push((minus, -y * v));
                    score += v * self.beta[j];
                }
            });
            self.basis = lp::add_rows(&mut self.model, vec![(RowSense::Ge, 1.0, entries)], &self.basis)?;
            let row = self.model.num_rows() - 1;
            if 1.0 - y * score >= 0.0 {
                self.basis.set_col_status(xi, VarStatus::Basic);
                self.basis.set_row_status(row, VarStatus::AtLower);
            }
            self.slot_of_sample[i] = self.samples.len();
            self.samples.push(i);
            self.hinge_rows.push(row);
            self.xi_cols.push(xi);
        }
        Ok(())
    }

    /// Adds the `beta+`/`beta-` pair for each new feature with the given
    /// cost. `extra(j)` lists entries on driver-owned rows, shared by both
    /// columns of the pair.
    pub(crate) fn add_features(
        &mut self,
        features: &[usize],
        cost: f64,
        mut extra: impl FnMut(usize) -> Vec<(usize, f64)>,
    ) -> Result<()> {
        let x = self.data.features();
        for &j in features {
            if j >= self.data.p() {
                return Err(Error::Dimension(format!("feature {j} out of range")));
            }
            if self.has_feature(j) {
                continue;
            }
            let mut hinge = Vec::new();
            x.for_each_in_col(j, |i, v| {
                let slot = self.slot_of_sample[i];
                if slot != NONE {
                    hinge.push((self.hinge_rows[slot], self.data.y(i) * v));
                }
            });
            let shared = extra(j);
            let mut plus = hinge.clone();
            plus.extend_from_slice(&shared);
            let mut minus: Vec<(usize, f64)> = hinge.iter().map(|&(r, v)| (r, -v)).collect();
            minus.extend_from_slice(&shared);
            let first = self.model.num_cols();
            let cols = vec![
                Column {
                    cost,
                    lower: 0.0,
                    upper: INF,
                    entries: plus,
                },
                Column {
                    cost,
                    lower: 0.0,
                    upper: INF,
                    entries: minus,
                },
            ];
            self.basis = lp::add_columns(&mut self.model, cols, &self.basis)?;
            self.cols_of_feature[j] = Some((first, first + 1));
            self.features.push(j);
        }
        Ok(())
    }

    pub(crate) fn add_column(&mut self, cost: f64, lower: f64, upper: f64, entries: Vec<(usize, f64)>) -> Result<usize> {
        let col = Column {
            cost,
            lower,
            upper,
            entries,
        };
        self.basis = lp::add_columns(&mut self.model, vec![col], &self.basis)?;
        Ok(self.model.num_cols() - 1)
    }

    /// Adds a row whose logical enters the basis.
    pub(crate) fn add_row(&mut self, sense: RowSense, rhs: f64, entries: Vec<(usize, f64)>) -> Result<usize> {
        self.basis = lp::add_rows(&mut self.model, vec![(sense, rhs, entries)], &self.basis)?;
        Ok(self.model.num_rows() - 1)
    }

    pub(crate) fn set_cost(&mut self, col: usize, cost: f64) {
        self.model.set_cost(col, cost);
    }

    pub(crate) fn set_feature_costs(&mut self, cost: f64) {
        for &j in &self.features {
            let (plus, minus) = self.cols_of_feature[j].expect("active feature");
            self.model.set_cost(plus, cost);
            self.model.set_cost(minus, cost);
        }
    }

    pub(crate) fn solve(&mut self) -> Result<&LpSolution> {
        let (sol, basis) = lp::solve(&self.model, Some(&self.basis))?;
        self.pivots += sol.pivot_count;
        if sol.status != LpStatus::Optimal {
            return Err(Error::NotOptimal(sol.status));
        }
        self.basis = basis;
        self.beta.iter_mut().for_each(|b| *b = 0.0);
        for &j in &self.features {
            let (plus, minus) = self.cols_of_feature[j].expect("active feature");
            let b = sol.primal[plus] - sol.primal[minus];
            self.beta[j] = if b.abs() < CHOP { 0.0 } else { b };
        }
        self.beta0 = sol.primal[self.beta0_col];
        self.last = Some(sol);
        Ok(self.last.as_ref().expect("just stored"))
    }

    /// Hinge-row duals as a length-`n` vector, zero for inactive samples.
    pub(crate) fn duals_full(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.n()];
        if let Some(sol) = &self.last {
            for (k, &i) in self.samples.iter().enumerate() {
                out[i] = sol.duals[self.hinge_rows[k]];
            }
        }
        out
    }

    /// `(sample, slack, dual)` for every active sample, sorted by sample.
    pub(crate) fn active_rows(&self) -> Vec<(usize, f64, f64)> {
        let mut out: Vec<(usize, f64, f64)> = match &self.last {
            Some(sol) => self
                .samples
                .iter()
                .enumerate()
                .map(|(k, &i)| (i, sol.primal[self.xi_cols[k]], sol.duals[self.hinge_rows[k]]))
                .collect(),
            None => Vec::new(),
        };
        out.sort_by_key(|r| r.0);
        out
    }
}
