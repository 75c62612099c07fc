//! Problem instances: feature matrices, labels, group layouts and Slope
//! weight sequences, plus readers/writers and synthetic generators.
//!
//! The svmlight reader accepts the usual `label idx:val idx:val ...` lines
//! with 1-based, strictly increasing feature indices. Labels must be binary;
//! `{-1, +1}` is taken as-is and `{0, 1}` is mapped `0 -> -1`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major dense or compressed-sparse-row feature matrix.
///
/// Sparse matrices also keep a column-major mirror so that column scans
/// (pricing, LP column construction) do not need a transpose per call.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Dense {
        n: usize,
        p: usize,
        data: Vec<f64>,
    },
    Sparse(SparseMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    p: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    row_vals: Vec<f64>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists. Column indices must be
    /// strictly increasing within a row and `< p`.
    pub fn from_rows(p: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut row_vals = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.iter().enumerate() {
            let mut last: Option<usize> = None;
            for &(j, v) in row {
                if j >= p {
                    return Err(Error::Dimension(format!(
                        "row {i}: column {j} out of range for p={p}"
                    )));
                }
                if last.is_some_and(|l| l >= j) {
                    return Err(Error::Dimension(format!(
                        "row {i}: column indices not strictly increasing"
                    )));
                }
                last = Some(j);
                if v != 0.0 {
                    col_idx.push(j);
                    row_vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut m = SparseMatrix {
            n,
            p,
            row_ptr,
            col_idx,
            row_vals,
            col_ptr: Vec::new(),
            row_idx: Vec::new(),
            col_vals: Vec::new(),
        };
        m.rebuild_columns();
        Ok(m)
    }

    fn rebuild_columns(&mut self) {
        let mut counts = vec![0usize; self.p + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.p {
            counts[j + 1] += counts[j];
        }
        let nnz = self.col_idx.len();
        let mut next = counts.clone();
        let mut row_idx = vec![0usize; nnz];
        let mut col_vals = vec![0.0; nnz];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                row_idx[next[j]] = i;
                col_vals[next[j]] = self.row_vals[k];
                next[j] += 1;
            }
        }
        self.col_ptr = counts;
        self.row_idx = row_idx;
        self.col_vals = col_vals;
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
}

impl FeatureMatrix {
    pub fn dense(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::Dimension(format!(
                "dense data has {} entries, expected {}",
                data.len(),
                n * p
            )));
        }
        Ok(FeatureMatrix::Dense { n, p, data })
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("ragged dense rows".into()));
        }
        Self::dense(n, p, rows.concat())
    }

    pub fn n(&self) -> usize {
        match self {
            FeatureMatrix::Dense { n, .. } => *n,
            FeatureMatrix::Sparse(s) => s.n,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            FeatureMatrix::Dense { p, .. } => *p,
            FeatureMatrix::Sparse(s) => s.p,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, FeatureMatrix::Sparse(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            FeatureMatrix::Dense { p, data, .. } => data[i * p + j],
            FeatureMatrix::Sparse(s) => {
                let range = s.row_ptr[i]..s.row_ptr[i + 1];
                match s.col_idx[range.clone()].binary_search(&j) {
                    Ok(k) => s.row_vals[range.start + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Calls `f(j, x_ij)` for every stored entry of row `i`.
    #[inline]
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            FeatureMatrix::Dense { p, data, .. } => {
                for (j, &v) in data[i * p..(i + 1) * p].iter().enumerate() {
                    f(j, v);
                }
            }
            FeatureMatrix::Sparse(s) => {
                for k in s.row_ptr[i]..s.row_ptr[i + 1] {
                    f(s.col_idx[k], s.row_vals[k]);
                }
            }
        }
    }

    /// Calls `f(i, x_ij)` for every stored entry of column `j`.
    #[inline]
    pub fn for_each_in_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            FeatureMatrix::Dense { n, p, data } => {
                for i in 0..*n {
                    f(i, data[i * p + j]);
                }
            }
            FeatureMatrix::Sparse(s) => {
                for k in s.col_ptr[j]..s.col_ptr[j + 1] {
                    f(s.row_idx[k], s.col_vals[k]);
                }
            }
        }
    }

    #[inline]
    pub fn row_dot(&self, i: usize, beta: &[f64]) -> f64 {
        match self {
            FeatureMatrix::Dense { p, data, .. } => data[i * p..(i + 1) * p]
                .iter()
                .zip(beta)
                .map(|(a, b)| a * b)
                .sum(),
            FeatureMatrix::Sparse(s) => (s.row_ptr[i]..s.row_ptr[i + 1])
                .map(|k| s.row_vals[k] * beta[s.col_idx[k]])
                .sum(),
        }
    }

    /// `X beta`.
    pub fn mul(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.row_dot(i, beta)).collect()
    }

    /// `X^T w`, skipping rows with zero weight.
    pub fn transpose_mul(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                self.for_each_in_row(i, |j, v| out[j] += wi * v);
            }
        }
        out
    }

    pub fn col_l1_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        for i in 0..self.n() {
            self.for_each_in_row(i, |j, v| out[j] += v.abs());
        }
        out
    }

    pub fn col_l2_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        for i in 0..self.n() {
            self.for_each_in_row(i, |j, v| out[j] += v * v);
        }
        out.iter_mut().for_each(|s| *s = s.sqrt());
        out
    }

    fn scale_columns(&mut self, factors: &[f64]) {
        match self {
            FeatureMatrix::Dense { p, data, .. } => {
                for row in data.chunks_mut(*p) {
                    for (v, f) in row.iter_mut().zip(factors) {
                        *v *= f;
                    }
                }
            }
            FeatureMatrix::Sparse(s) => {
                for (v, &j) in s.row_vals.iter_mut().zip(&s.col_idx) {
                    *v *= factors[j];
                }
                s.rebuild_columns();
            }
        }
    }

    /// Submatrix on the given rows and columns (in the given order).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> FeatureMatrix {
        match self {
            FeatureMatrix::Dense { p, data, .. } => {
                let mut out = Vec::with_capacity(rows.len() * cols.len());
                for &i in rows {
                    let row = &data[i * p..(i + 1) * p];
                    out.extend(cols.iter().map(|&j| row[j]));
                }
                FeatureMatrix::Dense {
                    n: rows.len(),
                    p: cols.len(),
                    data: out,
                }
            }
            FeatureMatrix::Sparse(s) => {
                let mut remap = vec![usize::MAX; s.p];
                for (k, &j) in cols.iter().enumerate() {
                    remap[j] = k;
                }
                let sub_rows: Vec<Vec<(usize, f64)>> = rows
                    .iter()
                    .map(|&i| {
                        let mut r: Vec<(usize, f64)> = (s.row_ptr[i]..s.row_ptr[i + 1])
                            .filter(|&k| remap[s.col_idx[k]] != usize::MAX)
                            .map(|k| (remap[s.col_idx[k]], s.row_vals[k]))
                            .collect();
                        r.sort_by_key(|e| e.0);
                        r
                    })
                    .collect();
                FeatureMatrix::Sparse(
                    SparseMatrix::from_rows(cols.len(), &sub_rows)
                        .expect("selected columns are in range"),
                )
            }
        }
    }
}

/// Features plus binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: FeatureMatrix,
    labels: Vec<f64>,
    column_norms: Option<Vec<f64>>,
    zero_columns: Vec<usize>,
}

impl Dataset {
    pub fn new(features: FeatureMatrix, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != features.n() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                features.n()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::domain(format!("label {bad} is not -1 or +1")));
        }
        Ok(Dataset {
            features,
            labels,
            column_norms: None,
            zero_columns: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn p(&self) -> usize {
        self.features.p()
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn column_norms(&self) -> Option<&[f64]> {
        self.column_norms.as_deref()
    }

    /// Columns that were all-zero at standardization time.
    pub fn zero_columns(&self) -> &[usize] {
        &self.zero_columns
    }

    /// `(N+, N-)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0.0).count();
        (pos, self.labels.len() - pos)
    }

    pub fn check_both_classes(&self) -> Result<()> {
        match self.class_counts() {
            (0, _) | (_, 0) => Err(Error::domain("dataset contains a single class")),
            _ => Ok(()),
        }
    }

    /// `y_i (x_i^T beta + beta0)`.
    #[inline]
    pub fn margin(&self, i: usize, beta: &[f64], beta0: f64) -> f64 {
        self.labels[i] * (self.features.row_dot(i, beta) + beta0)
    }

    /// `sum_i (1 - y_i (x_i^T beta + beta0))_+` over all samples.
    pub fn hinge_loss(&self, beta: &[f64], beta0: f64) -> f64 {
        (0..self.n())
            .map(|i| (1.0 - self.margin(i, beta, beta0)).max(0.0))
            .sum()
    }

    /// `X^T (y * w)`: the per-column correlation with label-weighted `w`.
    pub fn signed_correlations(&self, w: &[f64]) -> Vec<f64> {
        let yw: Vec<f64> = w.iter().zip(&self.labels).map(|(a, y)| a * y).collect();
        self.features.transpose_mul(&yw)
    }

    /// Scales every nonzero column to unit L2-norm. Zero columns are left
    /// alone and reported by [`Dataset::zero_columns`].
    pub fn standardize_columns(mut self) -> Dataset {
        let norms = self.features.col_l2_norms();
        let mut zero = Vec::new();
        let factors: Vec<f64> = norms
            .iter()
            .enumerate()
            .map(|(j, &s)| {
                if s > 0.0 {
                    1.0 / s
                } else {
                    zero.push(j);
                    1.0
                }
            })
            .collect();
        self.features.scale_columns(&factors);
        let scale: Vec<f64> = norms.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect();
        self.column_norms = Some(match self.column_norms.take() {
            Some(prev) => prev.iter().zip(&scale).map(|(a, b)| a * b).collect(),
            None => scale,
        });
        if !zero.is_empty() {
            log::warn!("{} all-zero columns left unscaled", zero.len());
        }
        self.zero_columns = zero;
        self
    }

    /// Sub-dataset on the given rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(rows, cols),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            column_norms: None,
            zero_columns: Vec::new(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let cols: Vec<usize> = (0..self.p()).collect();
        self.select(rows, &cols)
    }
}

/// Disjoint partition of the feature indices `0..p` into groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, p: usize) -> Result<Self> {
        let mut membership = vec![usize::MAX; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::domain(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= p {
                    return Err(Error::domain(format!("group {g}: feature {j} >= p={p}")));
                }
                if membership[j] != usize::MAX {
                    return Err(Error::domain(format!("feature {j} appears in two groups")));
                }
                membership[j] = g;
            }
        }
        if let Some(j) = membership.iter().position(|&g| g == usize::MAX) {
            return Err(Error::domain(format!("feature {j} belongs to no group")));
        }
        Ok(GroupStructure { groups, membership })
    }

    /// `count` consecutive groups of `size` features each.
    pub fn contiguous(count: usize, size: usize) -> Self {
        let groups = (0..count).map(|g| (g * size..(g + 1) * size).collect()).collect();
        Self::new(groups, count * size).expect("contiguous layout is a partition")
    }

    pub fn singletons(p: usize) -> Self {
        Self::contiguous(p, 1)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn p(&self) -> usize {
        self.membership.len()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, j: usize) -> usize {
        self.membership[j]
    }

    /// One group per line, whitespace-separated 0-based feature indices.
    pub fn read(reader: impl Read, p: usize) -> Result<Self> {
        let mut groups = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let members = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: format!("bad feature index {tok:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(members);
        }
        Self::new(groups, p)
    }

    pub fn load(path: impl AsRef<Path>, p: usize) -> Result<Self> {
        Self::read(File::open(path)?, p)
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        for members in &self.groups {
            let line: Vec<String> = members.iter().map(usize::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Nonincreasing, nonnegative Slope weights `lambda_1 >= ... >= lambda_p >= 0`
/// with cached prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeWeights {
    lambdas: Vec<f64>,
    prefix: Vec<f64>,
}

impl SlopeWeights {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some(bad) = lambdas.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::domain(format!("slope weight {bad} is not a nonnegative number")));
        }
        if lambdas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::domain("slope weights must be nonincreasing"));
        }
        let mut prefix = Vec::with_capacity(lambdas.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &l in &lambdas {
            acc += l;
            prefix.push(acc);
        }
        Ok(SlopeWeights { lambdas, prefix })
    }

    pub fn constant(p: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; p])
    }

    /// `2 * base` on the first `k0` positions, `base` afterwards.
    pub fn two_level(p: usize, k0: usize, base: f64) -> Result<Self> {
        Self::new((0..p).map(|j| if j < k0 { 2.0 * base } else { base }).collect())
    }

    /// `lambda_j = sqrt(ln(2p / j)) * base` for `j = 1..p`.
    pub fn bh_log(p: usize, base: f64) -> Result<Self> {
        let two_p = 2.0 * p as f64;
        Self::new((1..=p).map(|j| (two_p / j as f64).ln().sqrt() * base).collect())
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lambdas
    }

    /// 0-based access: `get(0)` is the largest weight.
    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.lambdas[j]
    }

    /// Weight at 0-based position `j`, or zero past the end.
    #[inline]
    pub fn get_or_zero(&self, j: usize) -> f64 {
        self.lambdas.get(j).copied().unwrap_or(0.0)
    }

    /// Sum of the `k` largest weights.
    #[inline]
    pub fn prefix_sum(&self, k: usize) -> f64 {
        self.prefix[k.min(self.lambdas.len())]
    }

    pub fn min(&self) -> f64 {
        self.lambdas.last().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.lambdas.iter().map(|l| l * factor).collect())
    }

    /// One weight per line, validated nonincreasing.
    pub fn read(reader: impl Read) -> Result<Self> {
        let mut out = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            out.push(line.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad weight {line:?}: {e}"),
            })?);
        }
        Self::new(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(File::open(path)?)
    }
}

/// Parameters of the equicorrelated two-class Gaussian generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    /// Number of signal features (or signal groups for the group variant).
    pub k0: usize,
    pub rho: f64,
    pub seed: u64,
    /// `(G, p_G)` for the grouped generator.
    pub groups: Option<(usize, usize)>,
    pub standardize: bool,
}

impl SynthConfig {
    pub fn new(n: usize, p: usize, k0: usize, rho: f64, seed: u64) -> Self {
        SynthConfig {
            n,
            p,
            k0,
            rho,
            seed,
            groups: None,
            standardize: true,
        }
    }

    pub fn grouped(n: usize, count: usize, size: usize, k0: usize, rho: f64, seed: u64) -> Self {
        SynthConfig {
            groups: Some((count, size)),
            ..Self::new(n, count * size, k0, rho, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::domain(format!("rho={} must lie in [0, 1)", self.rho)));
        }
        if self.n == 0 {
            return Err(Error::domain("n must be positive"));
        }
        Ok(())
    }
}

/// Draws `n` samples where features inside each block share one common
/// factor (pairwise correlation `rho`) and blocks are independent.
/// Samples `0..ceil(n/2)` are class +1 with mean `means`, the rest class -1
/// with mean `-means`.
fn sample_blocks(n: usize, blocks: &[(usize, usize)], means: &[f64], rho: f64, seed: u64) -> Dataset {
    let p = means.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    let n_pos = n.div_ceil(2);
    let mut data = vec![0.0; n * p];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i < n_pos { 1.0 } else { -1.0 };
        labels.push(y);
        let row = &mut data[i * p..(i + 1) * p];
        for &(start, len) in blocks {
            let common: f64 = StandardNormal.sample(&mut rng);
            for j in start..start + len {
                let e: f64 = StandardNormal.sample(&mut rng);
                row[j] = y * means[j] + shared * common + own * e;
            }
        }
    }
    let features = FeatureMatrix::Dense { n, p, data };
    Dataset::new(features, labels).expect("generated labels are binary")
}

/// Equicorrelated Gaussian design with signal on the first `k0` features.
pub fn synth_gaussian(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    if cfg.k0 > cfg.p {
        return Err(Error::domain(format!("k0={} exceeds p={}", cfg.k0, cfg.p)));
    }
    let means: Vec<f64> = (0..cfg.p).map(|j| if j < cfg.k0 { 1.0 } else { 0.0 }).collect();
    let d = sample_blocks(cfg.n, &[(0, cfg.p)], &means, cfg.rho, cfg.seed);
    Ok(if cfg.standardize { d.standardize_columns() } else { d })
}

/// Block-equicorrelated design: `G` groups of `p_G` features, signal on all
/// features of the first `k0` groups.
pub fn synth_group_gaussian(cfg: &SynthConfig) -> Result<(Dataset, GroupStructure)> {
    cfg.validate()?;
    let (count, size) = cfg
        .groups
        .ok_or_else(|| Error::domain("group layout (G, p_G) is required"))?;
    if count * size != cfg.p {
        return Err(Error::domain(format!(
            "G*p_G = {}*{} does not equal p={}",
            count, size, cfg.p
        )));
    }
    if cfg.k0 > count {
        return Err(Error::domain(format!("k0={} exceeds G={}", cfg.k0, count)));
    }
    let means: Vec<f64> = (0..cfg.p)
        .map(|j| if j / size < cfg.k0 { 1.0 } else { 0.0 })
        .collect();
    let blocks: Vec<(usize, usize)> = (0..count).map(|g| (g * size, size)).collect();
    let d = sample_blocks(cfg.n, &blocks, &means, cfg.rho, cfg.seed);
    let d = if cfg.standardize { d.standardize_columns() } else { d };
    Ok((d, GroupStructure::contiguous(count, size)))
}

/// Smallest lambda at which beta = 0 solves the L1 problem:
/// the largest column L1-norm.
pub fn lambda_max_l1(d: &Dataset) -> f64 {
    d.features().col_l1_norms().into_iter().fold(0.0, f64::max)
}

/// Group analogue: the largest within-group sum of column L1-norms.
pub fn lambda_max_group(d: &Dataset, groups: &GroupStructure) -> f64 {
    let norms = d.features().col_l1_norms();
    groups
        .groups()
        .iter()
        .map(|g| g.iter().map(|&j| norms[j]).sum::<f64>())
        .fold(0.0, f64::max)
}

fn map_labels(raw: &[f64]) -> Result<Vec<f64>> {
    let is = |v: f64| raw.iter().all(|&y| y == v || y == 1.0);
    if is(-1.0) {
        Ok(raw.to_vec())
    } else if is(0.0) {
        Ok(raw.iter().map(|&y| if y == 0.0 { -1.0 } else { 1.0 }).collect())
    } else {
        let bad = raw.iter().find(|&&y| y != 1.0 && y != 0.0 && y != -1.0);
        Err(Error::domain(match bad {
            Some(b) => format!("non-binary label {b}"),
            None => "labels mix 0 and -1".to_string(),
        }))
    }
}

/// Parses svmlight text. `dim` overrides the inferred feature count.
pub fn read_svmlight(reader: impl Read, dim: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label {label_tok:?}"),
        })?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            if tok.starts_with("qid:") {
                continue;
            }
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad index {idx:?}"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad value {val:?}"),
            })?;
            if idx == 0 || idx <= last {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("index {idx} is not 1-based and strictly increasing"),
                });
            }
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        rows.push(row);
        raw_labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let p = match dim {
        Some(d) if d < max_index => {
            return Err(Error::Dimension(format!(
                "feature index {max_index} exceeds dimension override {d}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    let labels = map_labels(&raw_labels)?;
    Dataset::new(FeatureMatrix::Sparse(SparseMatrix::from_rows(p, &rows)?), labels)
}

pub fn load_svmlight(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    read_svmlight(File::open(path)?, dim)
}

/// Writes `+1`/`-1` labels and the nonzero entries with 1-based indices.
/// Values use the shortest representation that parses back to the same f64.
pub fn write_svmlight(d: &Dataset, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    for i in 0..d.n() {
        write!(w, "{}", if d.y(i) > 0.0 { "+1" } else { "-1" })?;
        let mut err = Ok(());
        d.features().for_each_in_row(i, |j, v| {
            if v != 0.0 && err.is_ok() {
                err = write!(w, " {}:{}", j + 1, v);
            }
        });
        err?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_svmlight(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_svmlight(d, File::create(path)?)
}

/// Comma-separated file with a header row; the last column is the label.
pub fn read_csv(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "need at least one feature and a label".into(),
            });
        }
        let vals = rec
            .iter()
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number {t:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let (label, feats) = vals.split_last().expect("len checked");
        raw_labels.push(*label);
        rows.push(feats.to_vec());
    }
    if rows.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let labels = map_labels(&raw_labels)?;
    Dataset::new(FeatureMatrix::from_dense_rows(&rows)?, labels)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    read_csv(File::open(path)?)
}
