//! Basis factorization.
//!
//! Basic columns with a single nonzero (row logicals, hinge slacks) are
//! peeled off first: after permuting, the basis is block upper-triangular
//! with a diagonal block for those singletons and a dense "kernel" for the
//! rest, so only the kernel needs an LU. Pivots between refactorizations are
//! kept as a product-form eta file.

use super::LpError;

const NONE: usize = usize::MAX;
const DROP_TOL: f64 = 1e-13;

/// Dense LU with partial pivoting: `P M = L U`, row-major, unit lower `L`.
#[derive(Debug, Clone)]
pub(crate) struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    pub(crate) fn factorize(n: usize, mut a: Vec<f64>) -> Result<Self, LpError> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv_row, piv_abs) = (k..n)
                .map(|i| (i, a[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs <= 1e-11 * scale {
                return Err(LpError::Factorization(format!(
                    "kernel of size {n} is singular at column {k} (pivot {piv_abs:.3e})"
                )));
            }
            if piv_row != k {
                for j in 0..n {
                    a.swap(k * n + j, piv_row * n + j);
                }
                perm.swap(k, piv_row);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f == 0.0 {
                    continue;
                }
                a[i * n + k] = f;
                let (upper, lower) = a.split_at_mut(i * n);
                let src = &upper[k * n + k + 1..k * n + n];
                let dst = &mut lower[k + 1..n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= f * s;
                }
            }
        }
        Ok(DenseLu { n, lu: a, perm })
    }

    /// Solves `M x = b` in place.
    pub(crate) fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    /// Solves `M^T y = c` in place.
    pub(crate) fn solve_transpose(&self, c: &mut [f64]) {
        let n = self.n;
        let mut z = c.to_vec();
        // U^T z = c
        for i in 0..n {
            z[i] /= self.lu[i * n + i];
            let zi = z[i];
            if zi != 0.0 {
                for j in i + 1..n {
                    z[j] -= self.lu[i * n + j] * zi;
                }
            }
        }
        // L^T w = z
        for i in (0..n).rev() {
            let wi = z[i];
            if wi != 0.0 {
                for j in 0..i {
                    z[j] -= self.lu[i * n + j] * wi;
                }
            }
        }
        for (k, &orig) in self.perm.iter().enumerate() {
            c[orig] = z[k];
        }
    }
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    m: usize,
    single_pos: Vec<usize>,
    single_row: Vec<usize>,
    single_val: Vec<f64>,
    row_is_single: Vec<bool>,
    kernel_pos: Vec<usize>,
    kernel_rows: Vec<usize>,
    kernel_cols: Vec<Vec<(usize, f64)>>,
    lu: DenseLu,
    etas: Vec<Eta>,
}

impl BasisFactor {
    /// `columns[k]` holds the `(row, value)` entries of the column at basis
    /// position `k`.
    pub(crate) fn new(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, LpError> {
        if columns.len() != m {
            return Err(LpError::Factorization(format!(
                "{} basic columns for {} rows",
                columns.len(),
                m
            )));
        }
        let mut row_owner = vec![NONE; m];
        let mut single_pos = Vec::new();
        let mut single_row = Vec::new();
        let mut single_val = Vec::new();
        let mut kernel_pos = Vec::new();
        for (k, col) in columns.iter().enumerate() {
            let mut nz = col.iter().filter(|e| e.1 != 0.0);
            let first = nz.next();
            let only = first.filter(|_| nz.next().is_none());
            match only {
                Some(&(r, v)) if row_owner[r] == NONE => {
                    row_owner[r] = k;
                    single_pos.push(k);
                    single_row.push(r);
                    single_val.push(v);
                }
                _ => kernel_pos.push(k),
            }
        }
        let kernel_rows: Vec<usize> = (0..m).filter(|&r| row_owner[r] == NONE).collect();
        debug_assert_eq!(kernel_rows.len(), kernel_pos.len());
        let nk = kernel_pos.len();
        let mut kernel_index = vec![NONE; m];
        for (ki, &r) in kernel_rows.iter().enumerate() {
            kernel_index[r] = ki;
        }
        let mut dense = vec![0.0; nk * nk];
        let mut kernel_cols = Vec::with_capacity(nk);
        for (kc, &k) in kernel_pos.iter().enumerate() {
            let col: Vec<(usize, f64)> = columns[k].iter().copied().filter(|e| e.1 != 0.0).collect();
            for &(r, v) in &col {
                let kr = kernel_index[r];
                if kr != NONE {
                    dense[kr * nk + kc] += v;
                }
            }
            kernel_cols.push(col);
        }
        let lu = DenseLu::factorize(nk, dense)?;
        Ok(BasisFactor {
            m,
            single_pos,
            single_row,
            single_val,
            row_is_single: row_owner.iter().map(|&o| o != NONE).collect(),
            kernel_pos,
            kernel_rows,
            kernel_cols,
            lu,
            etas: Vec::new(),
        })
    }

    pub(crate) fn kernel_size(&self) -> usize {
        self.kernel_pos.len()
    }

    pub(crate) fn eta_count(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs`; `rhs` is indexed by row, the result by basis
    /// position.
    pub(crate) fn ftran(&self, rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        let mut xk: Vec<f64> = self.kernel_rows.iter().map(|&r| rhs[r]).collect();
        self.lu.solve(&mut xk);
        let mut t: Vec<f64> = rhs.to_vec();
        for (kc, &xv) in xk.iter().enumerate() {
            out[self.kernel_pos[kc]] = xv;
            if xv != 0.0 {
                for &(r, a) in &self.kernel_cols[kc] {
                    if self.row_is_single[r] {
                        t[r] -= a * xv;
                    }
                }
            }
        }
        for s in 0..self.single_pos.len() {
            out[self.single_pos[s]] = t[self.single_row[s]] / self.single_val[s];
        }
        for eta in &self.etas {
            let xr = out[eta.pos] / eta.pivot;
            out[eta.pos] = xr;
            if xr != 0.0 {
                for &(i, a) in &eta.entries {
                    out[i] -= a * xr;
                }
            }
        }
        out
    }

    /// Solves `B^T y = c`; `c` is indexed by basis position, the result by
    /// row.
    pub(crate) fn btran(&self, c: &[f64]) -> Vec<f64> {
        let mut c = c.to_vec();
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, a)| a * c[i]).sum();
            c[eta.pos] = (c[eta.pos] - s) / eta.pivot;
        }
        let mut y = vec![0.0; self.m];
        for s in 0..self.single_pos.len() {
            y[self.single_row[s]] = c[self.single_pos[s]] / self.single_val[s];
        }
        let mut rk: Vec<f64> = self
            .kernel_pos
            .iter()
            .zip(&self.kernel_cols)
            .map(|(&k, col)| {
                let off: f64 = col
                    .iter()
                    .filter(|e| self.row_is_single[e.0])
                    .map(|&(r, a)| a * y[r])
                    .sum();
                c[k] - off
            })
            .collect();
        self.lu.solve_transpose(&mut rk);
        for (ki, &r) in self.kernel_rows.iter().enumerate() {
            y[r] = rk[ki];
        }
        y
    }

    /// Records the replacement of the column at `pos` by a column whose
    /// FTRAN image is `alpha`.
    pub(crate) fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pos && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (k, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                out[r] += v * x[k];
            }
        }
        out
    }

    #[test]
    fn lu_solves_and_transposes() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = DenseLu::factorize(3, a.clone()).unwrap();
        let mut b = vec![1.0, 2.0, 3.0];
        lu.solve(&mut b);
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| a[i * 3 + j] * b[j]).sum();
            assert!((s - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let mut c = vec![1.0, -1.0, 2.0];
        lu.solve_transpose(&mut c);
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| a[i * 3 + j] * c[i]).sum();
            assert!((s - [1.0, -1.0, 2.0][j]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_kernel_is_reported() {
        assert!(DenseLu::factorize(2, vec![1.0, 2.0, 2.0, 4.0]).is_err());
        let cols = vec![vec![(0, 1.0)], vec![(0, 2.0)]];
        assert!(BasisFactor::new(2, &cols).is_err());
    }

    #[test]
    fn mixed_singleton_kernel_round_trip() {
        let cols = vec![
            vec![(0, 1.0), (2, 3.0)],
            vec![(1, -1.0)],
            vec![(0, 2.0), (1, 1.0), (2, -1.0), (3, 0.5)],
            vec![(3, 4.0)],
        ];
        let f = BasisFactor::new(4, &cols).unwrap();
        assert_eq!(f.kernel_size(), 2);
        let rhs = vec![1.0, 2.0, -1.0, 0.5];
        let x = f.ftran(&rhs);
        let back = dense_mul(&cols, &x, 4);
        for r in 0..4 {
            assert!((back[r] - rhs[r]).abs() < 1e-12);
        }
        let c = vec![0.3, -1.0, 2.0, 1.0];
        let y = f.btran(&c);
        for (k, col) in cols.iter().enumerate() {
            let s: f64 = col.iter().map(|&(r, v)| v * y[r]).sum();
            assert!((s - c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_updates_match_refactorization() {
        let mut cols = vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)]];
        let mut f = BasisFactor::new(3, &cols).unwrap();
        let entering = vec![(0, 2.0), (1, 1.0), (2, 1.0)];
        let mut a = vec![0.0; 3];
        for &(r, v) in &entering {
            a[r] = v;
        }
        let alpha = f.ftran(&a);
        f.push_eta(1, &alpha);
        cols[1] = entering;
        let fresh = BasisFactor::new(3, &cols).unwrap();
        let rhs = vec![1.0, -2.0, 0.5];
        let (x1, x2) = (f.ftran(&rhs), fresh.ftran(&rhs));
        let (y1, y2) = (f.btran(&rhs), fresh.btran(&rhs));
        for i in 0..3 {
            assert!((x1[i] - x2[i]).abs() < 1e-12);
            assert!((y1[i] - y2[i]).abs() < 1e-12);
        }
    }
}
