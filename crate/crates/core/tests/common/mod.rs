#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svmcut::data::{Dataset, FeatureMatrix};
use svmcut::l1::{build_restricted, WorkingSet};
use svmcut::lp::{self, LpStatus};

/// Random dense dataset with standard-normal-ish features and both classes.
pub fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let row: Vec<f64> = (0..p)
            .map(|j| {
                let shift = if j < 2 { 0.5 * y } else { 0.0 };
                rng.gen_range(-1.0..1.0) + shift
            })
            .collect();
        rows.push(row);
        labels.push(y);
    }
    Dataset::new(FeatureMatrix::from_dense_rows(&rows).unwrap(), labels).unwrap()
}

/// Optimal value of the full L1-SVM LP, built and solved cold.
pub fn full_lp_objective(d: &Dataset, lambda: f64) -> f64 {
    let m = build_restricted(d, lambda, &WorkingSet::full(d.n(), d.p())).unwrap();
    let (sol, _) = lp::solve(&m, None).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective
}

/// `min_b sum_i (1 - y_i b)_+`, evaluated at the two kinks of the convex
/// piecewise-linear function and cross-checked on a grid.
pub fn intercept_only_objective(d: &Dataset) -> f64 {
    let f = |b: f64| -> f64 { d.labels().iter().map(|&y| (1.0 - y * b).max(0.0)).sum() };
    let best = f(-1.0).min(f(1.0));
    for k in -300..=300 {
        assert!(f(k as f64 / 100.0) >= best - 1e-12);
    }
    best
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sorted_l1(u: &[f64], w: &[f64]) -> f64 {
    let mut m: Vec<f64> = u.iter().map(|x| x.abs()).collect();
    m.sort_by(|a, b| b.total_cmp(a));
    m.iter().zip(w).map(|(a, b)| a * b).sum()
}

pub fn slope_prox_objective(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    0.5 * dist(u, v).powi(2) + sorted_l1(u, w)
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(p - 1) {
        for pos in 0..=perm.len() {
            let mut q = perm.clone();
            q.insert(pos, p - 1);
            out.push(q);
        }
    }
    out
}

/// Exhaustive prox of the sorted-L1 norm. For every magnitude ordering and
/// every split of that ordering into consecutive blocks (optionally with the
/// last block pinned at zero), the block values are the block means of
/// `|v|_pi(k) - w_k`; the best feasible candidate is the prox.
pub fn slope_prox_oracle(v: &[f64], w: &[f64]) -> Vec<f64> {
    let p = v.len();
    let mut best = (f64::INFINITY, vec![0.0; p]);
    for perm in permutations(p) {
        let a: Vec<f64> = perm.iter().enumerate().map(|(k, &j)| v[j].abs() - w[k]).collect();
        for mask in 0..(1u32 << (p - 1)) {
            let mut bounds = vec![0];
            for k in 1..p {
                if mask & (1 << (k - 1)) != 0 {
                    bounds.push(k);
                }
            }
            bounds.push(p);
            for pin_last in [false, true] {
                let mut mags = vec![0.0; p];
                let blocks = bounds.len() - 1;
                for b in 0..blocks {
                    let (s, e) = (bounds[b], bounds[b + 1]);
                    let val = if pin_last && b == blocks - 1 {
                        0.0
                    } else {
                        a[s..e].iter().sum::<f64>() / (e - s) as f64
                    };
                    mags[s..e].iter_mut().for_each(|m| *m = val);
                }
                let feasible = mags.windows(2).all(|x| x[0] >= x[1] - 1e-15) && mags[p - 1] >= -1e-15;
                if !feasible {
                    continue;
                }
                let mut u = vec![0.0; p];
                for (k, &j) in perm.iter().enumerate() {
                    u[j] = mags[k].max(0.0).copysign(v[j]);
                }
                let f = slope_prox_objective(&u, v, w);
                if f < best.0 {
                    best = (f, u);
                }
            }
        }
    }
    best.1
}

/// Radius-`r` projection from the optimality condition: the result is
/// `soft(v, theta)` with `theta` the root of `sum (|v_i| - theta)_+ = r`,
/// found by bisection.
pub fn l1_projection_oracle(v: &[f64], r: f64) -> Vec<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= r {
        return v.to_vec();
    }
    let excess = |t: f64| v.iter().map(|x| (x.abs() - t).max(0.0)).sum::<f64>() - r;
    let (mut lo, mut hi) = (0.0, v.iter().map(|x| x.abs()).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|&x| x.signum() * (x.abs() - t).max(0.0)).collect()
}
