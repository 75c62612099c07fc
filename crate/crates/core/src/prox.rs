//! Thresholding and projection operators used by the first-order engines.

use crate::error::{Error, Result};

/// `sign(v_i) * max(|v_i| - mu, 0)` componentwise.
pub fn soft_threshold(v: &[f64], mu: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0) {
        return Err(Error::domain(format!("threshold {mu} must be nonnegative")));
    }
    Ok(v.iter().map(|&x| soft(x, mu)).collect())
}

#[inline]
pub(crate) fn soft(x: f64, mu: f64) -> f64 {
    if x > mu {
        x - mu
    } else if x < -mu {
        x + mu
    } else {
        0.0
    }
}

/// Euclidean projection onto `{u : ||u||_1 <= r}` by sorting magnitudes and
/// shifting. A radius of zero projects onto the origin.
pub fn project_l1_ball(v: &[f64], r: f64) -> Result<Vec<f64>> {
    if !(r >= 0.0) {
        return Err(Error::domain(format!("radius {r} must be nonnegative")));
    }
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= r {
        return Ok(v.to_vec());
    }
    if r == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - r) / (k + 1) as f64;
        if m - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| soft(x, theta)).collect())
}

/// Prox of `mu * ||.||_inf`, computed as `v - project_l1_ball(v, mu)`.
pub fn prox_linf(v: &[f64], mu: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0) {
        return Err(Error::domain(format!("weight {mu} must be nonnegative")));
    }
    if mu == 0.0 {
        return Ok(v.to_vec());
    }
    let proj = project_l1_ball(v, mu)?;
    Ok(v.iter().zip(&proj).map(|(a, b)| a - b).collect())
}

/// Prox of the sorted-L1 norm `sum_j w_j |u|_(j)` for nonincreasing,
/// nonnegative `w` (already multiplied by the step). Weights beyond
/// `w.len()` are treated as zero.
pub fn prox_slope(v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if w.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::domain("slope weights must be nonnegative"));
    }
    if w.windows(2).any(|p| p[1] > p[0]) {
        return Err(Error::domain("slope weights must be nonincreasing"));
    }
    let p = v.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));

    // Pool adjacent violators for a nonincreasing fit to |v|_(k) - w_k.
    // Each block stores (start, length, sum).
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(p);
    for (k, &j) in order.iter().enumerate() {
        let z = v[j].abs() - w.get(k).copied().unwrap_or(0.0);
        blocks.push((k, 1, z));
        while blocks.len() > 1 {
            let (_, ln, sn) = blocks[blocks.len() - 1];
            let (_, lp, sp) = blocks[blocks.len() - 2];
            if sp / lp as f64 > sn / ln as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            last.1 += ln;
            last.2 += sn;
        }
    }
    let mut out = vec![0.0; p];
    for (start, len, sum) in blocks {
        let val = (sum / len as f64).max(0.0);
        for &j in &order[start..start + len] {
            out[j] = val.copysign(v[j]);
            if val == 0.0 {
                out[j] = 0.0;
            }
        }
    }
    Ok(out)
}
