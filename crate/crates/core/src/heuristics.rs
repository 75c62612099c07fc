//! Initialization heuristics: correlation screening, subsample-averaged
//! first-order fits, and working sets read off approximate solutions.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, GroupStructure};
use crate::error::{Error, Result};
use crate::first_order::{accelerated_prox_gradient, block_cd_group, FoConfig, FoResult, Penalty};
use crate::l1::top_k;

/// Indices of the `m` largest `|x_j^T y|`, ties by index, sorted by index.
pub fn correlation_screen(d: &Dataset, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > d.p() {
        return Err(Error::domain(format!("screen width {m} must be in 1..={}", d.p())));
    }
    let scores: Vec<f64> = d.features().transpose_mul(d.labels()).iter().map(|v| v.abs()).collect();
    Ok(top_k(&scores, m))
}

/// The `m` groups with the largest `sum_{j in g} |x_j^T y|`.
pub fn group_correlation_screen(d: &Dataset, groups: &GroupStructure, m: usize) -> Result<Vec<usize>> {
    if groups.p() != d.p() {
        return Err(Error::Dimension("group structure does not match dataset".into()));
    }
    if m == 0 || m > groups.len() {
        return Err(Error::domain(format!("screen width {m} must be in 1..={}", groups.len())));
    }
    let corr = d.features().transpose_mul(d.labels());
    let scores: Vec<f64> = groups
        .groups()
        .iter()
        .map(|g| g.iter().map(|&j| corr[j].abs()).sum())
        .collect();
    Ok(top_k(&scores, m))
}

/// First-order fit with the engine suited to the penalty: block coordinate
/// descent for groups, accelerated proximal gradient otherwise.
pub fn first_order_fit(
    d: &Dataset,
    penalty: &Penalty,
    cfg: &FoConfig,
    init: Option<(&[f64], f64)>,
) -> Result<FoResult> {
    match penalty {
        Penalty::Group { groups, lambda } => block_cd_group(d, groups, *lambda, cfg, init),
        _ => accelerated_prox_gradient(d, penalty, cfg, init),
    }
}

/// Averaged coefficients of [`subsample_average_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleFit {
    pub beta: Vec<f64>,
    pub beta0: f64,
    /// Number of subsample fits in the average.
    pub fits: usize,
    /// Whether the running average met the tolerance before `q_max`.
    pub converged: bool,
}

fn subsample(n: usize, n0: usize, seed: u64, q: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(q as u64);
    let mut idx = index::sample(&mut rng, n, n0).into_vec();
    idx.sort_unstable();
    idx
}

/// Averages first-order fits on independent subsamples of size `n0`, each
/// with the penalty scaled by `n0 / n`, until the running average moves by
/// at most `mu_tol` (Euclidean, intercept included) or `q_max` fits are in.
/// Subsample `q` is drawn from its own seeded stream and fits run in
/// parallel batches, so the result does not depend on the thread count.
pub fn subsample_average_fit(
    d: &Dataset,
    penalty: &Penalty,
    n0: usize,
    mu_tol: f64,
    q_max: usize,
    fo_cfg: &FoConfig,
    seed: u64,
) -> Result<SubsampleFit> {
    if n0 == 0 || n0 > d.n() {
        return Err(Error::domain(format!("subsample size {n0} must be in 1..={}", d.n())));
    }
    if q_max == 0 {
        return Err(Error::domain("q_max must be at least 1"));
    }
    if !(mu_tol >= 0.0) {
        return Err(Error::domain("mu_tol must be nonnegative"));
    }
    let scaled = penalty.scaled(n0 as f64 / d.n() as f64)?;
    let p = d.p();
    let mut sum = vec![0.0; p + 1];
    let mut prev: Option<Vec<f64>> = None;
    let mut fits = 0;
    let batch = rayon::current_num_threads().max(1);
    while fits < q_max {
        let range = fits..(fits + batch).min(q_max);
        let results: Vec<Result<FoResult>> = range
            .into_par_iter()
            .map(|q| {
                let sub = d.select_rows(&subsample(d.n(), n0, seed, q));
                first_order_fit(&sub, &scaled, fo_cfg, None)
            })
            .collect();
        for res in results {
            let fit = res?;
            for (s, b) in sum.iter_mut().zip(fit.beta.iter().chain(std::iter::once(&fit.beta0))) {
                *s += b;
            }
            fits += 1;
            let avg: Vec<f64> = sum.iter().map(|s| s / fits as f64).collect();
            if let Some(prev) = &prev {
                let moved = prev.iter().zip(&avg).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                log::debug!("subsample fit {fits}: average moved by {moved:.3e}");
                if moved <= mu_tol {
                    return Ok(SubsampleFit {
                        beta0: avg[p],
                        beta: avg[..p].to_vec(),
                        fits,
                        converged: true,
                    });
                }
            }
            prev = Some(avg);
        }
    }
    let avg = prev.expect("at least one fit");
    Ok(SubsampleFit {
        beta0: avg[p],
        beta: avg[..p].to_vec(),
        fits,
        converged: false,
    })
}

/// `k` distinct indices below `len` drawn uniformly from a seeded stream,
/// sorted.
pub fn random_subset(len: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, len, k.min(len)).into_vec();
    idx.sort_unstable();
    idx
}

/// The `cap` largest `|beta_j|` among the nonzeros, sorted by index.
pub fn init_columns_from_beta(beta: &[f64], cap: usize) -> Result<Vec<usize>> {
    if cap == 0 {
        return Err(Error::domain("cap must be at least 1"));
    }
    let mut nz: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    nz.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));
    nz.truncate(cap);
    nz.sort_unstable();
    Ok(nz)
}

/// Samples with a positive hinge loss at `(beta, beta0)`.
pub fn init_constraints_from_beta(d: &Dataset, beta: &[f64], beta0: f64) -> Result<Vec<usize>> {
    if beta.len() != d.p() {
        return Err(Error::Dimension(format!("beta has length {}, expected {}", beta.len(), d.p())));
    }
    let scores = d.features().mul(beta);
    Ok((0..d.n()).filter(|&i| 1.0 - d.y(i) * (scores[i] + beta0) > 0.0).collect())
}
