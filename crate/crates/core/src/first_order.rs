//! Smoothed hinge loss and the first-order engines used to warm-start the
//! cutting-plane drivers: accelerated proximal gradient for any of the three
//! penalties and cyclic block coordinate descent for the group penalty.

use crate::data::{Dataset, GroupStructure, SlopeWeights};
use crate::error::{Error, Result};
use crate::prox;
use crate::slope::slope_norm;

const POWER_TOL: f64 = 1e-7;
const POWER_MAX_ITER: usize = 10_000;
const SAFETY: f64 = 1.01;

/// Regularizer of the composite problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalty {
    L1(f64),
    Group { groups: GroupStructure, lambda: f64 },
    Slope(SlopeWeights),
}

impl Penalty {
    pub fn value(&self, beta: &[f64]) -> f64 {
        match self {
            Penalty::L1(l) => l * beta.iter().map(|b| b.abs()).sum::<f64>(),
            Penalty::Group { groups, lambda } => {
                lambda
                    * groups
                        .groups()
                        .iter()
                        .map(|g| g.iter().map(|&j| beta[j].abs()).fold(0.0, f64::max))
                        .sum::<f64>()
            }
            Penalty::Slope(w) => slope_norm(beta, w),
        }
    }

    /// Prox of `step * penalty` at `v`.
    pub fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        match self {
            Penalty::L1(l) => v.iter().map(|&x| prox::soft(x, step * l)).collect(),
            Penalty::Group { groups, lambda } => {
                let mut out = vec![0.0; v.len()];
                for g in groups.groups() {
                    let block: Vec<f64> = g.iter().map(|&j| v[j]).collect();
                    let u = prox::prox_linf(&block, step * lambda).expect("nonnegative weight");
                    for (&j, x) in g.iter().zip(u) {
                        out[j] = x;
                    }
                }
                out
            }
            Penalty::Slope(w) => {
                let scaled: Vec<f64> = w.as_slice().iter().map(|l| l * step).collect();
                prox::prox_slope(v, &scaled).expect("validated weights")
            }
        }
    }

    /// The same penalty with every weight multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Penalty> {
        if !(factor >= 0.0) {
            return Err(Error::domain(format!("scale {factor} must be nonnegative")));
        }
        Ok(match self {
            Penalty::L1(l) => Penalty::L1(l * factor),
            Penalty::Group { groups, lambda } => Penalty::Group {
                groups: groups.clone(),
                lambda: lambda * factor,
            },
            Penalty::Slope(w) => Penalty::Slope(w.scaled(factor)?),
        })
    }
}

/// Per-sample smoothed hinge terms from the linear scores `xb + beta0`.
/// Returns the total value and `c_i = -(1 + w_i) y_i / 2`, so that the
/// gradient is `X~^T c`.
fn smoothed_terms(labels: &[f64], xb: &[f64], beta0: f64, tau: f64) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let coef = labels
        .iter()
        .zip(xb)
        .map(|(&y, &s)| {
            let z = 1.0 - y * (s + beta0);
            let w = (z / (2.0 * tau)).clamp(-1.0, 1.0);
            value += 0.5 * (z + w * z) - 0.5 * tau * w * w;
            -0.5 * (1.0 + w) * y
        })
        .collect();
    (value, coef)
}

/// Smoothed hinge sum for a fixed dataset and smoothing level `tau`.
#[derive(Debug, Clone)]
pub struct SmoothedObjective<'a> {
    data: &'a Dataset,
    tau: f64,
    sigma: f64,
}

impl<'a> SmoothedObjective<'a> {
    pub fn new(data: &'a Dataset, tau: f64) -> Result<Self> {
        Self::with_sigma(data, tau, augmented_sigma_max(data))
    }

    fn with_sigma(data: &'a Dataset, tau: f64, sigma: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::domain(format!("smoothing parameter {tau} must be positive")));
        }
        Ok(SmoothedObjective { data, tau, sigma })
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Upper bound on the gradient's Lipschitz constant,
    /// `1.01 * sigma_max(X~^T X~) / (4 tau)`.
    pub fn lipschitz(&self) -> f64 {
        SAFETY * self.sigma / (4.0 * self.tau)
    }

    pub fn value(&self, beta: &[f64], beta0: f64) -> f64 {
        let xb = self.data.features().mul(beta);
        smoothed_terms(self.data.labels(), &xb, beta0, self.tau).0
    }

    /// Value and gradient; the last gradient entry is the intercept's.
    pub fn value_grad(&self, beta: &[f64], beta0: f64) -> (f64, Vec<f64>) {
        let xb = self.data.features().mul(beta);
        let (value, coef) = smoothed_terms(self.data.labels(), &xb, beta0, self.tau);
        let mut grad = self.data.features().transpose_mul(&coef);
        grad.push(coef.iter().sum());
        (value, grad)
    }
}

/// `sigma_max(X~^T X~)` for `X~ = [X, 1]` by power iteration, falling back
/// to the squared Frobenius norm when it does not settle.
pub fn augmented_sigma_max(data: &Dataset) -> f64 {
    let x = data.features();
    let (n, p) = (x.n(), x.p());
    let mut v: Vec<f64> = (0..=p).map(|k| 1.0 + 0.1 * ((k as f64) * 0.7).sin()).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = norm(&v);
    v.iter_mut().for_each(|a| *a /= nv);
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let mut u = x.mul(&v[..p]);
        u.iter_mut().for_each(|a| *a += v[p]);
        let mut w = x.transpose_mul(&u);
        w.push(u.iter().sum());
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let prev = est;
        est = nw;
        v = w.into_iter().map(|a| a / nw).collect();
        if (est - prev).abs() <= POWER_TOL * est {
            return est;
        }
    }
    log::warn!("power iteration did not converge; using Frobenius bound");
    let mut fro = n as f64;
    for i in 0..n {
        x.for_each_in_row(i, |_, a| fro += a * a);
    }
    fro
}

/// Largest eigenvalue of a small symmetric positive semidefinite matrix
/// given row-major, by power iteration with a trace fallback.
fn gram_sigma_max(gram: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * ((i as f64) * 0.7).sin()).collect();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= nv);
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w: Vec<f64> = (0..k)
            .map(|r| (0..k).map(|c| gram[r * k + c] * v[c]).sum())
            .collect();
        let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let prev = est;
        est = nw;
        v = w.into_iter().map(|a| a / nw).collect();
        if (est - prev).abs() <= POWER_TOL * est {
            return est;
        }
    }
    (0..k).map(|i| gram[i * k + i]).sum()
}

/// Settings shared by both first-order engines.
#[derive(Debug, Clone, PartialEq)]
pub struct FoConfig {
    /// Iterations (or sweeps) per smoothing stage.
    pub max_iter: usize,
    /// Stop a stage once the iterate moves by at most this much.
    pub tol: f64,
    /// Smoothing levels, run in order with warm starts.
    pub taus: Vec<f64>,
    /// FISTA momentum; `false` gives plain proximal gradient.
    pub accelerated: bool,
}

impl Default for FoConfig {
    fn default() -> Self {
        FoConfig {
            max_iter: 200,
            tol: 1e-3,
            taus: vec![0.2],
            accelerated: true,
        }
    }
}

impl FoConfig {
    /// `stages` smoothing levels `tau0, tau0 * ratio, ...`.
    pub fn continuation(tau0: f64, stages: usize, ratio: f64) -> Self {
        FoConfig {
            taus: (0..stages.max(1)).map(|k| tau0 * ratio.powi(k as i32)).collect(),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::domain("max_iter must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("tolerance must be positive"));
        }
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::domain("smoothing schedule must be nonempty and positive"));
        }
        Ok(())
    }
}

/// Output of a first-order fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FoResult {
    pub beta: Vec<f64>,
    pub beta0: f64,
    /// Smoothed composite objective after each iteration (all stages).
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Whether the last stage met the step tolerance.
    pub converged: bool,
}

fn check_init(data: &Dataset, init: Option<(&[f64], f64)>) -> Result<(Vec<f64>, f64)> {
    match init {
        Some((b, _)) if b.len() != data.p() => Err(Error::Dimension(format!(
            "initial beta has length {}, expected {}",
            b.len(),
            data.p()
        ))),
        Some((b, b0)) => Ok((b.to_vec(), b0)),
        None => Ok((vec![0.0; data.p()], 0.0)),
    }
}

/// Accelerated proximal gradient on `F^tau(beta, beta0) + penalty(beta)`
/// with step `1/L`, one warm-started stage per smoothing level. The
/// intercept takes plain gradient steps and momentum restarts each stage.
pub fn accelerated_prox_gradient(
    data: &Dataset,
    penalty: &Penalty,
    cfg: &FoConfig,
    init: Option<(&[f64], f64)>,
) -> Result<FoResult> {
    cfg.validate()?;
    if let Penalty::Group { groups, .. } = penalty {
        if groups.p() != data.p() {
            return Err(Error::Dimension("group structure does not match dataset".into()));
        }
    }
    let (mut beta, mut beta0) = check_init(data, init)?;
    let sigma = augmented_sigma_max(data);
    let x = data.features();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for &tau in &cfg.taus {
        let obj = SmoothedObjective::with_sigma(data, tau, sigma)?;
        let step = 1.0 / obj.lipschitz().max(f64::MIN_POSITIVE);
        let mut y_beta = beta.clone();
        let mut y0 = beta0;
        let mut q = 1.0f64;
        converged = false;
        for _ in 0..cfg.max_iter {
            iterations += 1;
            let (_, grad) = obj.value_grad(&y_beta, y0);
            let v: Vec<f64> = y_beta.iter().zip(&grad).map(|(b, g)| b - step * g).collect();
            let new_beta = penalty.prox(&v, step);
            let new0 = y0 - step * grad[data.p()];
            let diff: f64 = new_beta
                .iter()
                .zip(&beta)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                + (new0 - beta0) * (new0 - beta0);
            let q_next = if cfg.accelerated {
                0.5 * (1.0 + (1.0 + 4.0 * q * q).sqrt())
            } else {
                1.0
            };
            let mom = (q - 1.0) / q_next;
            y_beta = new_beta
                .iter()
                .zip(&beta)
                .map(|(a, b)| a + mom * (a - b))
                .collect();
            y0 = new0 + mom * (new0 - beta0);
            q = q_next;
            beta = new_beta;
            beta0 = new0;
            let xb = x.mul(&beta);
            let smooth = smoothed_terms(data.labels(), &xb, beta0, tau).0;
            trace.push(smooth + penalty.value(&beta));
            if diff.sqrt() <= cfg.tol {
                converged = true;
                break;
            }
        }
    }
    Ok(FoResult {
        beta,
        beta0,
        trace,
        iterations,
        converged,
    })
}

/// Cyclic proximal block coordinate descent for the group penalty
/// `lambda * sum_g ||beta_g||_inf`. Each sweep updates the active groups
/// and then the intercept; converged sweeps over the active set are
/// followed by a full sweep over all groups before stopping.
pub fn block_cd_group(
    data: &Dataset,
    groups: &GroupStructure,
    lambda: f64,
    cfg: &FoConfig,
    init: Option<(&[f64], f64)>,
) -> Result<FoResult> {
    cfg.validate()?;
    if groups.p() != data.p() {
        return Err(Error::Dimension("group structure does not match dataset".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!("lambda {lambda} must be nonnegative")));
    }
    let (beta, beta0) = check_init(data, init)?;
    let mut state = BlockCd::new(data, groups, lambda, beta, beta0);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    for &tau in &cfg.taus {
        state.set_tau(tau);
        converged = false;
        let mut full = true;
        let mut sweeps = 0;
        while sweeps < cfg.max_iter {
            sweeps += 1;
            iterations += 1;
            let (change, woke) = state.sweep(full);
            trace.push(state.objective());
            if change <= cfg.tol {
                if full && !woke {
                    converged = true;
                    break;
                }
                full = true;
            } else {
                full = false;
            }
        }
    }
    Ok(FoResult {
        beta: state.beta,
        beta0: state.beta0,
        trace,
        iterations,
        converged,
    })
}

struct BlockCd<'a> {
    data: &'a Dataset,
    groups: &'a GroupStructure,
    lambda: f64,
    tau: f64,
    /// `sigma_max(X_g^T X_g)` per group.
    group_sigma: Vec<f64>,
    beta: Vec<f64>,
    beta0: f64,
    /// Running `X beta`, updated per block.
    xb: Vec<f64>,
}

impl<'a> BlockCd<'a> {
    fn new(data: &'a Dataset, groups: &'a GroupStructure, lambda: f64, beta: Vec<f64>, beta0: f64) -> Self {
        let x = data.features();
        let group_sigma = groups
            .groups()
            .iter()
            .map(|g| {
                let k = g.len();
                let cols: Vec<Vec<f64>> = g
                    .iter()
                    .map(|&j| {
                        let mut c = vec![0.0; data.n()];
                        x.for_each_in_col(j, |i, v| c[i] = v);
                        c
                    })
                    .collect();
                let mut gram = vec![0.0; k * k];
                for a in 0..k {
                    for b in a..k {
                        let s: f64 = cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum();
                        gram[a * k + b] = s;
                        gram[b * k + a] = s;
                    }
                }
                gram_sigma_max(&gram, k)
            })
            .collect();
        let xb = x.mul(&beta);
        BlockCd {
            data,
            groups,
            lambda,
            tau: 1.0,
            group_sigma,
            beta,
            beta0,
            xb,
        }
    }

    fn set_tau(&mut self, tau: f64) {
        self.tau = tau;
    }

    fn coefficients(&self) -> Vec<f64> {
        smoothed_terms(self.data.labels(), &self.xb, self.beta0, self.tau).1
    }

    fn objective(&self) -> f64 {
        let smooth = smoothed_terms(self.data.labels(), &self.xb, self.beta0, self.tau).0;
        let pen: f64 = self
            .groups
            .groups()
            .iter()
            .map(|g| g.iter().map(|&j| self.beta[j].abs()).fold(0.0, f64::max))
            .sum();
        smooth + self.lambda * pen
    }

    /// One proximal step on group `g`; returns the squared change.
    fn group_step(&mut self, g: usize) -> f64 {
        let x = self.data.features();
        let members = self.groups.group(g);
        let c_g = SAFETY * self.group_sigma[g] / (4.0 * self.tau);
        if c_g == 0.0 {
            return 0.0;
        }
        let coef = self.coefficients();
        let grad: Vec<f64> = members
            .iter()
            .map(|&j| {
                let mut s = 0.0;
                x.for_each_in_col(j, |i, v| s += v * coef[i]);
                s
            })
            .collect();
        let at_zero = members.iter().all(|&j| self.beta[j] == 0.0);
        if at_zero && grad.iter().map(|g| g.abs()).sum::<f64>() <= self.lambda {
            return 0.0;
        }
        let v: Vec<f64> = members
            .iter()
            .zip(&grad)
            .map(|(&j, gr)| self.beta[j] - gr / c_g)
            .collect();
        let u = prox::prox_linf(&v, self.lambda / c_g).expect("nonnegative weight");
        let mut change = 0.0;
        for (&j, new) in members.iter().zip(u) {
            let delta = new - self.beta[j];
            if delta != 0.0 {
                x.for_each_in_col(j, |i, a| self.xb[i] += a * delta);
                self.beta[j] = new;
                change += delta * delta;
            }
        }
        change
    }

    fn intercept_step(&mut self) -> f64 {
        let c0 = SAFETY * self.data.n() as f64 / (4.0 * self.tau);
        let g0: f64 = self.coefficients().iter().sum();
        let delta = -g0 / c0;
        self.beta0 += delta;
        delta * delta
    }

    /// Returns the step size of the sweep and whether a zero group became
    /// nonzero.
    fn sweep(&mut self, full: bool) -> (f64, bool) {
        let mut change = 0.0;
        let mut woke = false;
        for g in 0..self.groups.len() {
            let members = self.groups.group(g);
            let at_zero = members.iter().all(|&j| self.beta[j] == 0.0);
            if at_zero && !full {
                continue;
            }
            let c = self.group_step(g);
            if at_zero && c > 0.0 {
                woke = true;
            }
            change += c;
        }
        change += self.intercept_step();
        (change.sqrt(), woke)
    }

    #[cfg(test)]
    fn recompute_xb(&self) -> Vec<f64> {
        self.data.features().mul(&self.beta)
    }
}
