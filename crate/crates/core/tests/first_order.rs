mod common;

use common::{full_lp_objective, random_dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svmcut::data::{lambda_max_l1, Dataset, FeatureMatrix, GroupStructure};
use svmcut::first_order::{
    accelerated_prox_gradient, augmented_sigma_max, block_cd_group, FoConfig, Penalty, SmoothedObjective,
};

fn one_point(y: f64) -> Dataset {
    Dataset::new(FeatureMatrix::from_dense_rows(&[vec![1.0]]).unwrap(), vec![y]).unwrap()
}

#[test]
fn per_sample_smoothing_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let datasets = [one_point(1.0), one_point(-1.0)];
    let taus = [0.01, 0.2, 1.0, 5.0];
    for k in 0..10_000 {
        let d = &datasets[k % 2];
        let tau = taus[k % 4];
        let obj = SmoothedObjective::new(d, tau).unwrap();
        let beta = rng.gen_range(-4.0..4.0);
        let beta0 = rng.gen_range(-4.0..4.0);
        let hinge = d.hinge_loss(&[beta], beta0);
        let gap = hinge - obj.value(&[beta], beta0);
        assert!(gap >= -1e-12 && gap <= tau / 2.0 + 1e-12, "tau {tau}, z gap {gap}");
    }
}

#[test]
fn dataset_smoothing_gap_is_bounded_by_n_tau_over_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let d = random_dataset(30, 8, 3);
    for _ in 0..200 {
        let tau = rng.gen_range(0.01..2.0);
        let obj = SmoothedObjective::new(&d, tau).unwrap();
        let beta: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b0 = rng.gen_range(-1.0..1.0);
        let gap = d.hinge_loss(&beta, b0) - obj.value(&beta, b0);
        assert!(gap >= -1e-10 && gap <= 30.0 * tau / 2.0 + 1e-10);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let d = random_dataset(25, 6, 4);
    let h = 1e-5;
    for _ in 0..100 {
        let tau = rng.gen_range(0.05..1.0);
        let obj = SmoothedObjective::new(&d, tau).unwrap();
        let beta: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b0 = rng.gen_range(-0.5..0.5);
        let (_, grad) = obj.value_grad(&beta, b0);
        let mut fd = Vec::with_capacity(7);
        for j in 0..6 {
            let (mut up, mut dn) = (beta.clone(), beta.clone());
            up[j] += h;
            dn[j] -= h;
            fd.push((obj.value(&up, b0) - obj.value(&dn, b0)) / (2.0 * h));
        }
        fd.push((obj.value(&beta, b0 + h) - obj.value(&beta, b0 - h)) / (2.0 * h));
        let err: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err <= 1e-5 * norm.max(1.0), "relative error {}", err / norm);
    }
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_max_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
    let k = a.len();
    for _ in 0..100 {
        let off: f64 = (0..k).flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..k).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn lipschitz_matches_dense_eigen_oracle() {
    for seed in 0..5 {
        let d = random_dataset(30, 10, 40 + seed);
        let k = 11;
        let mut gram = vec![vec![0.0; k]; k];
        for i in 0..30 {
            let mut row: Vec<f64> = (0..10).map(|j| d.features().get(i, j)).collect();
            row.push(1.0);
            for a in 0..k {
                for b in 0..k {
                    gram[a][b] += row[a] * row[b];
                }
            }
        }
        let sigma = jacobi_max_eigenvalue(gram);
        let est = augmented_sigma_max(&d);
        assert!((est - sigma).abs() <= 1e-6 * sigma, "{est} vs {sigma}");
        for tau in [0.1, 0.2, 0.4] {
            let l = SmoothedObjective::new(&d, tau).unwrap().lipschitz();
            let exact = sigma / (4.0 * tau);
            assert!(l >= exact && l <= 1.01 * exact * (1.0 + 1e-6), "tau {tau}: {l} vs {exact}");
        }
        let l1 = SmoothedObjective::new(&d, 0.3).unwrap().lipschitz();
        let l2 = SmoothedObjective::new(&d, 0.6).unwrap().lipschitz();
        assert!((l1 - 2.0 * l2).abs() <= 1e-12 * l1);
    }
}

fn smoothed_composite(d: &Dataset, tau: f64, pen: &Penalty, beta: &[f64], b0: f64) -> f64 {
    SmoothedObjective::new(d, tau).unwrap().value(beta, b0) + pen.value(beta)
}

#[test]
fn tiny_instance_brackets_the_lp_optimum() {
    let tau = 0.2;
    for seed in 0..5 {
        let d = random_dataset(10, 5, 60 + seed);
        let lambda = 0.1 * lambda_max_l1(&d);
        let lp = full_lp_objective(&d, lambda);
        let cfg = FoConfig {
            max_iter: 50_000,
            tol: 1e-10,
            taus: vec![tau],
            accelerated: true,
        };
        let pen = Penalty::L1(lambda);
        let fit = accelerated_prox_gradient(&d, &pen, &cfg, None).unwrap();
        let f = smoothed_composite(&d, tau, &pen, &fit.beta, fit.beta0);
        assert!((f - fit.trace.last().unwrap()).abs() <= 1e-12 * f.max(1.0));
        assert!(f <= lp + 1e-3, "smoothed {f} above LP {lp}");
        assert!(f >= lp - 10.0 * tau / 2.0 - 1e-3, "smoothed {f} too far below LP {lp}");
        let true_obj = d.hinge_loss(&fit.beta, fit.beta0) + pen.value(&fit.beta);
        assert!(true_obj >= lp - 1e-9);
    }
}

#[test]
fn block_cd_agrees_with_proximal_gradient() {
    let tau = 0.2;
    for seed in 0..4 {
        let d = random_dataset(20, 6, 80 + seed);
        let groups = GroupStructure::contiguous(3, 2);
        let lambda = 2.0;
        let pen = Penalty::Group {
            groups: groups.clone(),
            lambda,
        };
        let cfg = FoConfig {
            max_iter: 100_000,
            tol: 1e-11,
            taus: vec![tau],
            accelerated: true,
        };
        let apg = accelerated_prox_gradient(&d, &pen, &cfg, None).unwrap();
        let bcd = block_cd_group(&d, &groups, lambda, &cfg, None).unwrap();
        let fa = smoothed_composite(&d, tau, &pen, &apg.beta, apg.beta0);
        let fb = smoothed_composite(&d, tau, &pen, &bcd.beta, bcd.beta0);
        assert!((fa - fb).abs() <= 1e-4, "seed {seed}: {fa} vs {fb}");
        assert!(bcd.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}

#[test]
fn continuation_boundaries_respect_the_smoothing_gap() {
    let d = random_dataset(40, 10, 90);
    let pen = Penalty::L1(0.05 * lambda_max_l1(&d));
    let cfg = FoConfig::continuation(0.2, 5, 0.7);
    let mut init: Option<(Vec<f64>, f64)> = None;
    let mut prev_true = f64::INFINITY;
    let mut prev_tau = f64::INFINITY;
    for &tau in &cfg.taus {
        let stage = FoConfig {
            taus: vec![tau],
            ..cfg.clone()
        };
        let fit = accelerated_prox_gradient(&d, &pen, &stage, init.as_ref().map(|(b, b0)| (b.as_slice(), *b0))).unwrap();
        let true_obj = d.hinge_loss(&fit.beta, fit.beta0) + pen.value(&fit.beta);
        if prev_true.is_finite() {
            assert!(true_obj <= prev_true + d.n() as f64 * prev_tau / 2.0 + 1e-9);
        }
        prev_true = true_obj;
        prev_tau = tau;
        init = Some((fit.beta, fit.beta0));
    }
}
