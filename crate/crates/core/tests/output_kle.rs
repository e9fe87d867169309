mod common;

use bispectral::output_kle::*;
use bispectral::quadrature::{trapezoid_weights, uniform_grid};
use bispectral::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_process(s: &[f64], n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DMatrix::zeros(s.len(), n);
    for j in 0..n {
        let z: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();
        for (k, t) in s.iter().enumerate() {
            y[(k, j)] = 1.0 + (0..6).map(|i| z[i] * ((i + 1) as f64 * t).cos() / (i + 1) as f64).sum::<f64>();
        }
    }
    y
}

fn weighted_covariance(y: &DMatrix<f64>, w: &[f64]) -> Vec<Vec<f64>> {
    let (m, n) = y.shape();
    let mean: Vec<f64> = (0..m).map(|k| y.row(k).sum() / n as f64).collect();
    let c: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| (0..n).map(|j| (y[(a, j)] - mean[a]) * (y[(b, j)] - mean[b])).sum::<f64>() / (n as f64 - 1.0))
                .collect()
        })
        .collect();
    common::weighted(&c, w)
}

#[test]
fn eigenvalues_match_jacobi_oracle() {
    let s = uniform_grid(0.0, 3.0, 40);
    let w = trapezoid_weights(&s);
    let y = random_process(&s, 60, 1);
    let kle = compute_output_kle(&y, &w, Truncation::default()).unwrap();
    let oracle = common::jacobi_eigenvalues(weighted_covariance(&y, &w));
    for (a, b) in kle.eigenvalues.iter().zip(&oracle) {
        if *b > 1e-12 * oracle[0] {
            assert!((a - b).abs() / b < 1e-10, "{a} {b}");
        }
    }
}

#[test]
fn kle_structural_invariants() {
    let s = uniform_grid(0.0, 3.0, 50);
    let w = trapezoid_weights(&s);
    let n = 300;
    let y = random_process(&s, n, 2);
    let kle = compute_output_kle(&y, &w, Truncation::VarianceFraction(0.999)).unwrap();
    let m = s.len();

    // orthonormality under the weights
    for i in 0..kle.n_qoi {
        for j in 0..kle.n_qoi {
            let ip: f64 = (0..m).map(|k| w[k] * kle.eigenfunctions[(k, i)] * kle.eigenfunctions[(k, j)]).sum();
            assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
    }
    // Parseval: Σλ equals the weighted average sample variance
    let total_var: f64 = (0..m)
        .map(|k| {
            let row: Vec<f64> = y.row(k).iter().copied().collect();
            w[k] * common::mean_var(&row).1
        })
        .sum();
    let sum_l: f64 = kle.eigenvalues.iter().sum();
    assert!((sum_l - total_var).abs() / total_var < 1e-8);

    // eigen-residual of the symmetric weighted problem
    let a = weighted_covariance(&y, &w);
    for i in 0..kle.n_qoi {
        let v: Vec<f64> = (0..m).map(|k| w[k].sqrt() * kle.eigenfunctions[(k, i)]).collect();
        let res: f64 = (0..m)
            .map(|r| ((0..m).map(|c| a[r][c] * v[c]).sum::<f64>() - kle.eigenvalues[i] * v[r]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-10 * kle.eigenvalues[0].max(1.0));
    }

    // unit-variance, mutually uncorrelated modes
    for i in 0..kle.n_qoi {
        let fi: Vec<f64> = kle.modes.row(i).iter().copied().collect();
        let (_, vi) = common::mean_var(&fi);
        assert!((0.8..=1.2).contains(&vi));
        for j in 0..i {
            let fj: Vec<f64> = kle.modes.row(j).iter().copied().collect();
            let (_, vj) = common::mean_var(&fj);
            let cov: f64 = fi.iter().zip(&fj).map(|(a, b)| a * b).sum::<f64>() / (n as f64 - 1.0);
            assert!((cov / (vi * vj).sqrt()).abs() < 0.15);
        }
    }

    // r_k nondecreasing, r_m = 1
    assert!(kle.rank_fractions.windows(2).all(|p| p[1] >= p[0] - 1e-15));
    assert!((kle.rank_fractions[m - 1] - 1.0).abs() < 1e-12);
    assert!(kle.eigenvalues.windows(2).all(|p| p[0] >= p[1]) && kle.eigenvalues.iter().all(|l| *l >= 0.0));
}

#[test]
fn reconstruction_error_bounded_by_tail() {
    let s = uniform_grid(0.0, 3.0, 50);
    let w = trapezoid_weights(&s);
    let n = 200;
    let y = random_process(&s, n, 3);
    for nq in [1, 2, 4] {
        let kle = compute_output_kle(&y, &w, Truncation::Fixed(nq)).unwrap();
        let tail: f64 = kle.eigenvalues[nq..].iter().sum();
        let err: f64 = (0..n)
            .map(|j| {
                let r = reconstruct(&kle, j).unwrap();
                (0..s.len()).map(|k| w[k] * (r[k] - y[(k, j)]).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / n as f64;
        assert!(err <= 1.1 * tail, "{nq}: {err} vs {tail}");
    }
    let full = compute_output_kle(&y, &w, Truncation::Fixed(s.len())).unwrap();
    for j in [0, 50, 199] {
        let r = reconstruct(&full, j).unwrap();
        let num: f64 = (0..s.len()).map(|k| (r[k] - y[(k, j)]).powi(2)).sum::<f64>().sqrt();
        let den: f64 = y.column(j).norm();
        assert!(num / den < 1e-8);
    }
}

#[test]
fn rank_one_process() {
    let s = uniform_grid(0.0, 1.0, 30);
    let w = trapezoid_weights(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g: Vec<f64> = (0..40).map(|_| rng.sample(StandardNormal)).collect();
    let h = |t: f64| (3.0 * t).sin() + 0.2;
    let y = DMatrix::from_fn(30, 40, |k, j| g[j] * h(s[k]));
    let kle = compute_output_kle(&y, &w, Truncation::default()).unwrap();
    assert_eq!(kle.n_qoi, 1);
    assert!(kle.eigenvalues[1] / kle.eigenvalues[0] < 1e-12);
    let ratio = kle.eigenfunctions[(5, 0)] / h(s[5]);
    for k in 0..30 {
        assert!((kle.eigenfunctions[(k, 0)] - ratio * h(s[k])).abs() < 1e-10);
    }
}

#[test]
fn degenerate_and_constant_ensembles() {
    let s = uniform_grid(0.0, 1.0, 10);
    let w = trapezoid_weights(&s);
    assert!(matches!(
        compute_output_kle(&DMatrix::zeros(10, 5), &w, Truncation::default()),
        Err(Error::DegenerateEnsemble)
    ));
    let c = DMatrix::from_element(10, 5, 2.5);
    let kle = compute_output_kle(&c, &w, Truncation::default()).unwrap();
    assert_eq!(kle.n_qoi, 0);
    assert_eq!(reconstruct(&kle, 3).unwrap(), vec![2.5; 10]);
    assert!(compute_output_kle(&c, &w, Truncation::VarianceFraction(1.5)).is_err());
    assert_eq!(rank_fraction(&[3.0, 1.0], 1).unwrap(), 0.75);
    assert_eq!(rank_fraction(&[1.0, 0.0, 0.0], 1).unwrap(), 1.0);
}

#[test]
fn bit_identical_on_repeat() {
    let s = uniform_grid(0.0, 3.0, 25);
    let w = trapezoid_weights(&s);
    let y = random_process(&s, 30, 5);
    let a = compute_output_kle(&y, &w, Truncation::default()).unwrap();
    let b = compute_output_kle(&y, &w, Truncation::default()).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigenvalues_match_oracle_on_random_meshes(seed in 0u64..10_000, m in 5usize..30, n in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..5.0)).collect();
        s.sort_by(f64::total_cmp);
        s.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        prop_assume!(s.len() >= 3);
        let w = trapezoid_weights(&s);
        let y = random_process(&s, n, seed);
        let kle = compute_output_kle(&y, &w, Truncation::default()).unwrap();
        let oracle = common::jacobi_eigenvalues(weighted_covariance(&y, &w));
        for (a, b) in kle.eigenvalues.iter().zip(&oracle) {
            if *b > 1e-10 * oracle[0] {
                prop_assert!((a - b).abs() / b < 1e-10);
            }
        }
    }
}
