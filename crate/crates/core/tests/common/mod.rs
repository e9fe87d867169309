#![allow(dead_code)]

/// Cyclic Jacobi eigenvalue iteration for a dense symmetric matrix (row-major).
/// Returns eigenvalues sorted descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Weighted symmetric matrix W^{1/2} C W^{1/2}.
pub fn weighted(c: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    let n = w.len();
    (0..n)
        .map(|i| (0..n).map(|j| w[i].sqrt() * c[i][j] * w[j].sqrt()).collect())
        .collect()
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Spearman rank correlation; ties get their average rank.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut start = 0;
        while start < idx.len() {
            let mut end = start + 1;
            while end < idx.len() && x[idx[end]] == x[idx[start]] {
                end += 1;
            }
            let avg = (start + end - 1) as f64 / 2.0;
            for &i in &idx[start..end] {
                r[i] = avg;
            }
            start = end;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, _) = mean_var(&ra);
    let (mb, _) = mean_var(&rb);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// Functional process whose KL modes are degree-2 polynomials of three standard
/// normals, plus noise in the mode coefficients. Returns `(s, ξ (N×3), y (m×N))`.
pub fn planted_degree2(
    n: usize,
    noise: f64,
    seed: u64,
) -> (Vec<f64>, nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let m = 48;
    let s: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let xi = nalgebra::DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let phi = |i: usize, t: f64| (2.0f64).sqrt() * ((i as f64 + 0.5) * std::f64::consts::PI * t).sin();
    let mut y = nalgebra::DMatrix::zeros(m, n);
    for j in 0..n {
        let (a, b, c) = (xi[(j, 0)], xi[(j, 1)], xi[(j, 2)]);
        let g = [
            1.2 * a + 0.8 * (a * a - 1.0) + 0.5 * a * b,
            0.7 * b - 0.6 * (b * b - 1.0) + 0.4 * b * c,
            0.5 * c + 0.4 * a * c,
        ];
        let e: Vec<f64> = (0..3).map(|_| noise * rng.sample::<f64, _>(StandardNormal)).collect();
        for k in 0..m {
            y[(k, j)] = 2.0 + (0..3).map(|i| (g[i] + e[i]) * phi(i, s[k])).sum::<f64>();
        }
    }
    (s, xi, y)
}

fn standard_normals(n: usize, d: usize, seed: u64) -> nalgebra::DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    nalgebra::DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Two surrogates over the same germ: one of the planted process and one of a
/// nonlinear transform of it.
pub fn surrogate_pair() -> (bispectral::pce::BispectralSurrogate, bispectral::pce::BispectralSurrogate) {
    use bispectral::output_kle::Truncation;
    use bispectral::pce::{fit_surrogate, FitOptions, SparseRegressionConfig};
    use bispectral::screening::ReducedSet;
    let (s, xi, y) = planted_degree2(200, 0.05, 11);
    let g = y.map(|v| (0.5 * v).sin());
    let opts = FitOptions {
        truncation: Truncation::Fixed(3),
        max_degree: 2,
        regression: SparseRegressionConfig::new(4.0),
    };
    let f = fit_surrogate(&s, &xi, &y, ReducedSet::all(3), &opts).unwrap();
    let g = fit_surrogate(&s, &xi, &g, ReducedSet::all(3), &opts).unwrap();
    (f, g)
}

fn surrogate_mean(s: &bispectral::pce::BispectralSurrogate) -> Vec<f64> {
    (0..s.n_abscissae())
        .map(|k| s.mean[k] + (0..s.n_qoi()).map(|i| s.eigenvalues[i].sqrt() * s.modes[i].coefficients[0] * s.eigenfunctions[(k, i)]).sum::<f64>())
        .collect()
}

/// Largest |analytic − MC| / SE over the probe pairs for the cross-covariance of
/// `f(s_a)` and `g(s_b)` and for the cross-correlation, from `n` joint draws.
pub fn covariance_mc_z(
    f: &bispectral::pce::BispectralSurrogate,
    g: &bispectral::pce::BispectralSurrogate,
    pairs: &[(usize, usize)],
    n: usize,
    seed: u64,
) -> (f64, f64) {
    use bispectral::analysis::{covariance_function, cross_correlation, cross_covariance_function};
    let (mf, mg) = (surrogate_mean(f), surrogate_mean(g));
    let np = pairs.len();
    // centred at the analytic means; correlation SE from the influence function
    // ψ = x̃ỹ − ρ/2 (x̃² + ỹ²) with x̃, ỹ standardized by the analytic deviations
    let sd: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(a, b)| (covariance_function(f, a, a).unwrap().sqrt(), covariance_function(g, b, b).unwrap().sqrt()))
        .collect();
    let rho_exact: Vec<f64> = pairs.iter().map(|&(a, b)| cross_correlation(f, g, a, b).unwrap()).collect();
    let (mut sxy, mut sxy2, mut sx2, mut sy2) = (vec![0.0; np], vec![0.0; np], vec![0.0; np], vec![0.0; np]);
    let (mut psi, mut psi2) = (vec![0.0; np], vec![0.0; np]);
    let chunk = 100_000;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    for c in 0..n.div_ceil(chunk) {
        let rows = chunk.min(n - c * chunk);
        let xi = nalgebra::DMatrix::from_fn(rows, f.n_reduced(), |_, _| {
            rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
        });
        let yf = f.evaluate_many(&xi).unwrap();
        let yg = g.evaluate_many(&xi).unwrap();
        for (p, &(a, b)) in pairs.iter().enumerate() {
            for j in 0..rows {
                let (x, y) = (yf[(a, j)] - mf[a], yg[(b, j)] - mg[b]);
                sxy[p] += x * y;
                sxy2[p] += (x * y).powi(2);
                sx2[p] += x * x;
                sy2[p] += y * y;
                let (xt, yt) = (x / sd[p].0, y / sd[p].1);
                let v = xt * yt - 0.5 * rho_exact[p] * (xt * xt + yt * yt);
                psi[p] += v;
                psi2[p] += v * v;
            }
        }
    }
    let nf = n as f64;
    let (mut z_cov, mut z_rho) = (0.0f64, 0.0f64);
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let cov = sxy[p] / nf;
        let se = ((sxy2[p] / nf - cov * cov) / nf).sqrt();
        let exact = cross_covariance_function(f, g, a, b).unwrap();
        z_cov = z_cov.max((cov - exact).abs() / se);
        let rho = cov / (sx2[p] / nf * sy2[p] / nf).sqrt();
        let m_psi = psi[p] / nf;
        let se_rho = ((psi2[p] / nf - m_psi * m_psi) / nf).sqrt();
        if se_rho > 0.0 {
            z_rho = z_rho.max((rho - rho_exact[p]).abs() / se_rho);
        } else {
            z_rho = z_rho.max(if (rho - rho_exact[p]).abs() < 1e-12 { 0.0 } else { f64::INFINITY });
        }
    }
    (z_cov, z_rho)
}

fn hermite(x: f64, n: u32) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let c = x * b - k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// One randomized planted-process trial: a process with exactly known KLE and
/// PCE coefficients, a truncated and perturbed surrogate of it, and the mean
/// squared L² error measured by tensor Gauss–Hermite quadrature.
/// Returns `(measured, terms, only_kle_tail)`.
pub fn error_bound_trial(seed: u64) -> (f64, bispectral::analysis::ErrorBoundTerms, bool) {
    use bispectral::analysis::error_bound_terms;
    use bispectral::pce::{build_basis, BispectralSurrogate, ModePCE};
    use bispectral::quadrature::{gauss_hermite_prob, trapezoid_weights, uniform_grid};
    use bispectral::screening::ReducedSet;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = 30;
    let s = uniform_grid(0.0, 1.0, m);
    let w = trapezoid_weights(&s);
    let n_modes = 4;
    // weighted-orthonormal Φ by Gram–Schmidt
    let mut phi = DMatrix::from_fn(m, n_modes, |k, i| ((i + 1) as f64 * 2.0 * s[k] + 0.3 * i as f64).cos() + rng.random_range(-0.1..0.1));
    for i in 0..n_modes {
        for j in 0..i {
            let ip: f64 = (0..m).map(|k| w[k] * phi[(k, i)] * phi[(k, j)]).sum();
            for k in 0..m {
                phi[(k, i)] -= ip * phi[(k, j)];
            }
        }
        let nrm: f64 = (0..m).map(|k| w[k] * phi[(k, i)].powi(2)).sum::<f64>().sqrt();
        for k in 0..m {
            phi[(k, i)] /= nrm;
        }
    }
    let lambdas: Vec<f64> = (0..n_modes).map(|i| rng.random_range(0.5..2.0) * 0.4f64.powi(i as i32)).collect();

    let full = build_basis(2, 3).unwrap();
    let p = full.len();
    // uncorrelated unit-variance mode PCEs with zero mean
    let mut g: DMatrix<f64> = DMatrix::from_fn(n_modes, p - 1, |_, _| rng.random_range(-1.0..1.0));
    for i in 0..n_modes {
        for j in 0..i {
            let ip = g.row(i).dot(&g.row(j));
            for k in 0..p - 1 {
                g[(i, k)] -= ip * g[(j, k)];
            }
        }
        let nrm = g.row(i).norm();
        g.row_mut(i).scale_mut(1.0 / nrm);
    }
    let exact: Vec<Vec<f64>> = (0..n_modes)
        .map(|i| std::iter::once(0.0).chain((1..p).map(|k| g[(i, k - 1)] / full.norms_sq[k].sqrt())).collect())
        .collect();

    let n_qoi = rng.random_range(1..=n_modes);
    let degree = rng.random_range(1..=3);
    let basis = build_basis(2, degree).unwrap();
    assert_eq!(basis.indices[..], full.indices[..basis.len()]);
    let perturb = rng.random_bool(0.5);
    let estimated: Vec<Vec<f64>> = (0..n_qoi)
        .map(|i| {
            exact[i][..basis.len()]
                .iter()
                .map(|c| if perturb { c + rng.random_range(-0.05..0.05) } else { *c })
                .collect()
        })
        .collect();
    let mean: Vec<f64> = s.iter().map(|t| 1.0 + t).collect();
    let sur = BispectralSurrogate {
        abscissae: s.clone(),
        mean: mean.clone(),
        weights: w.clone(),
        eigenvalues: lambdas[..n_qoi].to_vec(),
        eigenfunctions: phi.columns(0, n_qoi).into_owned(),
        basis,
        modes: estimated.iter().map(|c| ModePCE { coefficients: c.clone() }).collect(),
        reduced_set: ReducedSet::all(2),
        tau: 0.0,
    };
    let terms = error_bound_terms(&lambdas, n_qoi, &exact, &estimated, &full.norms_sq).unwrap();

    let (x, qw) = gauss_hermite_prob(6);
    let mut measured = 0.0;
    for (a, wa) in x.iter().zip(&qw) {
        for (b, wb) in x.iter().zip(&qw) {
            let psi: Vec<f64> = full.indices.iter().map(|al| hermite(*a, al[0]) * hermite(*b, al[1])).collect();
            let approx = sur.evaluate(&[*a, *b]).unwrap();
            let sq: f64 = (0..m)
                .map(|k| {
                    let truth = mean[k]
                        + (0..n_modes)
                            .map(|i| lambdas[i].sqrt() * exact[i].iter().zip(&psi).map(|(c, v)| c * v).sum::<f64>() * phi[(k, i)])
                            .sum::<f64>();
                    w[k] * (truth - approx[k]).powi(2)
                })
                .sum();
            measured += wa * wb * sq;
        }
    }
    let tail_only = !perturb && degree == 3;
    (measured, terms, tail_only)
}
