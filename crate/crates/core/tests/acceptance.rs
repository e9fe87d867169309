//! End-to-end acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use bispectral::analysis::{correlation_function, total_sobol_functional, total_sobol_scalar};
use bispectral::flow::{simulate, FlowConfig, QoiLabel};
use bispectral::output_kle::{compute_output_kle, Truncation};
use bispectral::pce::{
    build_basis, kfold_select, sparse_regress, sparse_regress_path, BispectralSurrogate, CvOptions,
    SparseRegressionConfig,
};
use bispectral::pipeline::{
    assign_split, build_surrogate, new_store, run_ensemble, screen_qoi, surrogate_error, EnsembleStore,
    PipelineConfig, Profile,
};
use bispectral::quadrature::{trapezoid_weights, uniform_grid};
use bispectral::random_input::{build_input_kle, ExponentialKernel, MaterialFields};
use bispectral::screening::{screen, ScreeningReport};

type Outcome = (bool, String);

fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

fn l1(c: &[f64]) -> f64 {
    c.iter().map(|v| v.abs()).sum()
}

fn kernel_matrix(k: &ExponentialKernel, x: &[f64]) -> Vec<Vec<f64>> {
    x.iter().map(|&a| x.iter().map(|&b| k.eval(a, b)).collect()).collect()
}

fn worst_rel(got: &[f64], oracle: &[f64], floor: f64) -> f64 {
    got.iter()
        .zip(oracle)
        .filter(|(_, b)| **b > floor * oracle[0])
        .map(|(a, b)| (a - b).abs() / b)
        .fold(0.0, f64::max)
}

/// The desk ensemble, screened and fitted once and shared by several criteria.
struct Desk {
    store: EnsembleStore,
    simulate_seconds: f64,
    saturation: ScreeningReport,
    flux: ScreeningReport,
    s_sur: BispectralSurrogate,
    s_build: f64,
    q_sur: BispectralSurrogate,
    q_build: f64,
}

fn desk() -> Desk {
    let cfg = PipelineConfig::for_profile(Profile::Desk);
    let t = Instant::now();
    let mut store = new_store(&cfg).unwrap();
    run_ensemble(&mut store, &cfg).unwrap();
    assign_split(&mut store, &cfg).unwrap();
    let simulate_seconds = t.elapsed().as_secs_f64();
    let s = QoiLabel::InflowGasSaturation;
    let q = QoiLabel::OutflowGasFlux;
    let saturation = screen_qoi(&store, s, s.default_screening_tol()).unwrap();
    let flux = screen_qoi(&store, q, q.default_screening_tol()).unwrap();
    let t = Instant::now();
    let (s_sur, _) = build_surrogate(&store, s, &saturation.reduced_set, &cfg).unwrap();
    let s_build = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let (q_sur, _) = build_surrogate(&store, q, &flux.reduced_set, &cfg).unwrap();
    let q_build = t.elapsed().as_secs_f64();
    Desk {
        store,
        simulate_seconds,
        saturation,
        flux,
        s_sur,
        s_build,
        q_sur,
        q_build,
    }
}

fn c1_input_variance() -> Outcome {
    let t = Instant::now();
    let k = ExponentialKernel::new(10.0, 200.0).unwrap();
    let (x, w) = k.trapezoid_rule(401);
    let kle = build_input_kle(&k, &x, &w, 100).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let frac = kle.captured_variance_fraction;
    (frac > 0.96 && secs < 5.0, format!("captured {frac:.4} with N_p = 100 on 401 nodes in {secs:.2} s"))
}

fn c2_nystrom_oracle() -> Outcome {
    let mut worst_in: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (n, ell) in [(12usize, 0.7), (30, 4.0), (55, 20.0), (80, 10.0)] {
        let mut x = vec![0.0];
        for _ in 1..n {
            x.push(x.last().unwrap() + rng.random_range(0.3..2.5));
        }
        let k = ExponentialKernel::new(ell, *x.last().unwrap()).unwrap();
        let w = trapezoid_weights(&x);
        let kle = build_input_kle(&k, &x, &w, n / 2).unwrap();
        let oracle = common::jacobi_eigenvalues(common::weighted(&kernel_matrix(&k, &x), &w));
        worst_in = worst_in.max(worst_rel(&kle.eigenvalues, &oracle[..n / 2], 1e-4));
    }
    let mut worst_out: f64 = 0.0;
    for (m, n, seed) in [(20usize, 15usize, 3u64), (40, 60, 4), (33, 8, 5)] {
        let s = uniform_grid(0.0, 2.0, m);
        let w = trapezoid_weights(&s);
        let xi = gaussian(n, 4, seed);
        let y = DMatrix::from_fn(m, n, |k, j| {
            (0..4).map(|i| xi[(j, i)] * ((i + 1) as f64 * s[k]).sin() / (i + 1) as f64).sum::<f64>() + s[k]
        });
        let kle = compute_output_kle(&y, &w, Truncation::Fixed(m)).unwrap();
        let mean: Vec<f64> = (0..m).map(|k| y.row(k).sum() / n as f64).collect();
        let cov: Vec<Vec<f64>> = (0..m)
            .map(|a| {
                (0..m)
                    .map(|b| (0..n).map(|j| (y[(a, j)] - mean[a]) * (y[(b, j)] - mean[b])).sum::<f64>() / (n as f64 - 1.0))
                    .collect()
            })
            .collect();
        let oracle = common::jacobi_eigenvalues(common::weighted(&cov, &w));
        worst_out = worst_out.max(worst_rel(&kle.eigenvalues, &oracle, 1e-8));
    }
    (
        worst_in < 1e-10 && worst_out < 1e-10,
        format!("worst relative eigenvalue error: input {worst_in:.1e}, output {worst_out:.1e}"),
    )
}

fn c3_flow_phenomenology() -> Outcome {
    let cfg = FlowConfig {
        n_cells: 50,
        ..FlowConfig::default()
    };
    let fields = MaterialFields::homogeneous(50, cfg.phi_bar, cfg.k_bar);
    let t = Instant::now();
    let out = simulate(fields, cfg.clone()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let Some(t_app) = out.gas_appearance_time() else {
        return (false, "no gas appeared".into());
    };
    let h = &out.history;
    let zero_before = (0..h.time.len()).filter(|&k| h.time[k] < t_app).all(|k| h.inflow_gas_saturation[k] == 0.0);
    let t_inj = cfg.boundary.t_inj;
    let decreasing = (1..h.time.len())
        .filter(|&k| h.time[k - 1] >= t_inj)
        .all(|k| h.inflow_gas_saturation[k] <= h.inflow_gas_saturation[k - 1] + 1e-12);
    let mass = out.diagnostics.mass_audit.relative_error;
    let ok = (6e3..=2.6e4).contains(&t_app) && zero_before && decreasing && mass < 1e-4 && secs < 60.0;
    (
        ok,
        format!(
            "appearance {t_app:.0} yr, zero before {zero_before}, decreasing after injection {decreasing}, mass balance {mass:.1e}, {secs:.2} s"
        ),
    )
}

fn c4_screening(d: &Desk) -> Outcome {
    let s = uniform_grid(0.0, 1.0, 101);
    let xi = gaussian(60, 6, 1);
    let y = DMatrix::from_fn(101, 60, |k, j| s[k] * (2.0 * xi[(j, 0)] + xi[(j, 1)]));
    let rep = screen(&xi, &y, &trapezoid_weights(&s), 0.01).unwrap();
    let expect = [0.8, 0.2, 0.0, 0.0, 0.0, 0.0];
    let analytic = rep.indices.iter().zip(&expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let idx = &d.saturation.indices;
    let sum_err = (idx.iter().sum::<f64>() - 1.0).abs();
    let lead: f64 = idx[..10].iter().sum();
    let top = (0..idx.len()).max_by(|&a, &b| idx[a].total_cmp(&idx[b])).unwrap();
    let kr = &d.saturation.reduced_set.indices;
    let first_three = (0..3).all(|j| kr.contains(&j));
    let flux_sum_err = (d.flux.indices.iter().sum::<f64>() - 1.0).abs();
    let ok = analytic < 1e-6 && sum_err < 1e-12 && flux_sum_err < 1e-12 && lead > 0.5 && top < 5 && first_three;
    (
        ok,
        format!(
            "analytic max dev {analytic:.1e}; desk: |K_r| = {}, sum - 1 = {sum_err:.1e}, first ten carry {lead:.3}, top coordinate {}",
            kr.len(),
            top + 1
        ),
    )
}

fn c5_low_rank(d: &Desk) -> Outcome {
    let train = &d.store.split.as_ref().unwrap().train;
    let data = d.store.qoi_data(QoiLabel::InflowGasSaturation, train).unwrap();
    let kle = compute_output_kle(&data.values, &trapezoid_weights(&data.abscissae), Truncation::default()).unwrap();
    let r5 = kle.rank_fractions[4];
    (r5 > 0.95, format!("r_5 = {r5:.5} on {} training trajectories", train.len()))
}

fn c6_sparse_regression() -> Outcome {
    let mut recovery = 0.0f64;
    let mut support_ok = true;
    for seed in 0..5u64 {
        let basis = build_basis(5, 3).unwrap();
        let p = basis.len();
        let n = (4.0 * 3.0 * (p as f64).ln()).ceil() as usize;
        let design = basis.design_matrix(&gaussian(n, 5, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut truth = vec![0.0; p];
        let mut placed = 0;
        while placed < 3 {
            let k = rng.random_range(0..p);
            if truth[k] == 0.0 {
                truth[k] = if rng.random::<bool>() { 1.0 } else { -1.0 } * rng.random_range(0.5..1.5);
                placed += 1;
            }
        }
        let d: Vec<f64> = (&design * DVector::from_column_slice(&truth)).iter().copied().collect();
        let c = sparse_regress(&design, &d, &SparseRegressionConfig::new(l1(&truth))).unwrap();
        for k in 0..p {
            recovery = recovery.max((c[k] - truth[k]).abs());
            support_ok &= (c[k].abs() > 1e-6) == (truth[k] != 0.0);
        }
    }

    let mut feasible = true;
    let mut monotone = true;
    let mut calls = 0;
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = rng.random_range(5..60);
        let p = rng.random_range(2..120);
        let a = gaussian(n, p, seed);
        let d: Vec<f64> = gaussian(n, 1, 900 + seed).iter().copied().collect();
        let dn: f64 = d.iter().map(|v| v * v).sum();
        let mut taus: Vec<f64> = (0..8).map(|_| rng.random_range(0.01..6.0)).collect();
        taus.sort_by(f64::total_cmp);
        let fits = sparse_regress_path(&a, &d, &taus, &SparseRegressionConfig::new(1.0)).unwrap();
        for (f, &tau) in fits.iter().zip(&taus) {
            feasible &= l1(&f.coefficients) <= tau * (1.0 + 1e-8);
            calls += 1;
        }
        monotone &= fits.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-10 * dn);
        for &tau in &taus[..2] {
            let c = sparse_regress(&a, &d, &SparseRegressionConfig::new(tau)).unwrap();
            feasible &= l1(&c) <= tau * (1.0 + 1e-8);
            calls += 1;
        }
    }
    let ok = recovery < 1e-4 && support_ok && feasible && monotone;
    (
        ok,
        format!(
            "planted max coefficient error {recovery:.1e}, support exact {support_ok}; feasible on {calls} calls {feasible}; monotone {monotone}"
        ),
    )
}

fn c7_cv_selection() -> Outcome {
    let mut hits = 0;
    let mut picks = Vec::new();
    for seed in 0..10u64 {
        let (s, xi, y) = common::planted_degree2(150, 0.3, seed);
        let rep = kfold_select(&s, &xi, &y, &CvOptions { seed, ..CvOptions::default() }).unwrap();
        hits += usize::from(rep.n_ord == 2);
        picks.push(rep.n_ord);
    }
    (hits >= 9, format!("N_ord = 2 in {hits}/10 seeds (picks {picks:?})"))
}

fn c8_surrogate_accuracy(d: &Desk) -> Outcome {
    let valid = &d.store.split.as_ref().unwrap().validate;
    let e_s = surrogate_error(&d.store, QoiLabel::InflowGasSaturation, &d.s_sur, valid).unwrap();
    let e_q = surrogate_error(&d.store, QoiLabel::OutflowGasFlux, &d.q_sur, valid).unwrap();
    let ok = e_s < 0.10 && e_q < 0.05 && d.s_build < 300.0 && d.q_build < 300.0;
    (
        ok,
        format!(
            "held-out e_rel: saturation {e_s:.4} (N_ord {}, tau {}), flux {e_q:.4} (N_ord {}, tau {}); builds {:.1} s and {:.1} s",
            d.s_sur.basis.max_degree, d.s_sur.tau, d.q_sur.basis.max_degree, d.q_sur.tau, d.s_build, d.q_build
        ),
    )
}

fn c9_covariance_algebra() -> Outcome {
    let (f, g) = common::surrogate_pair();
    let pairs = [(3, 3), (5, 20), (12, 40), (30, 31), (47, 10)];
    let (zc, zr) = common::covariance_mc_z(&f, &f, &pairs, 1_000_000, 91);
    let (xc, xr) = common::covariance_mc_z(&f, &g, &pairs, 1_000_000, 92);
    let unit = (1..f.n_abscissae())
        .map(|k| (correlation_function(&f, k, k).unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    let z = zc.max(zr).max(xc).max(xr);
    (z < 3.0 && unit < 1e-12, format!("max z over 5 pairs: auto {:.2}, cross {:.2}; max |rho(s,s) - 1| {unit:.1e}", zc.max(zr), xc.max(xr)))
}

fn c10_error_bound() -> Outcome {
    let mut held = 0;
    let mut tail_checks = 0;
    let mut tail_ok = true;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (measured, terms, tail_only) = common::error_bound_trial(1000 + seed);
        let total = terms.total();
        if measured <= 1.05 * total + 1e-14 {
            held += 1;
        }
        if total > 0.0 {
            worst = worst.max(measured / total);
        }
        if tail_only && terms.kle_tail > 0.0 {
            tail_checks += 1;
            tail_ok &= (measured - terms.kle_tail).abs() < 0.01 * terms.kle_tail;
        }
    }
    (
        held == 100 && tail_ok && tail_checks > 0,
        format!("bound held in {held}/100 trials (max measured/bound {worst:.3}); tail-only equality in {tail_checks} trials {tail_ok}"),
    )
}

fn c11_sobol(d: &Desk) -> Outcome {
    let a = [2.0, 1.0, 0.5, 0.0];
    let var: f64 = a.iter().map(|x| x * x).sum();
    let rep = total_sobol_scalar(|x| (0..4).map(|j| a[j] * x[j]).sum(), 4, 50_000, 11).unwrap();
    let z = (0..4)
        .filter(|&j| a[j] != 0.0)
        .map(|j| (rep.total_indices[j] - a[j] * a[j] / var).abs() / rep.standard_errors[j])
        .fold(0.0, f64::max);
    let zero_ok = rep.total_indices[3].abs() < 1e-12;

    let fun = total_sobol_functional(&d.s_sur, 10_000, 12).unwrap();
    let screening: Vec<f64> = d.s_sur.reduced_set.indices.iter().map(|&j| d.saturation.indices[j]).collect();
    let rho = common::spearman(&fun.total_indices, &screening);
    (
        z < 3.0 && zero_ok && rho > 0.6,
        format!("additive model max z {z:.2}, inert index exact {zero_ok}; functional vs screening Spearman {rho:.3} over {} coordinates", screening.len()),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        println!("criterion {id:>2} {} {name}: {}", if outcome.0 { "PASS" } else { "FAIL" }, outcome.1);
        results.push((id, name, outcome));
    };

    run(1, "input KLE variance capture", &mut c1_input_variance);
    run(2, "Nystrom oracle equivalence", &mut c2_nystrom_oracle);
    run(3, "flow benchmark phenomenology", &mut c3_flow_phenomenology);
    let desk = catch_unwind(desk).ok();
    if let Some(d) = &desk {
        println!("desk ensemble: {} samples solved in {:.1} s", d.store.n_samples(), d.simulate_seconds);
    }
    let missing = || (false, "desk ensemble could not be built".to_string());
    run(4, "screening correctness", &mut || desk.as_ref().map_or_else(missing, c4_screening));
    run(5, "output low-rankness", &mut || desk.as_ref().map_or_else(missing, c5_low_rank));
    run(6, "sparse regression", &mut c6_sparse_regression);
    run(7, "CV selection", &mut c7_cv_selection);
    run(8, "surrogate accuracy", &mut || desk.as_ref().map_or_else(missing, c8_surrogate_accuracy));
    run(9, "covariance algebra", &mut c9_covariance_algebra);
    run(10, "error bound", &mut c10_error_bound);
    run(11, "Sobol sanity", &mut || desk.as_ref().map_or_else(missing, c11_sobol));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2 .0).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
