//! k-fold cross-validation over `(N_ord, τ)`.
//!
//! Every fold rebuilds the whole surrogate from its training split (output KLE,
//! basis, sparse PCE per mode) and scores full predicted trajectories on the
//! held-out split with the relative L² error. Scores are averaged over folds.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::basis::build_basis;
use super::regression::{sparse_regress_path, SparseRegressionConfig};
use crate::analysis::relative_error;
use crate::error::{Error, Result};
use crate::output_kle::{compute_output_kle, Truncation};
use crate::quadrature::trapezoid_weights;

#[derive(Debug, Clone, PartialEq)]
pub struct CvGrid {
    pub orders: Vec<usize>,
    pub taus: Vec<f64>,
}

impl Default for CvGrid {
    /// `N_ord ∈ {1,2,3,4}`, `τ ∈ {1.0, 1.1, …, 4.0}`.
    fn default() -> Self {
        CvGrid {
            orders: vec![1, 2, 3, 4],
            taus: (10..=40).map(|t| t as f64 / 10.0).collect(),
        }
    }
}

impl CvGrid {
    pub fn single(order: usize, tau: f64) -> Self {
        CvGrid {
            orders: vec![order],
            taus: vec![tau],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty() || self.taus.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub grid: CvGrid,
    pub k_folds: usize,
    pub seed: u64,
    pub truncation: Truncation,
    /// `tau` is overwritten per grid point.
    pub regression: SparseRegressionConfig,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            grid: CvGrid::default(),
            k_folds: 10,
            seed: 0,
            truncation: Truncation::default(),
            regression: SparseRegressionConfig {
                tau: 1.0,
                max_iterations: 5000,
                tolerance: 1e-8,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub n_ord: usize,
    pub tau: f64,
    /// Mean over folds.
    pub e_rel: f64,
    pub fold_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub n_ord: usize,
    pub tau: f64,
    pub table: Vec<CvCell>,
    pub folds: Vec<Vec<usize>>,
}

impl CvReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("# selected n_ord = {} tau = {}\n# n_ord tau e_rel\n", self.n_ord, self.tau);
        for c in &self.table {
            out.push_str(&format!("{} {:.2} {:.8e}\n", c.n_ord, c.tau, c.e_rel));
        }
        out
    }
}

/// Seeded shuffle of `0..n` cut into `k` contiguous blocks whose sizes differ by at most one.
pub fn fold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("need 2 <= k_folds <= {n}, got {k}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Errors of every τ in `taus` for one fold and one polynomial order.
fn fold_scores(
    weights: &[f64],
    xi_r: &DMatrix<f64>,
    evaluations: &DMatrix<f64>,
    train: &[usize],
    valid: &[usize],
    order: usize,
    taus_sorted: &[f64],
    opts: &CvOptions,
) -> Result<Vec<f64>> {
    let y_train = evaluations.select_columns(train);
    let y_valid = evaluations.select_columns(valid);
    let x_train = xi_r.select_rows(train);
    let x_valid = xi_r.select_rows(valid);
    let kle = compute_output_kle(&y_train, weights, opts.truncation)?;
    let basis = build_basis(xi_r.ncols(), order)?;
    let design = basis.design_matrix(&x_train)?;
    let design_valid = basis.design_matrix(&x_valid)?;
    let phi = kle.retained_eigenfunctions();

    // coefficients[t] is N_qoi × P for taus_sorted[t]
    let mut coefficients = vec![DMatrix::zeros(kle.n_qoi, basis.len()); taus_sorted.len()];
    for i in 0..kle.n_qoi {
        let data: Vec<f64> = kle.modes.row(i).iter().copied().collect();
        let fits = sparse_regress_path(&design, &data, taus_sorted, &opts.regression)?;
        for (t, fit) in fits.iter().enumerate() {
            for (k, c) in fit.coefficients.iter().enumerate() {
                coefficients[t][(i, k)] = *c;
            }
        }
    }
    coefficients
        .iter()
        .map(|c| {
            let mut modes = c * design_valid.transpose();
            for i in 0..kle.n_qoi {
                modes.row_mut(i).scale_mut(kle.eigenvalues[i].sqrt());
            }
            let mut pred = &phi * modes;
            for mut col in pred.column_iter_mut() {
                for (v, m) in col.iter_mut().zip(&kle.mean) {
                    *v += m;
                }
            }
            relative_error(&pred, &y_valid, weights)
        })
        .collect()
}

/// Picks the grid point with the smallest fold-averaged relative error.
///
/// `xi_r` is `N × n_p`, `evaluations` is `m × N`.
pub fn kfold_select(
    abscissae: &[f64],
    xi_r: &DMatrix<f64>,
    evaluations: &DMatrix<f64>,
    opts: &CvOptions,
) -> Result<CvReport> {
    if opts.grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if opts.grid.taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::invalid("tau values must be positive"));
    }
    let n = evaluations.ncols();
    if xi_r.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: xi_r.nrows(),
        });
    }
    if abscissae.len() != evaluations.nrows() {
        return Err(Error::DimensionMismatch {
            expected: evaluations.nrows(),
            actual: abscissae.len(),
        });
    }
    let weights = trapezoid_weights(abscissae);
    let folds = fold_partition(n, opts.k_folds, opts.seed)?;

    let mut tau_order: Vec<usize> = (0..opts.grid.taus.len()).collect();
    tau_order.sort_by(|&a, &b| opts.grid.taus[a].total_cmp(&opts.grid.taus[b]));
    let taus_sorted: Vec<f64> = tau_order.iter().map(|&i| opts.grid.taus[i]).collect();

    let tasks: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| opts.grid.orders.iter().map(move |&o| (f, o)))
        .collect();
    let scores: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(f, order)| {
            let valid = &folds[f];
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            fold_scores(&weights, xi_r, evaluations, &train, valid, order, &taus_sorted, opts)
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::new();
    for &order in &opts.grid.orders {
        for (g, &tau) in opts.grid.taus.iter().enumerate() {
            let sorted_pos = tau_order.iter().position(|&i| i == g).expect("permutation");
            let fold_errors: Vec<f64> = tasks
                .iter()
                .zip(&scores)
                .filter(|((_, o), _)| *o == order)
                .map(|(_, s)| s[sorted_pos])
                .collect();
            let e_rel = fold_errors.iter().sum::<f64>() / fold_errors.len() as f64;
            table.push(CvCell {
                n_ord: order,
                tau,
                e_rel,
                fold_errors,
            });
        }
    }
    let best = table
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.e_rel.total_cmp(&b.e_rel).then(ia.cmp(ib)))
        .map(|(_, c)| c)
        .expect("nonempty grid");
    Ok(CvReport {
        n_ord: best.n_ord,
        tau: best.tau,
        table: table.clone(),
        folds,
    })
}
