//! Total Sobol' indices by Jansen's pick–freeze estimator.
//!
//! For each parameter `j`, with independent sample matrices `A`, `B` and `A_B^j`
//! equal to `A` with column `j` taken from `B`,
//! `T_j ≈ (1/2N) Σ (f(A) − f(A_B^j))² / Var f`. Functional outputs aggregate the
//! numerator and the variance over the abscissae with the quadrature weights.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pce::BispectralSurrogate;

pub const MIN_SOBOL_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SobolReport {
    pub total_indices: Vec<f64>,
    /// Delta-method standard errors of the ratio estimator.
    pub standard_errors: Vec<f64>,
    pub n_samples: usize,
    pub estimator: &'static str,
}

impl SobolReport {
    /// Columns `j T_j se_j`, one-based `j` over the coordinates passed in.
    pub fn to_text(&self, labels: &[usize]) -> String {
        let mut out = format!("# estimator {} N = {}\n# j T se\n", self.estimator, self.n_samples);
        for (i, (t, se)) in self.total_indices.iter().zip(&self.standard_errors).enumerate() {
            let j = labels.get(i).copied().unwrap_or(i);
            out.push_str(&format!("{} {:.8e} {:.3e}\n", j + 1, t, se));
        }
        out
    }
}

fn gaussian_matrix(n: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

/// `eval` maps an `N × d` sample matrix to `N × n_out` outputs; numerator and
/// variance are summed over the `n_out` columns.
fn jansen<F>(eval: F, n: usize, d: usize, seed: u64) -> Result<SobolReport>
where
    F: Fn(&DMatrix<f64>) -> Result<DMatrix<f64>>,
{
    if n < MIN_SOBOL_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_SOBOL_SAMPLES} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_matrix(n, d, &mut rng);
    let b = gaussian_matrix(n, d, &mut rng);
    let fa = eval(&a)?;
    let fb = eval(&b)?;
    // variance per abscissa from both base samples, then aggregated
    let n_out = fa.ncols();
    let mut var_terms = vec![0.0; n];
    let mut total_var = 0.0;
    for k in 0..n_out {
        let mean = (fa.column(k).sum() + fb.column(k).sum()) / (2 * n) as f64;
        for i in 0..n {
            let t = 0.5 * ((fa[(i, k)] - mean).powi(2) + (fb[(i, k)] - mean).powi(2));
            var_terms[i] += t;
            total_var += t;
        }
    }
    total_var /= n as f64;
    if !(total_var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut indices = Vec::with_capacity(d);
    let mut errors = Vec::with_capacity(d);
    for j in 0..d {
        let mut abj = a.clone();
        abj.set_column(j, &b.column(j));
        let fab = eval(&abj)?;
        let num_terms: Vec<f64> = (0..n)
            .map(|i| 0.5 * (0..n_out).map(|k| (fa[(i, k)] - fab[(i, k)]).powi(2)).sum::<f64>())
            .collect();
        let num = num_terms.iter().sum::<f64>() / n as f64;
        let t = num / total_var;
        let resid: Vec<f64> = num_terms.iter().zip(&var_terms).map(|(a, v)| a - t * v).collect();
        let mr = resid.iter().sum::<f64>() / n as f64;
        let vr = resid.iter().map(|r| (r - mr).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        indices.push(t);
        errors.push((vr / n as f64).sqrt() / total_var);
    }
    Ok(SobolReport {
        total_indices: indices,
        standard_errors: errors,
        n_samples: n,
        estimator: "jansen",
    })
}

/// Total indices of a scalar function of `d` independent standard normals.
pub fn total_sobol_scalar<F>(f: F, d: usize, n: usize, seed: u64) -> Result<SobolReport>
where
    F: Fn(&[f64]) -> f64,
{
    jansen(
        |x| {
            let v: Vec<f64> = x.row_iter().map(|r| f(&r.iter().copied().collect::<Vec<_>>())).collect();
            Ok(DMatrix::from_column_slice(v.len(), 1, &v))
        },
        n,
        d,
        seed,
    )
}

/// Functional total indices of a surrogate over its reduced coordinates,
/// variance-weighted across the output grid.
pub fn total_sobol_functional(s: &BispectralSurrogate, n: usize, seed: u64) -> Result<SobolReport> {
    let sqrt_w: Vec<f64> = s.weights.iter().map(|w| w.sqrt()).collect();
    jansen(
        |x| {
            let y = s.evaluate_many(x)?;
            // rows = samples, columns = weighted abscissae
            Ok(DMatrix::from_fn(y.ncols(), y.nrows(), |i, k| sqrt_w[k] * y[(k, i)]))
        },
        n,
        s.n_reduced(),
        seed,
    )
}
