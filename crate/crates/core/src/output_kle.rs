//! Sample-based Nyström KLE of a function-valued output ensemble.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::random_input::sorted_symmetric_eigen;

/// Modes with `λ_i < MIN_RELATIVE_EIGENVALUE · λ_1` are never retained.
pub const MIN_RELATIVE_EIGENVALUE: f64 = 1e-14;

pub const DEFAULT_VARIANCE_TOL: f64 = 0.99;

/// How many KL modes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Smallest `k` with `r_k > tol`.
    VarianceFraction(f64),
    /// Exactly this many modes (capped by the numerically nonzero spectrum).
    Fixed(usize),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::VarianceFraction(DEFAULT_VARIANCE_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputKLE {
    /// `f̄(s_k)`.
    pub mean: Vec<f64>,
    pub weights: Vec<f64>,
    /// All `m` eigenvalues, descending and nonnegative.
    pub eigenvalues: Vec<f64>,
    /// `m × m`; column `i` holds `Φ_i(s_k)`.
    pub eigenfunctions: DMatrix<f64>,
    pub n_qoi: usize,
    /// `N_qoi × N_s`; entry `(i, j)` is `f_i(ξ_j)`.
    pub modes: DMatrix<f64>,
    /// `r_k` for `k = 1..=m` (empty when the ensemble has no variance).
    pub rank_fractions: Vec<f64>,
}

impl OutputKLE {
    pub fn n_abscissae(&self) -> usize {
        self.mean.len()
    }

    pub fn n_samples(&self) -> usize {
        self.modes.ncols()
    }

    /// Retained eigenvalues `λ_1..λ_{N_qoi}`.
    pub fn retained_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.n_qoi]
    }

    /// `m × N_qoi` block of retained eigenfunctions.
    pub fn retained_eigenfunctions(&self) -> DMatrix<f64> {
        self.eigenfunctions.columns(0, self.n_qoi).into_owned()
    }

    /// KL modes `f_i` of an arbitrary trajectory on the same abscissae.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let m = self.n_abscissae();
        if y.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: y.len(),
            });
        }
        Ok((0..self.n_qoi)
            .map(|i| {
                let s: f64 = (0..m)
                    .map(|k| self.weights[k] * (y[k] - self.mean[k]) * self.eigenfunctions[(k, i)])
                    .sum();
                s / self.eigenvalues[i].sqrt()
            })
            .collect())
    }

    /// `f̄ + Σ_i √λ_i a_i Φ_i` for given mode values `a`.
    pub fn synthesize(&self, modes: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (i, a) in modes.iter().enumerate().take(self.n_qoi) {
            let scale = self.eigenvalues[i].sqrt() * a;
            for (k, o) in out.iter_mut().enumerate() {
                *o += scale * self.eigenfunctions[(k, i)];
            }
        }
        out
    }

    /// Columns `k λ_k r_k`.
    pub fn spectrum_text(&self) -> String {
        let mut out = String::from("# k lambda r_k\n");
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let r = self.rank_fractions.get(k).copied().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{} {:.10e} {:.10e}", k + 1, l, r);
        }
        out
    }
}

/// `r_k = Σ_{i≤k} λ_i / Σ_i λ_i`.
pub fn rank_fraction(eigenvalues: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > eigenvalues.len() {
        return Err(Error::invalid(format!("k must lie in 1..={}", eigenvalues.len())));
    }
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(eigenvalues[..k].iter().sum::<f64>() / total)
}

/// Ensemble KLE of `evaluations` (`m × N_s`, one trajectory per column).
pub fn compute_output_kle(
    evaluations: &DMatrix<f64>,
    weights: &[f64],
    truncation: Truncation,
) -> Result<OutputKLE> {
    let (m, n_s) = evaluations.shape();
    if n_s < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if weights.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::invalid("weights must be positive"));
    }
    match truncation {
        Truncation::VarianceFraction(t) if !(t > 0.0 && t < 1.0) => {
            return Err(Error::invalid(format!("tol must lie in (0,1), got {t}")))
        }
        _ => {}
    }
    if evaluations.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite evaluation"));
    }
    if evaluations.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateEnsemble);
    }

    let mean: Vec<f64> = (0..m).map(|k| evaluations.row(k).sum() / n_s as f64).collect();
    let centered = DMatrix::from_fn(m, n_s, |k, j| evaluations[(k, j)] - mean[k]);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let scaled = DMatrix::from_fn(m, n_s, |k, j| sqrt_w[k] * centered[(k, j)]);
    let mut cov = &scaled * scaled.transpose() / (n_s as f64 - 1.0);
    cov = (&cov + cov.transpose()) * 0.5;
    let (mut values, vectors) = sorted_symmetric_eigen(cov)?;
    let scale = values.first().copied().unwrap_or(0.0).abs();
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-10 * scale {
                return Err(Error::EigenSolve(format!("negative covariance eigenvalue {v:.3e}")));
            }
            *v = 0.0;
        }
    }
    let eigenfunctions = DMatrix::from_fn(m, m, |k, i| vectors[(k, i)] / sqrt_w[k]);

    let lambda1 = values[0];
    let significant = if lambda1 > 0.0 {
        values
            .iter()
            .take_while(|&&l| l >= MIN_RELATIVE_EIGENVALUE * lambda1)
            .count()
    } else {
        0
    };
    let total: f64 = values.iter().sum();
    let rank_fractions: Vec<f64> = if total > 0.0 {
        let mut acc = 0.0;
        let mut r: Vec<f64> = values
            .iter()
            .map(|l| {
                acc += l;
                acc / total
            })
            .collect();
        *r.last_mut().expect("m >= 1") = 1.0;
        r
    } else {
        Vec::new()
    };
    let n_qoi = match truncation {
        Truncation::Fixed(n) => n.min(significant),
        Truncation::VarianceFraction(tol) => rank_fractions
            .iter()
            .position(|&r| r > tol)
            .map(|p| p + 1)
            .unwrap_or(m)
            .min(significant),
    };

    let mut modes = DMatrix::zeros(n_qoi, n_s);
    for i in 0..n_qoi {
        let inv = 1.0 / values[i].sqrt();
        for j in 0..n_s {
            let s: f64 = (0..m)
                .map(|k| weights[k] * centered[(k, j)] * eigenfunctions[(k, i)])
                .sum();
            modes[(i, j)] = s * inv;
        }
    }

    Ok(OutputKLE {
        mean,
        weights: weights.to_vec(),
        eigenvalues: values,
        eigenfunctions,
        n_qoi,
        modes,
        rank_fractions,
    })
}

/// Truncated-KLE reconstruction of sample `j`.
pub fn reconstruct(kle: &OutputKLE, j: usize) -> Result<Vec<f64>> {
    if j >= kle.n_samples() {
        return Err(Error::invalid(format!("sample index {j} out of range")));
    }
    let a: Vec<f64> = kle.modes.column(j).iter().copied().collect();
    Ok(kle.synthesize(&a))
}
