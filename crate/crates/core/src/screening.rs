//! Gradient-free parameter screening from a global linear fit of a
//! function-valued output.
//!
//! For each output abscissa `s_k` the model `y(s_k, ξ) ≈ b_0(s_k) + Σ_j b_j(s_k) ξ_j`
//! is fitted by least squares. The approximate functional DGSM of parameter `j`
//! is `Ñ_j = ∫ b_j(s)² ds`, and the screening indices are the `Ñ_j` normalized to
//! sum to one.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smallest admissible `min |R_ii| / max |R_ii|` of the design matrix.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLinearModel {
    /// `b_0(s_k)`, one per abscissa.
    pub intercepts: Vec<f64>,
    /// `m × N_p`; row `k` holds `b(s_k)`.
    pub slopes: DMatrix<f64>,
    /// Coefficient of determination per abscissa (1 where the output is constant).
    pub r_squared: Vec<f64>,
    /// Set when `N_s ≤ N_p + 1` and the minimum-norm solution was used.
    pub underdetermined: bool,
}

impl GlobalLinearModel {
    pub fn n_params(&self) -> usize {
        self.slopes.ncols()
    }

    pub fn n_abscissae(&self) -> usize {
        self.slopes.nrows()
    }

    /// Rank-one gradient outer product `G(s_k) = b bᵀ` summarized as `(λ, u)`
    /// with `λ = ‖b‖²` and `u = b/‖b‖`.
    pub fn activity_direction(&self, k: usize) -> (f64, Vec<f64>) {
        let b: Vec<f64> = self.slopes.row(k).iter().copied().collect();
        let lam: f64 = b.iter().map(|v| v * v).sum();
        let norm = lam.sqrt();
        let u = if norm > 0.0 {
            b.iter().map(|v| v / norm).collect()
        } else {
            vec![0.0; b.len()]
        };
        (lam, u)
    }
}

/// Least-squares fit with one QR factorization of `A = [1 | ξ]` shared by all abscissae.
///
/// `samples` is `N_s × N_p`, `evaluations` is `m × N_s`.
pub fn fit_global_linear_model(
    samples: &DMatrix<f64>,
    evaluations: &DMatrix<f64>,
) -> Result<GlobalLinearModel> {
    let (n_s, n_p) = samples.shape();
    if evaluations.ncols() != n_s {
        return Err(Error::DimensionMismatch {
            expected: n_s,
            actual: evaluations.ncols(),
        });
    }
    if n_s == 0 || n_p == 0 || evaluations.nrows() == 0 {
        return Err(Error::invalid("empty sample or evaluation matrix"));
    }
    if samples.iter().chain(evaluations.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample or evaluation"));
    }
    let design = DMatrix::from_fn(n_s, n_p + 1, |r, c| if c == 0 { 1.0 } else { samples[(r, c - 1)] });
    let rhs = evaluations.transpose();

    let underdetermined = n_s <= n_p + 1;
    let coef = if underdetermined {
        let svd = design.clone().svd(true, true);
        svd.solve(&rhs, 1e-12 * svd.singular_values.max())
            .map_err(|e| Error::EigenSolve(e.to_string()))?
    } else {
        let qr = design.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = r.diagonal().iter().map(|v| v.abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if ratio < RANK_TOL {
            return Err(Error::RankDeficient { ratio });
        }
        let mut qty = rhs.clone();
        qr.q_tr_mul(&mut qty);
        let qty = qty.rows(0, n_p + 1).into_owned();
        r.solve_upper_triangular(&qty)
            .ok_or(Error::RankDeficient { ratio })?
    };

    let m = evaluations.nrows();
    let fitted = &design * &coef;
    let r_squared = (0..m)
        .map(|k| {
            let y = rhs.column(k);
            let mean = y.mean();
            let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
            let ss_res: f64 = y.iter().zip(fitted.column(k).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if ss_tot > 0.0 {
                1.0 - ss_res / ss_tot
            } else {
                1.0
            }
        })
        .collect();
    let coef_t = coef.transpose();
    Ok(GlobalLinearModel {
        intercepts: coef_t.column(0).iter().copied().collect(),
        slopes: coef_t.columns(1, n_p).into_owned(),
        r_squared,
        underdetermined,
    })
}

/// `Ñ_j = Σ_k w_k b_j(s_k)²`.
pub fn approx_functional_dgsm(model: &GlobalLinearModel, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != model.n_abscissae() {
        return Err(Error::DimensionMismatch {
            expected: model.n_abscissae(),
            actual: weights.len(),
        });
    }
    Ok((0..model.n_params())
        .map(|j| {
            model
                .slopes
                .column(j)
                .iter()
                .zip(weights)
                .map(|(b, w)| w * b * b)
                .sum()
        })
        .collect())
}

/// `𝔰_j = Ñ_j / Σ_l Ñ_l`.
pub fn screening_indices(dgsm: &[f64]) -> Result<Vec<f64>> {
    if dgsm.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid("DGSM values must be finite and nonnegative"));
    }
    let total: f64 = dgsm.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroSensitivity);
    }
    Ok(dgsm.iter().map(|v| v / total).collect())
}

/// Ordered subset of parameter coordinates retained after screening.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedSet {
    /// Zero-based, ascending.
    pub indices: Vec<usize>,
    pub n_full: usize,
}

impl ReducedSet {
    pub fn all(n: usize) -> Self {
        ReducedSet {
            indices: (0..n).collect(),
            n_full: n,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sorted union of two sets over the same full dimension.
    pub fn union(&self, other: &ReducedSet) -> Result<ReducedSet> {
        if self.n_full != other.n_full {
            return Err(Error::DimensionMismatch {
                expected: self.n_full,
                actual: other.n_full,
            });
        }
        let mut indices: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        indices.sort_unstable();
        indices.dedup();
        Ok(ReducedSet {
            indices,
            n_full: self.n_full,
        })
    }

    /// Extracts `ξ^r` from a full parameter vector.
    pub fn project(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.n_full {
            return Err(Error::DimensionMismatch {
                expected: self.n_full,
                actual: xi.len(),
            });
        }
        Ok(self.indices.iter().map(|&j| xi[j]).collect())
    }

    /// Row-wise projection of an `N × N_p` sample matrix.
    pub fn project_rows(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if samples.ncols() != self.n_full {
            return Err(Error::DimensionMismatch {
                expected: self.n_full,
                actual: samples.ncols(),
            });
        }
        Ok(samples.select_columns(&self.indices))
    }
}

/// `K_r = { j : 𝔰_j > tol }`.
pub fn reduce_parameters(indices: &[f64], tol: f64) -> Result<ReducedSet> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("tol must lie in (0,1), got {tol}")));
    }
    let kept: Vec<usize> = indices
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(j, _)| j)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyReduction { tol });
    }
    Ok(ReducedSet {
        indices: kept,
        n_full: indices.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningReport {
    pub dgsm_approx: Vec<f64>,
    pub indices: Vec<f64>,
    pub reduced_set: ReducedSet,
    pub tol: f64,
    pub r_squared: Vec<f64>,
    pub underdetermined: bool,
}

impl ScreeningReport {
    /// Columns `j Ñ_j 𝔰_j selected`, one-based `j`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tol = {}", self.tol);
        if self.underdetermined {
            let _ = writeln!(out, "# underdetermined fit: minimum-norm solution");
        }
        let _ = writeln!(out, "# j dgsm index selected");
        for (j, (n, s)) in self.dgsm_approx.iter().zip(&self.indices).enumerate() {
            let sel = self.reduced_set.indices.contains(&j);
            let _ = writeln!(out, "{} {:.10e} {:.10e} {}", j + 1, n, s, u8::from(sel));
        }
        out
    }
}

/// Full screening pass: fit, DGSMs, indices and reduction.
pub fn screen(
    samples: &DMatrix<f64>,
    evaluations: &DMatrix<f64>,
    weights: &[f64],
    tol: f64,
) -> Result<ScreeningReport> {
    let model = fit_global_linear_model(samples, evaluations)?;
    let dgsm = approx_functional_dgsm(&model, weights)?;
    // slopes at round-off level of the output magnitude carry no information
    let n_s = evaluations.ncols() as f64;
    let output_scale: f64 = evaluations
        .row_iter()
        .zip(weights)
        .map(|(row, w)| w * row.iter().map(|v| v * v).sum::<f64>() / n_s)
        .sum();
    if dgsm.iter().sum::<f64>() <= 1e-24 * output_scale {
        return Err(Error::AllZeroSensitivity);
    }
    let idx = screening_indices(&dgsm)?;
    let reduced = reduce_parameters(&idx, tol)?;
    Ok(ScreeningReport {
        dgsm_approx: dgsm,
        indices: idx,
        reduced_set: reduced,
        tol,
        r_squared: model.r_squared,
        underdetermined: model.underdetermined,
    })
}
