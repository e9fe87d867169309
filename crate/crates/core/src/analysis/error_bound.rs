//! Decomposition of the mean-square surrogate error into KLE truncation,
//! coefficient estimation and PCE truncation contributions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundTerms {
    /// `Σ_{i>N_qoi} λ_i`.
    pub kle_tail: f64,
    /// `Σ_{i≤N_qoi} λ_i Σ_{k≤N_PC} (c_{i,k} − ĉ_{i,k})² ‖Ψ_k‖²`, including `k = 0`.
    pub coeff_error: f64,
    /// `Σ_{i≤N_qoi} λ_i Σ_{k>N_PC} c_{i,k}² ‖Ψ_k‖²`.
    pub pce_tail: f64,
}

impl ErrorBoundTerms {
    pub fn total(&self) -> f64 {
        self.kle_tail + self.coeff_error + self.pce_tail
    }
}

/// `eigenvalues` is the full spectrum; `exact[i]` are the true PCE coefficients
/// of mode `i` over an extended basis with squared norms `norms_sq`, of which
/// the first `estimated[i].len()` terms form the truncated basis.
pub fn error_bound_terms(
    eigenvalues: &[f64],
    n_qoi: usize,
    exact: &[Vec<f64>],
    estimated: &[Vec<f64>],
    norms_sq: &[f64],
) -> Result<ErrorBoundTerms> {
    if n_qoi > eigenvalues.len() || exact.len() < n_qoi || estimated.len() < n_qoi {
        return Err(Error::invalid("fewer modes supplied than retained"));
    }
    let kle_tail = eigenvalues[n_qoi..].iter().fold(0.0, |acc, l| acc + l.max(0.0));
    let mut coeff_error = 0.0;
    let mut pce_tail = 0.0;
    for i in 0..n_qoi {
        let (c, c_hat) = (&exact[i], &estimated[i]);
        if c_hat.len() > c.len() || c.len() > norms_sq.len() {
            return Err(Error::DimensionMismatch {
                expected: c.len(),
                actual: c_hat.len(),
            });
        }
        let lam = eigenvalues[i];
        let n_pc = c_hat.len();
        coeff_error += lam
            * (0..n_pc)
                .map(|k| (c[k] - c_hat[k]).powi(2) * norms_sq[k])
                .sum::<f64>();
        pce_tail += lam * (n_pc..c.len()).map(|k| c[k] * c[k] * norms_sq[k]).sum::<f64>();
    }
    Ok(ErrorBoundTerms {
        kle_tail,
        coeff_error,
        pce_tail,
    })
}
