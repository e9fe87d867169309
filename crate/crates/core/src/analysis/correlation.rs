//! Closed-form second moments of bispectral surrogates.
//!
//! With `p(s) = (Φ_1(s), …, Φ_N(s))` and `η_i^k = c_{i,k} √λ_i`,
//! `c_f(s₁, s₂) = ⟨p(s₁), B p(s₂)⟩` where `B_ij = Σ_{k≥1} η_i^k η_j^k ‖Ψ_k‖²`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pce::BispectralSurrogate;

/// Variances at or below this value make the correlation undefined.
pub const MIN_VARIANCE: f64 = 1e-30;

/// `η` with the norm weight folded in: row `i`, column `k ≥ 1` holds `η_i^k ‖Ψ_k‖`.
fn weighted_eta(s: &BispectralSurrogate) -> DMatrix<f64> {
    let p = s.basis.len();
    DMatrix::from_fn(s.n_qoi(), p.saturating_sub(1), |i, k| {
        s.modes[i].coefficients[k + 1] * s.eigenvalues[i].sqrt() * s.basis.norms_sq[k + 1].sqrt()
    })
}

/// `B̃ = E_f E_gᵀ`; equals `B` when `f = g`.
fn coupling(f: &BispectralSurrogate, g: &BispectralSurrogate) -> DMatrix<f64> {
    weighted_eta(f) * weighted_eta(g).transpose()
}

fn same_germ(f: &BispectralSurrogate, g: &BispectralSurrogate) -> bool {
    f.reduced_set == g.reduced_set
        && f.basis.dim == g.basis.dim
        && f.basis.max_degree == g.basis.max_degree
        && f.basis.indices == g.basis.indices
}

fn check_index(s: &BispectralSurrogate, k: usize) -> Result<()> {
    if k >= s.n_abscissae() {
        return Err(Error::invalid(format!("abscissa index {k} out of range")));
    }
    Ok(())
}

/// Full `m × m` covariance matrix `P B Pᵀ`.
pub fn covariance_matrix(s: &BispectralSurrogate) -> DMatrix<f64> {
    let pe = &s.eigenfunctions * weighted_eta(s);
    &pe * pe.transpose()
}

/// `c_f(s_{k1}, s_{k2})` at grid indices.
pub fn covariance_function(s: &BispectralSurrogate, k1: usize, k2: usize) -> Result<f64> {
    cross_covariance_function(s, s, k1, k2)
}

/// `⟨p(s₁), B̃ q(s₂)⟩`.
pub fn cross_covariance_function(
    f: &BispectralSurrogate,
    g: &BispectralSurrogate,
    k1: usize,
    k2: usize,
) -> Result<f64> {
    if !same_germ(f, g) {
        return Err(Error::BasisMismatch);
    }
    check_index(f, k1)?;
    check_index(g, k2)?;
    let b = coupling(f, g);
    let p = f.eigenfunctions.row(k1);
    let q = g.eigenfunctions.row(k2);
    Ok((p * b * q.transpose())[(0, 0)])
}

pub fn correlation_function(s: &BispectralSurrogate, k1: usize, k2: usize) -> Result<f64> {
    cross_correlation(s, s, k1, k2)
}

/// `ρ_fg(s₁, s₂)`, normalized by the auto-variances `c_f(s₁,s₁)` and `c_g(s₂,s₂)`.
pub fn cross_correlation(
    f: &BispectralSurrogate,
    g: &BispectralSurrogate,
    k1: usize,
    k2: usize,
) -> Result<f64> {
    let c = cross_covariance_function(f, g, k1, k2)?;
    let vf = covariance_function(f, k1, k1)?;
    let vg = covariance_function(g, k2, k2)?;
    if vf <= MIN_VARIANCE {
        return Err(Error::Undefined { index: k1, variance: vf });
    }
    if vg <= MIN_VARIANCE {
        return Err(Error::Undefined { index: k2, variance: vg });
    }
    Ok(c / (vf * vg).sqrt())
}

/// Correlation values on the full grid; `NaN` where a variance vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationField {
    pub abscissae_1: Vec<f64>,
    pub abscissae_2: Vec<f64>,
    pub values: DMatrix<f64>,
}

impl CorrelationField {
    /// Whitespace-separated matrix, one row per first abscissa.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# rows: ");
        out.push_str(&join(&self.abscissae_1));
        out.push_str("\n# cols: ");
        out.push_str(&join(&self.abscissae_2));
        out.push('\n');
        for r in 0..self.values.nrows() {
            let row: Vec<String> = self.values.row(r).iter().map(|v| format!("{v:.8e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ")
}

pub fn correlation_field(s: &BispectralSurrogate) -> CorrelationField {
    cross_correlation_field(s, s).expect("a surrogate shares its own basis")
}

pub fn cross_correlation_field(f: &BispectralSurrogate, g: &BispectralSurrogate) -> Result<CorrelationField> {
    if !same_germ(f, g) {
        return Err(Error::BasisMismatch);
    }
    let pf = &f.eigenfunctions * weighted_eta(f);
    let pg = &g.eigenfunctions * weighted_eta(g);
    let cov = &pf * pg.transpose();
    let vf: Vec<f64> = pf.row_iter().map(|r| r.norm_squared()).collect();
    let vg: Vec<f64> = pg.row_iter().map(|r| r.norm_squared()).collect();
    let values = DMatrix::from_fn(cov.nrows(), cov.ncols(), |a, b| {
        if vf[a] > MIN_VARIANCE && vg[b] > MIN_VARIANCE {
            cov[(a, b)] / (vf[a] * vg[b]).sqrt()
        } else {
            f64::NAN
        }
    });
    Ok(CorrelationField {
        abscissae_1: f.abscissae.clone(),
        abscissae_2: g.abscissae.clone(),
        values,
    })
}
