use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest basis the enumerator will build.
pub const MAX_TERMS: u128 = 1_000_000;

/// Total-order tensor basis of probabilists' Hermite polynomials.
///
/// Multi-indices are in graded lexicographic order: by total degree, and within
/// a degree by descending power of the first variable, then the second, and so
/// on. Term 0 is the constant and terms `1..=n_p` are the linear monomials `ξ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalOrderBasis {
    pub dim: usize,
    pub max_degree: usize,
    pub indices: Vec<Vec<u32>>,
    /// `‖Ψ_α‖² = Π α_i!`.
    pub norms_sq: Vec<f64>,
}

/// `C(n + d, d)` without overflow for the sizes of interest.
pub fn total_order_count(dim: usize, max_degree: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=max_degree as u128 {
        c = c * (dim as u128 + i) / i;
        if c > u64::MAX as u128 {
            return c;
        }
    }
    c
}

fn push_degree(dim: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == dim {
        prefix.push(degree);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for a in (0..=degree).rev() {
        prefix.push(a);
        push_degree(dim, degree - a, prefix, out);
        prefix.pop();
    }
}

pub fn build_basis(dim: usize, max_degree: usize) -> Result<TotalOrderBasis> {
    if dim == 0 {
        return Err(Error::invalid("basis dimension must be at least 1"));
    }
    let terms = total_order_count(dim, max_degree);
    if terms > MAX_TERMS {
        return Err(Error::BasisTooLarge { terms });
    }
    let mut indices = Vec::with_capacity(terms as usize);
    for d in 0..=max_degree as u32 {
        push_degree(dim, d, &mut Vec::with_capacity(dim), &mut indices);
    }
    let norms_sq = indices
        .iter()
        .map(|a| a.iter().map(|&k| factorial(k)).product())
        .collect();
    Ok(TotalOrderBasis {
        dim,
        max_degree,
        indices,
        norms_sq,
    })
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `He_0..He_n` at `x` by `He_{k+1} = x He_k − k He_{k−1}`.
pub fn hermite_values(x: f64, n: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0);
    if n >= 1 {
        h.push(x);
    }
    for k in 1..n {
        h.push(x * h[k] - k as f64 * h[k - 1]);
    }
    h
}

impl TotalOrderBasis {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `Ψ_k(ξ)` for every term.
    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: xi.len(),
            });
        }
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(xi, &mut out);
        Ok(out)
    }

    pub(crate) fn evaluate_into(&self, xi: &[f64], out: &mut [f64]) {
        let table: Vec<Vec<f64>> = xi.iter().map(|&x| hermite_values(x, self.max_degree)).collect();
        for (o, alpha) in out.iter_mut().zip(&self.indices) {
            let mut v = 1.0;
            for (j, &a) in alpha.iter().enumerate() {
                if a > 0 {
                    v *= table[j][a as usize];
                }
            }
            *o = v;
        }
    }

    /// Design matrix `Λ_{jk} = Ψ_k(ξ_j)` for the rows of `samples` (`N × dim`).
    pub fn design_matrix(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if samples.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: samples.ncols(),
            });
        }
        let n = samples.nrows();
        let mut design = DMatrix::zeros(n, self.len());
        let mut row = vec![0.0; self.len()];
        let mut xi = vec![0.0; self.dim];
        for r in 0..n {
            for (j, x) in xi.iter_mut().enumerate() {
                *x = samples[(r, j)];
            }
            self.evaluate_into(&xi, &mut row);
            for (k, v) in row.iter().enumerate() {
                design[(r, k)] = *v;
            }
        }
        Ok(design)
    }
}
