use nalgebra::DMatrix;

use super::basis::{build_basis, TotalOrderBasis};
use super::regression::{sparse_regress_path, SparseRegressionConfig};
use crate::error::{Error, Result};
use crate::output_kle::{compute_output_kle, OutputKLE, Truncation};
use crate::quadrature::trapezoid_weights;
use crate::screening::ReducedSet;

/// PCE coefficients of one KL mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePCE {
    pub coefficients: Vec<f64>,
}

impl ModePCE {
    pub fn zeros(n: usize) -> Self {
        ModePCE {
            coefficients: vec![0.0; n],
        }
    }
}

/// `f(s, ξ) ≈ f̄(s) + Σ_i √λ_i f_i^PC(ξ^r) Φ_i(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BispectralSurrogate {
    pub abscissae: Vec<f64>,
    pub mean: Vec<f64>,
    pub weights: Vec<f64>,
    /// Retained eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// `m × N_qoi`.
    pub eigenfunctions: DMatrix<f64>,
    pub basis: TotalOrderBasis,
    pub modes: Vec<ModePCE>,
    pub reduced_set: ReducedSet,
    /// L1 budget the coefficients were fitted with (0 if unknown).
    pub tau: f64,
}

/// Packages a truncated output KLE and one PCE per retained mode.
pub fn assemble_surrogate(
    abscissae: &[f64],
    kle: &OutputKLE,
    basis: TotalOrderBasis,
    modes: Vec<ModePCE>,
    reduced_set: ReducedSet,
    tau: f64,
) -> Result<BispectralSurrogate> {
    if modes.len() != kle.n_qoi {
        return Err(Error::DimensionMismatch {
            expected: kle.n_qoi,
            actual: modes.len(),
        });
    }
    if abscissae.len() != kle.n_abscissae() {
        return Err(Error::DimensionMismatch {
            expected: kle.n_abscissae(),
            actual: abscissae.len(),
        });
    }
    if basis.dim != reduced_set.len() {
        return Err(Error::DimensionMismatch {
            expected: reduced_set.len(),
            actual: basis.dim,
        });
    }
    if let Some(bad) = modes.iter().find(|m| m.coefficients.len() != basis.len()) {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            actual: bad.coefficients.len(),
        });
    }
    Ok(BispectralSurrogate {
        abscissae: abscissae.to_vec(),
        mean: kle.mean.clone(),
        weights: kle.weights.clone(),
        eigenvalues: kle.retained_eigenvalues().to_vec(),
        eigenfunctions: kle.retained_eigenfunctions(),
        basis,
        modes,
        reduced_set,
        tau,
    })
}

impl BispectralSurrogate {
    /// The same function written over a superset of the reduced parameters and a
    /// basis of order at least the current one.
    pub fn lift(&self, set: &ReducedSet, max_degree: usize) -> Result<BispectralSurrogate> {
        if set.n_full != self.reduced_set.n_full || max_degree < self.basis.max_degree {
            return Err(Error::BasisMismatch);
        }
        let pos = self
            .reduced_set
            .indices
            .iter()
            .map(|j| set.indices.iter().position(|i| i == j).ok_or(Error::BasisMismatch))
            .collect::<Result<Vec<_>>>()?;
        let basis = build_basis(set.len(), max_degree)?;
        let lookup: std::collections::HashMap<&[u32], usize> =
            basis.indices.iter().enumerate().map(|(k, a)| (a.as_slice(), k)).collect();
        let target: Vec<usize> = self
            .basis
            .indices
            .iter()
            .map(|a| {
                let mut b = vec![0u32; set.len()];
                for (i, &p) in pos.iter().enumerate() {
                    b[p] = a[i];
                }
                lookup[b.as_slice()]
            })
            .collect();
        let modes = self
            .modes
            .iter()
            .map(|m| {
                let mut c = vec![0.0; basis.len()];
                for (k, &t) in target.iter().enumerate() {
                    c[t] = m.coefficients[k];
                }
                ModePCE { coefficients: c }
            })
            .collect();
        Ok(BispectralSurrogate {
            basis,
            modes,
            reduced_set: set.clone(),
            ..self.clone()
        })
    }

    pub fn n_qoi(&self) -> usize {
        self.modes.len()
    }

    pub fn n_abscissae(&self) -> usize {
        self.mean.len()
    }

    pub fn n_reduced(&self) -> usize {
        self.basis.dim
    }

    /// `N_qoi × (N_PC + 1)` coefficient matrix.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_qoi(), self.basis.len(), |i, k| self.modes[i].coefficients[k])
    }

    /// `f_i^PC(ξ^r)` for every retained mode.
    pub fn evaluate_modes(&self, xi_r: &[f64]) -> Result<Vec<f64>> {
        let psi = self.basis.evaluate(xi_r)?;
        Ok(self.modes_from_basis(&psi))
    }

    fn modes_from_basis(&self, psi: &[f64]) -> Vec<f64> {
        self.modes
            .iter()
            .map(|m| m.coefficients.iter().zip(psi).map(|(c, p)| c * p).sum())
            .collect()
    }

    /// Mode values to a trajectory on the output grid.
    pub fn synthesize(&self, modes: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (i, a) in modes.iter().enumerate() {
            let scale = self.eigenvalues[i].sqrt() * a;
            if scale == 0.0 {
                continue;
            }
            for (k, o) in out.iter_mut().enumerate() {
                *o += scale * self.eigenfunctions[(k, i)];
            }
        }
        out
    }

    /// Trajectory at reduced coordinates `ξ^r`.
    pub fn evaluate(&self, xi_r: &[f64]) -> Result<Vec<f64>> {
        Ok(self.synthesize(&self.evaluate_modes(xi_r)?))
    }

    /// Trajectory at a full parameter vector (projected onto `K_r`).
    pub fn evaluate_full(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.evaluate(&self.reduced_set.project(xi)?)
    }

    /// Trajectories for the rows of an `N × n_p` reduced sample matrix, as `m × N`.
    pub fn evaluate_many(&self, xi_r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let design = self.basis.design_matrix(xi_r)?;
        let coef = self.coefficient_matrix();
        let modes = &coef * design.transpose();
        let mut scaled = modes;
        for i in 0..self.n_qoi() {
            let s = self.eigenvalues[i].sqrt();
            scaled.row_mut(i).scale_mut(s);
        }
        let mut out = &self.eigenfunctions * scaled;
        for mut col in out.column_iter_mut() {
            for (v, m) in col.iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

/// Options for fitting a surrogate to an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub truncation: Truncation,
    pub max_degree: usize,
    pub regression: SparseRegressionConfig,
}

/// Output KLE on the training ensemble, then one sparse PCE per retained mode.
///
/// `xi_r` is `N × n_p` (reduced coordinates), `evaluations` is `m × N`.
pub fn fit_surrogate(
    abscissae: &[f64],
    xi_r: &DMatrix<f64>,
    evaluations: &DMatrix<f64>,
    reduced_set: ReducedSet,
    opts: &FitOptions,
) -> Result<BispectralSurrogate> {
    if xi_r.nrows() != evaluations.ncols() {
        return Err(Error::DimensionMismatch {
            expected: evaluations.ncols(),
            actual: xi_r.nrows(),
        });
    }
    let weights = trapezoid_weights(abscissae);
    let kle = compute_output_kle(evaluations, &weights, opts.truncation)?;
    let basis = build_basis(xi_r.ncols(), opts.max_degree)?;
    let design = basis.design_matrix(xi_r)?;
    let modes = (0..kle.n_qoi)
        .map(|i| {
            let data: Vec<f64> = kle.modes.row(i).iter().copied().collect();
            sparse_regress_path(&design, &data, &[opts.regression.tau], &opts.regression).map(|mut f| ModePCE {
                coefficients: f.pop().expect("one budget").coefficients,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_surrogate(abscissae, &kle, basis, modes, reduced_set, opts.regression.tau)
}
