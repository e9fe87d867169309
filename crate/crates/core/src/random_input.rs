//! Random porosity/permeability input: truncated KLE of an exponential-covariance
//! Gaussian process, Beta marginal transform and Kozeny–Carman permeability.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::flow::Mesh1D;
use crate::quadrature;

/// Eigenvalues in `[-NEGATIVE_EIGEN_TOL, 0)` are treated as round-off and clipped.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-12;

/// `c(x, y) = exp(−|x − y| / ℓ)` on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialKernel {
    pub correlation_length: f64,
    pub domain_length: f64,
}

impl ExponentialKernel {
    pub fn new(correlation_length: f64, domain_length: f64) -> Result<Self> {
        if !(correlation_length > 0.0) || !(domain_length > 0.0 && domain_length.is_finite()) {
            return Err(Error::invalid(
                "correlation and domain lengths must be positive",
            ));
        }
        Ok(ExponentialKernel {
            correlation_length,
            domain_length,
        })
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (-(x - y).abs() / self.correlation_length).exp()
    }

    /// Nodes and composite trapezoid weights on a uniform grid over the domain.
    pub fn trapezoid_rule(&self, n_nodes: usize) -> (Vec<f64>, Vec<f64>) {
        let nodes = quadrature::uniform_grid(0.0, self.domain_length, n_nodes);
        let weights = quadrature::trapezoid_weights(&nodes);
        (nodes, weights)
    }
}

/// Truncated spectral representation `Z(x) ≈ Σ √λ_i ξ_i e_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputKLE {
    pub nodes: Vec<f64>,
    pub quadrature_weights: Vec<f64>,
    /// Descending, nonnegative.
    pub eigenvalues: Vec<f64>,
    /// `n_nodes × n_params`; column `i` holds `e_i` at the nodes.
    pub eigenfunctions: DMatrix<f64>,
    pub captured_variance_fraction: f64,
}

impl InputKLE {
    pub fn n_params(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenfunctions linearly interpolated at arbitrary points (one row per point).
    pub fn eigenfunctions_at(&self, points: &[f64]) -> DMatrix<f64> {
        let np = self.n_params();
        let mut out = DMatrix::zeros(points.len(), np);
        let mut col = vec![0.0; self.nodes.len()];
        for i in 0..np {
            for (k, c) in col.iter_mut().enumerate() {
                *c = self.eigenfunctions[(k, i)];
            }
            for (r, &x) in points.iter().enumerate() {
                out[(r, i)] = quadrature::interp_linear(&self.nodes, &col, x);
            }
        }
        out
    }
}

/// Nyström discretization of the covariance operator with the given quadrature,
/// solved as the symmetric problem `W^{1/2} C W^{1/2} v = λ v`, `e = W^{-1/2} v`.
pub fn build_input_kle(
    kernel: &ExponentialKernel,
    nodes: &[f64],
    weights: &[f64],
    n_params: usize,
) -> Result<InputKLE> {
    let n = nodes.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: weights.len(),
        });
    }
    if n_params == 0 || n_params > n {
        return Err(Error::invalid(format!(
            "n_params must be in 1..={n}, got {n_params}"
        )));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::invalid("quadrature weights must be positive"));
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mat = DMatrix::from_fn(n, n, |k, l| {
        sqrt_w[k] * kernel.eval(nodes[k], nodes[l]) * sqrt_w[l]
    });
    let (values, vectors) = sorted_symmetric_eigen(mat)?;
    let scale = values.first().copied().unwrap_or(0.0).abs().max(1.0);

    let mut eigenvalues = Vec::with_capacity(n_params);
    let mut eigenfunctions = DMatrix::zeros(n, n_params);
    for i in 0..n_params {
        let mut lam = values[i];
        if lam < 0.0 {
            if lam < -NEGATIVE_EIGEN_TOL * scale {
                return Err(Error::EigenSolve(format!(
                    "retained eigenvalue {i} is negative ({lam:.3e})"
                )));
            }
            lam = 0.0;
        }
        eigenvalues.push(lam);
        for k in 0..n {
            eigenfunctions[(k, i)] = vectors[(k, i)] / sqrt_w[k];
        }
    }
    let trace: f64 = (0..n)
        .map(|k| weights[k] * kernel.eval(nodes[k], nodes[k]))
        .sum();
    let captured_variance_fraction = eigenvalues.iter().sum::<f64>() / trace;

    Ok(InputKLE {
        nodes: nodes.to_vec(),
        quadrature_weights: weights.to_vec(),
        eigenvalues,
        eigenfunctions,
        captured_variance_fraction,
    })
}

/// Symmetric eigendecomposition sorted by descending eigenvalue, with each
/// eigenvector's sign fixed so that its first significant entry is positive.
pub(crate) fn sorted_symmetric_eigen(mat: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mat.nrows();
    let eig = SymmetricEigen::try_new(mat, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenSolve("symmetric eigen-solve did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let amax = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let sign = col
            .iter()
            .find(|v| v.abs() > 1e-8 * amax)
            .map(|v| v.signum())
            .unwrap_or(1.0);
        vectors.set_column(dst, &(col * sign));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenSolve("non-finite eigenvalue".into()));
    }
    Ok((values, vectors))
}

/// `Z(x_k) = Σ_i √λ_i ξ_i e_i(x_k)` at the KLE nodes.
pub fn sample_gaussian_field(kle: &InputKLE, xi: &[f64]) -> Result<Vec<f64>> {
    combine_modes(&kle.eigenvalues, &kle.eigenfunctions, xi)
}

/// Same sum with eigenfunctions already evaluated at other points (rows).
pub fn combine_modes(eigenvalues: &[f64], modes: &DMatrix<f64>, xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != eigenvalues.len() {
        return Err(Error::DimensionMismatch {
            expected: eigenvalues.len(),
            actual: xi.len(),
        });
    }
    let mut z = vec![0.0; modes.nrows()];
    for (i, (&lam, &x)) in eigenvalues.iter().zip(xi).enumerate() {
        let a = lam.sqrt() * x;
        if a == 0.0 {
            continue;
        }
        for (k, zk) in z.iter_mut().enumerate() {
            *zk += a * modes[(k, i)];
        }
    }
    Ok(z)
}

/// Beta(α, β) marginal whose mode is the nominal porosity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTransform {
    pub alpha_beta: f64,
    pub beta_beta: f64,
}

/// Absolute tolerance of the inverse Beta CDF root-finder.
pub const INVERSE_BETA_TOL: f64 = 1e-12;

/// Solves the Beta mode relation `(α − 1)/(α + β − 2) = φ̄` for β.
pub fn calibrate_beta(phi_bar: f64, alpha_beta: f64) -> Result<BetaTransform> {
    if !(phi_bar > 0.0 && phi_bar < 1.0) {
        return Err(Error::invalid(format!("phi_bar must lie in (0,1), got {phi_bar}")));
    }
    if !(alpha_beta > 1.0) {
        return Err(Error::invalid(format!("alpha_beta must exceed 1, got {alpha_beta}")));
    }
    Ok(BetaTransform {
        alpha_beta,
        beta_beta: (alpha_beta - 1.0) / phi_bar - alpha_beta + 2.0,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl BetaTransform {
    pub fn mode(&self) -> f64 {
        (self.alpha_beta - 1.0) / (self.alpha_beta + self.beta_beta - 2.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.alpha_beta, self.beta_beta, x)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        let (a, b) = (self.alpha_beta, self.beta_beta);
        ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)).exp()
    }

    /// Inverse CDF by safeguarded Newton iteration inside a shrinking bracket.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;
        if p <= 0.0 {
            return f64::MIN_POSITIVE;
        }
        if p >= 1.0 {
            return BELOW_ONE;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut x = self.mode().clamp(1e-6, 1.0 - 1e-6);
        for _ in 0..200 {
            let f = self.cdf(x) - p;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.pdf(x);
            let mut next = if d > 0.0 { x - f / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() < INVERSE_BETA_TOL || hi - lo < INVERSE_BETA_TOL {
                x = next;
                break;
            }
            x = next;
        }
        x.clamp(f64::MIN_POSITIVE, BELOW_ONE)
    }
}

/// `φ = F_B^{-1}(F_G(z))` pointwise.
pub fn gaussian_to_porosity(z: &[f64], transform: &BetaTransform) -> Vec<f64> {
    z.iter()
        .map(|&v| transform.inverse_cdf(normal_cdf(v)))
        .collect()
}

/// `K(φ) = C φ³/(1 − φ)²` with `C` chosen so that `K(φ̄) = K̄`.
pub fn kozeny_carman(phi: &[f64], phi_bar: f64, k_bar: f64) -> Result<Vec<f64>> {
    if !(phi_bar > 0.0 && phi_bar < 1.0) {
        return Err(Error::invalid("phi_bar must lie in (0,1)"));
    }
    let shape = |p: f64| p.powi(3) / (1.0 - p).powi(2);
    let c = k_bar / shape(phi_bar);
    phi.iter()
        .map(|&p| {
            if p > 0.0 && p < 1.0 {
                Ok(c * shape(p))
            } else {
                Err(Error::invalid(format!("porosity {p} outside (0,1)")))
            }
        })
        .collect()
}

/// Porosity and permeability on the flow cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialFields {
    pub porosity: Vec<f64>,
    pub permeability: Vec<f64>,
}

impl MaterialFields {
    pub fn homogeneous(n_cells: usize, phi: f64, k: f64) -> Self {
        MaterialFields {
            porosity: vec![phi; n_cells],
            permeability: vec![k; n_cells],
        }
    }

    pub fn from_porosity(porosity: Vec<f64>, phi_bar: f64, k_bar: f64) -> Result<Self> {
        let permeability = kozeny_carman(&porosity, phi_bar, k_bar)?;
        Ok(MaterialFields {
            porosity,
            permeability,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.porosity.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.porosity.len() != self.permeability.len() {
            return Err(Error::DimensionMismatch {
                expected: self.porosity.len(),
                actual: self.permeability.len(),
            });
        }
        if self.porosity.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::invalid("porosity must lie in (0,1)"));
        }
        if self.permeability.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return Err(Error::invalid("permeability must be positive"));
        }
        Ok(())
    }
}

/// Maps KLE coordinates ξ to material fields on a flow mesh.
#[derive(Debug, Clone)]
pub struct FieldGenerator {
    pub kle: InputKLE,
    pub transform: BetaTransform,
    pub phi_bar: f64,
    pub k_bar: f64,
    modes_at_cells: DMatrix<f64>,
}

impl FieldGenerator {
    pub fn new(
        kle: InputKLE,
        transform: BetaTransform,
        phi_bar: f64,
        k_bar: f64,
        mesh: &Mesh1D,
    ) -> Self {
        let modes_at_cells = kle.eigenfunctions_at(&mesh.cell_centers);
        FieldGenerator {
            kle,
            transform,
            phi_bar,
            k_bar,
            modes_at_cells,
        }
    }

    pub fn n_params(&self) -> usize {
        self.kle.n_params()
    }

    pub fn gaussian_at_cells(&self, xi: &[f64]) -> Result<Vec<f64>> {
        combine_modes(&self.kle.eigenvalues, &self.modes_at_cells, xi)
    }

    pub fn fields(&self, xi: &[f64]) -> Result<MaterialFields> {
        let z = self.gaussian_at_cells(xi)?;
        let phi = gaussian_to_porosity(&z, &self.transform);
        MaterialFields::from_porosity(phi, self.phi_bar, self.k_bar)
    }
}
