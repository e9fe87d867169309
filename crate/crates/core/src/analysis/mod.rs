//! Statistics of bispectral surrogates.

pub mod correlation;
pub mod density;
pub mod error_bound;
pub mod sobol;

pub use correlation::{
    correlation_field, correlation_function, covariance_function, covariance_matrix,
    cross_correlation, cross_correlation_field, cross_covariance_function, CorrelationField,
};
pub use density::{estimate_pdf, MIN_PDF_SAMPLES, first_time_above, observable_max, Density, Observable};
pub use error_bound::{error_bound_terms, ErrorBoundTerms};
pub use sobol::{total_sobol_functional, MIN_SOBOL_SAMPLES, total_sobol_scalar, SobolReport};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `sqrt( Σ_j ∫(f_j − f̂_j)² ds / Σ_j ∫ f_j² ds )` with quadrature weights `w`.
///
/// `exact` and `predicted` are `m × N` (one trajectory per column).
pub fn relative_error(predicted: &DMatrix<f64>, exact: &DMatrix<f64>, weights: &[f64]) -> Result<f64> {
    if predicted.shape() != exact.shape() {
        return Err(Error::DimensionMismatch {
            expected: exact.ncols(),
            actual: predicted.ncols(),
        });
    }
    if exact.ncols() == 0 {
        return Err(Error::invalid("empty validation set"));
    }
    if weights.len() != exact.nrows() {
        return Err(Error::DimensionMismatch {
            expected: exact.nrows(),
            actual: weights.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..exact.ncols() {
        for (k, w) in weights.iter().enumerate() {
            let e = exact[(k, j)];
            let d = e - predicted[(k, j)];
            num += w * d * d;
            den += w * e * e;
        }
    }
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok((num / den).sqrt())
}
