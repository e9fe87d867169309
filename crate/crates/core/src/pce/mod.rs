//! Polynomial chaos surrogates of KL modes.

pub mod basis;
pub mod cv;
pub mod regression;
pub mod surrogate;

pub use basis::{build_basis, hermite_values, total_order_count, TotalOrderBasis};
pub use cv::{fold_partition, kfold_select, CvCell, CvGrid, CvOptions, CvReport};
pub use regression::{project_l1_ball, sparse_regress, sparse_regress_from, sparse_regress_path, SparseFit, SparseRegressionConfig};
pub use surrogate::{assemble_surrogate, fit_surrogate, BispectralSurrogate, FitOptions, ModePCE};
