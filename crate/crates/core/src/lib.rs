pub mod analysis;
pub mod error;
pub mod flow;
pub mod output_kle;
pub mod pce;
pub mod pipeline;
pub mod quadrature;
pub mod random_input;
pub mod screening;

pub use error::{Error, Result};
