//! Spectral Galerkin simulation of the radial defocusing nonlinear
//! Schrödinger equation on the unit disc with Gibbs-measure random data.

pub mod basis;
pub mod bessel;
pub mod cache;
pub mod correlation;
pub mod counting;
pub mod error;
pub mod field;
pub mod flow;
pub mod gibbs;
pub mod norms;
pub mod quadrature;
pub mod rro;

pub use basis::{EigenMode, SpectralBasis};
pub use correlation::{correlate, CorrelationKey, CorrelationTensor};
pub use error::{CacheError, Error, Result};
pub use field::SpectralField;
pub use num_complex::Complex64;
pub use quadrature::QuadratureRule;
