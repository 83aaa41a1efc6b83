//! Numerical and symbolic toolkit for interior transmission eigenvalue
//! (ITE) problems: resolvent discretizations, semiclassical boundary-symbol
//! reduction, spectral counting, pseudospectrum scans and quasimode lower
//! bounds, each paired with an independent oracle at desk scale.

pub mod chebyshev;
pub mod discretize;
pub mod eigensolve;
pub mod error;
pub mod expr;
pub mod halfspace;
pub mod linalg;
#[cfg(feature = "test-oracles")]
pub mod oracle;
pub mod operator_identities;
pub mod problem;
pub mod resolvent;
pub mod symbols;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
