//! Numerical toolkit for constant-coefficient vectorial differential
//! operators: ellipticity and constant-rank certification, Korn-type Fourier
//! multipliers on the torus, plane-wave counterexamples, N-function calculus,
//! and direct-method minimization of `A`-quasiconvex energies.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar type.

pub mod counterexamples;
pub mod error;
pub mod field;
pub mod linalg;
pub mod multipliers;
pub mod nfunctions;
pub mod operators;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use field::{Domain, GridField};
pub use linalg::MultiIndex;
pub use nfunctions::NFunction;
pub use scalar::Real;

pub type Operator = operators::DifferentialOperator<f64>;
pub type Operator32 = operators::DifferentialOperator<f32>;
pub type Symbol = operators::SymbolMatrix<f64>;
pub type Symbol32 = operators::SymbolMatrix<f32>;
pub type Range = operators::RangeDecomposition<f64>;
pub type Reduction = operators::GradientReduction<f64>;
pub type Field = GridField<f64>;
pub type Field32 = GridField<f32>;
