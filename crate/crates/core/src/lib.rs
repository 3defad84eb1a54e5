//! Weighted norm theory for product fractional integrals, made executable:
//! Muckenhoupt rectangle characteristics (plain, one-tailed, two-tailed),
//! index-level decision procedures for their finiteness, grid and atomic
//! realizations of the operators, the power-weight sandwiching
//! decomposition, and scripted counterexample reproductions.
//!
//! Numeric suprema over rectangle lattices are always **lower bounds** of
//! the true suprema, and closed forms derived from positive-orthant
//! reductions are comparison values (correct up to a fixed but unknown
//! constant); reports and tests are phrased accordingly.

pub mod characteristics;
pub mod error;
pub mod experiments;
pub mod indices;
pub mod laws;
pub mod operators;
pub mod weights;

pub use error::{Error, Result};
pub use indices::{Exact, ProductIndices, SignedPart};
pub use weights::{GridFunction, MeasureSpec, QuadratureConfig, Rectangle, WeightSpec};

/// Library version embedded in every CLI report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
