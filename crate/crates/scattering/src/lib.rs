//! Exact-arithmetic scattering diagram engine.
//!
//! The crate implements local scattering diagrams with their consistent
//! completion, the two-ray scattering construction, and a global engine
//! running on a rectangular window of the region U above the parabola
//! y = -x^2/2, together with the extraction and cross-checking of the
//! curve-counting and sheaf-counting invariants encoded by the vertical
//! asymptotic rays. All arithmetic is exact rational; equality checks in
//! the test suites are exact, never approximate.

pub mod algebra;
pub mod error;
pub mod flow;
pub mod invariants;
pub mod io;
pub mod render;
pub mod scattering;
pub mod sources;

pub use algebra::{GradedSeries, LatticeVector, Order, Rat};
pub use error::{AlgebraError, DiagramError, ExtractError};
