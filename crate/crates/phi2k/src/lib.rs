//! Zero-dimensional `φ^{2k}` and `(φ̄φ)^k` partition functions through
//! three independent representations, cross-validated numerically and
//! against exact perturbative coefficients, with Borel-Leroy resummation
//! of order `k-1`.
//!
//! The crate is organized around five subsystems:
//!
//! * [`exact_series`] — arbitrary-precision series coefficients,
//!   generalized Catalan combinatorics, and a Wick-pairing oracle for
//!   the crossed intermediate-field measures.
//! * [`quadrature`] — deterministic trapezoid/doubling integration on
//!   the real line and on the deformed contours `t ± iε·tanh(t)`, in up
//!   to four variables.
//! * [`representations`] — the standard, rotated, intermediate-field and
//!   improved evaluators of the partition functions.
//! * [`resummation`] — Borel-Leroy transform, Padé continuation, the
//!   inverse integral and remainder-growth diagnostics.
//! * [`bounds`] — analyticity-domain predicates and the sampled
//!   verification of the uniform resolvent bound.
//!
//! A worked guide lives in `book/`; its code snippets are compiled and
//! run as doctests by the companion `phi2k-book` crate.

pub mod bounds;
pub mod error;
pub mod exact_series;
pub mod linalg;
pub mod quadrature;
pub mod representations;
pub mod resummation;
pub mod types;

pub use error::{Error, Result};
pub use types::{LogSurfacePoint, ModelKind, ModelSpec, QuadratureEstimate};
