//! Cone structures, Lorentz-Finsler metrics and Zermelo navigation.
//!
//! The crate works on a single coordinate chart `R^(1+n)` (or `R^d` for
//! purely vectorial constructions), `n <= 3`. It provides:
//!
//! * [`fields`] — arithmetic expression fields over `(t, x1..xn)` and the
//!   finite-difference kernels used by every tensor evaluation,
//! * [`norms`] — Finsler/Minkowski norm families (Riemannian, Randers,
//!   p-power, Kropina, Zermelo) with fundamental tensors, angular metrics,
//!   signatures and a numeric Hessian oracle,
//! * [`spacetimes`] — Lorentz-Finsler metric constructions (`omega^2 - F^2`,
//!   `g_R - F^2`, sums and products of roots, Bogoslovsky, cone-triple
//!   metrics, anisotropic scalings) plus the pointwise Lorentz checks,
//! * [`cones`] — cone triples, causal classification, fiber-norm extraction
//!   and lightlike fans,
//! * [`geodesics`] — Euler-Lagrange integration, exponential shooting,
//!   conjugate-point scans and pregeodesic comparisons,
//! * [`zermelo`] — the time-dependent Zermelo navigation solver, isochrone
//!   fronts, and an independent dynamic-programming oracle.

pub mod cones;
pub mod fields;
pub mod geodesics;
pub mod norms;
pub mod spacetimes;
pub mod zermelo;

pub use cones::{CausalClass, ConeTriple};
pub use fields::{CovectorField, DiffConfig, FieldError, FieldExpr, MatrixField, VectorField};
pub use norms::{BilinearForm, FinslerSpec, NormError, Signature};
pub use spacetimes::{ConditionReport, LorentzFinslerSpec, SmoothedGraph, SpacetimeError};
pub use zermelo::{NavigationResult, OracleConfig, ZermeloScenario};
