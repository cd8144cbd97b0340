//! Fixed-point iterations of averaged nonexpansive operators, with the
//! rate machinery to certify how fast they converge.
//!
//! The crate is organized in layers:
//!
//! * [`geometry`]: closed convex sets with computable projections.
//! * [`operators`]: averaged operators built from those projections
//!   (Douglas-Rachford and variants, relaxations, forward-backward).
//! * [`engine`]: iteration drivers that run weighted/quasi-cyclic schemes
//!   and record traces.
//! * [`regularity`]: Holder-regularity exponents, explicit rate constants
//!   and envelopes, and empirical exponent estimation.
//! * [`diagnostics`]: post-hoc checks on recorded traces (monotonicity,
//!   rate fits, envelope domination).
//!
//! A point is a plain `Vec<f64>`; all sets and operators live in a fixed
//! small dimension.

pub mod diagnostics;
pub mod engine;
pub mod geometry;
pub mod operators;
pub mod regularity;
pub mod vecmath;

/// A point of the ambient space.
pub type Point = Vec<f64>;

pub use geometry::{ConvexSet, GeometryError, SetCollection};
pub use operators::{AveragedOperator, FixSet, OperatorError, ProxMap, VipProblem};
