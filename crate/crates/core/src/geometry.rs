//! Closed convex sets with exact or root-solved Euclidean projections.
//!
//! Each set kind knows how to project a point, and everything else
//! (distance, reflection, relaxed projection) is derived from that.
//! Projections onto half-spaces, hyperplanes, balls, boxes and affine
//! subspaces are closed-form. The epigraph of `x -> |x|^d` (d even)
//! reduces to a scalar root solve along the ray through the query point.

use crate::vecmath as vm;
use thiserror::Error;

/// Default tolerance for membership tests: `dist(x, C) <= MEMBERSHIP_TOL`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Default tolerance for checking that a supplied basis is orthonormal.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

/// Residual tolerance for the epigraph scalar root solve, relative to
/// `max(1, |z|)`.
pub const ROOT_SOLVE_TOL: f64 = 1e-14;

/// Iteration cap for the epigraph scalar root solve.
pub const ROOT_SOLVE_MAX_ITERS: usize = 200;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid set parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite coordinate in input point")]
    NonFinite,
    #[error("root solve did not converge, achieved residual {residual:.3e}")]
    RootSolve { residual: f64 },
}

/// A closed convex set in fixed dimension with a computable projection.
#[derive(Debug, Clone)]
pub enum ConvexSet {
    /// `{ x : <normal, x> <= offset }`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// `{ x : <normal, x> = offset }`.
    Hyperplane { normal: Vec<f64>, offset: f64 },
    /// Closed ball of positive radius.
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box `{ x : lower <= x <= upper }` componentwise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `anchor + span(basis)` with an orthonormal basis. An empty basis
    /// describes the single point `{anchor}`.
    AffineSubspace {
        basis: Vec<Vec<f64>>,
        anchor: Vec<f64>,
    },
    /// `{ (x, r) in R^n x R : r >= |x|^d }` for even `d >= 2`; lives in
    /// dimension `n + 1`.
    EpigraphPowerNorm { n: usize, d: u32 },
    /// A set tagged with the number of variables and the degree of a
    /// polynomial description, so rate machinery can derive a regularity
    /// exponent. Projection delegates to the inner set.
    SemialgebraicMeta {
        n_vars: u32,
        degree: u32,
        inner: Box<ConvexSet>,
    },
}

fn check_finite(x: &[f64]) -> Result<(), GeometryError> {
    if vm::all_finite(x) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

impl ConvexSet {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, GeometryError> {
        check_finite(&normal)?;
        if !offset.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if vm::norm(&normal) == 0.0 {
            return Err(GeometryError::InvalidParameter(
                "halfspace normal must be nonzero".into(),
            ));
        }
        Ok(ConvexSet::Halfspace { normal, offset })
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self, GeometryError> {
        check_finite(&normal)?;
        if !offset.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if vm::norm(&normal) == 0.0 {
            return Err(GeometryError::InvalidParameter(
                "hyperplane normal must be nonzero".into(),
            ));
        }
        Ok(ConvexSet::Hyperplane { normal, offset })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, GeometryError> {
        check_finite(&center)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn box_set(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        check_finite(&lower)?;
        check_finite(&upper)?;
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(GeometryError::InvalidParameter(
                "box lower bound exceeds upper bound".into(),
            ));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn affine_subspace(
        basis: Vec<Vec<f64>>,
        anchor: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        Self::affine_subspace_with_tol(basis, anchor, ORTHONORMALITY_TOL)
    }

    /// As [`ConvexSet::affine_subspace`] with an explicit orthonormality
    /// tolerance.
    pub fn affine_subspace_with_tol(
        basis: Vec<Vec<f64>>,
        anchor: Vec<f64>,
        tol: f64,
    ) -> Result<Self, GeometryError> {
        check_finite(&anchor)?;
        for q in &basis {
            check_finite(q)?;
            if q.len() != anchor.len() {
                return Err(GeometryError::DimensionMismatch {
                    expected: anchor.len(),
                    got: q.len(),
                });
            }
        }
        for (i, qi) in basis.iter().enumerate() {
            for (j, qj) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                let got = vm::dot(qi, qj);
                if (got - want).abs() > tol {
                    return Err(GeometryError::InvalidParameter(format!(
                        "basis is not orthonormal: <q{i}, q{j}> = {got:.3e}, expected {want}"
                    )));
                }
            }
        }
        Ok(ConvexSet::AffineSubspace { basis, anchor })
    }

    pub fn epigraph_power_norm(n: usize, d: u32) -> Result<Self, GeometryError> {
        if n == 0 {
            return Err(GeometryError::InvalidParameter(
                "epigraph needs at least one base variable".into(),
            ));
        }
        if d < 2 || d % 2 != 0 {
            return Err(GeometryError::InvalidParameter(format!(
                "epigraph exponent must be even and >= 2, got {d}"
            )));
        }
        Ok(ConvexSet::EpigraphPowerNorm { n, d })
    }

    pub fn semialgebraic_meta(
        n_vars: u32,
        degree: u32,
        inner: ConvexSet,
    ) -> Result<Self, GeometryError> {
        if n_vars == 0 || degree == 0 {
            return Err(GeometryError::InvalidParameter(
                "semialgebraic description needs n_vars >= 1 and degree >= 1".into(),
            ));
        }
        Ok(ConvexSet::SemialgebraicMeta {
            n_vars,
            degree,
            inner: Box::new(inner),
        })
    }

    /// Ambient dimension of the set.
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Halfspace { normal, .. } | ConvexSet::Hyperplane { normal, .. } => {
                normal.len()
            }
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::AffineSubspace { anchor, .. } => anchor.len(),
            ConvexSet::EpigraphPowerNorm { n, .. } => n + 1,
            ConvexSet::SemialgebraicMeta { inner, .. } => inner.dim(),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        check_finite(x)
    }

    /// Euclidean projection of `x` onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_point(x)?;
        match self {
            ConvexSet::Halfspace { normal, offset } => {
                let viol = vm::dot(normal, x) - offset;
                if viol <= 0.0 {
                    Ok(x.to_vec())
                } else {
                    Ok(vm::add_scaled(x, -viol / vm::dot(normal, normal), normal))
                }
            }
            ConvexSet::Hyperplane { normal, offset } => {
                let viol = vm::dot(normal, x) - offset;
                Ok(vm::add_scaled(x, -viol / vm::dot(normal, normal), normal))
            }
            ConvexSet::Ball { center, radius } => {
                let v = vm::sub(x, center);
                let nv = vm::norm(&v);
                if nv <= *radius {
                    Ok(x.to_vec())
                } else {
                    Ok(vm::add_scaled(center, radius / nv, &v))
                }
            }
            ConvexSet::Box { lower, upper } => Ok(x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (l, u))| xi.clamp(*l, *u))
                .collect()),
            ConvexSet::AffineSubspace { basis, anchor } => {
                let mut p = anchor.clone();
                let shifted = vm::sub(x, anchor);
                for q in basis {
                    vm::axpy(&mut p, vm::dot(&shifted, q), q);
                }
                Ok(p)
            }
            ConvexSet::EpigraphPowerNorm { n, d } => project_epigraph(*n, *d, x),
            ConvexSet::SemialgebraicMeta { inner, .. } => inner.project(x),
        }
    }

    /// `dist(x, C) = |x - P_C x|`.
    pub fn distance(&self, x: &[f64]) -> Result<f64, GeometryError> {
        Ok(vm::dist(x, &self.project(x)?))
    }

    /// Membership within [`MEMBERSHIP_TOL`] measured by distance.
    pub fn contains(&self, x: &[f64]) -> Result<bool, GeometryError> {
        Ok(self.distance(x)? <= MEMBERSHIP_TOL)
    }

    /// Reflection `2 P_C x - x`.
    pub fn reflect(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let p = self.project(x)?;
        Ok(x.iter().zip(&p).map(|(xi, pi)| 2.0 * pi - xi).collect())
    }

    /// Damped projection `(x + 2 eta P_C x) / (2 eta + 1)` for `eta > 0`.
    ///
    /// This is the proximal map of `eta * dist(., C)^2`.
    pub fn relaxed_project(&self, x: &[f64], eta: f64) -> Result<Vec<f64>, GeometryError> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "damping parameter must be positive and finite, got {eta}"
            )));
        }
        let p = self.project(x)?;
        let denom = 2.0 * eta + 1.0;
        Ok(x.iter()
            .zip(&p)
            .map(|(xi, pi)| (xi + 2.0 * eta * pi) / denom)
            .collect())
    }
}

/// Projection onto `{ (z, s) : s >= |z|^d }`.
///
/// For a point below the graph the projection lies on the boundary along
/// the ray through `z`, at radius `tau` solving
/// `g(tau) = tau + d tau^(d-1) (tau^d - s) = |z|`.
/// No root exists below `s^(1/d)` (there `g(tau) <= tau < |z|`) and `g` is
/// strictly increasing above it, so bisection with Newton acceleration on
/// the bracket `[max(0, s)^(1/d), max(|z|, lo)]` finds the unique root.
fn project_epigraph(n: usize, d: u32, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let (z, s) = (&x[..n], x[n]);
    let nz = vm::norm(z);
    let di = d as i32;
    if s >= nz.powi(di) {
        return Ok(x.to_vec());
    }
    let g = |tau: f64| tau + (d as f64) * tau.powi(di - 1) * (tau.powi(di) - s);
    let dg = |tau: f64| {
        1.0 + (d as f64) * (d as f64 - 1.0) * tau.powi(di - 2) * (tau.powi(di) - s)
            + (d as f64) * (d as f64) * tau.powi(2 * di - 2)
    };
    let mut lo = if s > 0.0 { s.powf(1.0 / d as f64) } else { 0.0 };
    let mut hi = nz.max(lo);
    let tol = ROOT_SOLVE_TOL * nz.max(1.0);
    let mut tau = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..ROOT_SOLVE_MAX_ITERS {
        let val = g(tau) - nz;
        residual = val.abs();
        if residual <= tol {
            break;
        }
        if val < 0.0 {
            lo = tau;
        } else {
            hi = tau;
        }
        let newton = tau - val / dg(tau);
        tau = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            residual = (g(tau) - nz).abs();
            break;
        }
    }
    if residual > 1e-10 * nz.max(1.0) {
        return Err(GeometryError::RootSolve { residual });
    }
    let mut p = if nz > 0.0 {
        vm::scale(z, tau / nz)
    } else {
        vec![0.0; n]
    };
    p.push(tau.powi(di));
    Ok(p)
}

/// An ordered, nonempty family of sets sharing one ambient dimension.
#[derive(Debug, Clone)]
pub struct SetCollection {
    sets: Vec<ConvexSet>,
    dim: usize,
}

impl SetCollection {
    pub fn new(sets: Vec<ConvexSet>) -> Result<Self, GeometryError> {
        let first = sets.first().ok_or_else(|| {
            GeometryError::InvalidParameter("set collection must be nonempty".into())
        })?;
        let dim = first.dim();
        for s in &sets {
            if s.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
        }
        Ok(SetCollection { sets, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sets(&self) -> &[ConvexSet] {
        &self.sets
    }

    pub fn get(&self, i: usize) -> &ConvexSet {
        &self.sets[i]
    }

    /// Distances to every member set, in order.
    pub fn distances(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.sets.iter().map(|s| s.distance(x)).collect()
    }

    /// `max_j dist(x, C_j)`, the feasibility residual of the family.
    pub fn max_distance(&self, x: &[f64]) -> Result<f64, GeometryError> {
        Ok(self
            .distances(x)?
            .into_iter()
            .fold(0.0f64, |a, b| a.max(b)))
    }
}
