//! Averaged nonexpansive operators and the constructors that combine them.
//!
//! An operator `T` is alpha-averaged when `T = (1 - alpha) I + alpha R`
//! for some nonexpansive `R` and `alpha` in (0,1). Projections are
//! 1/2-averaged, and the class is closed under the compositions and convex
//! combinations built here, with explicitly tracked constants.

use crate::geometry::{ConvexSet, GeometryError};
use crate::vecmath as vm;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Shared evaluation closure of an operator.
pub type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Shared distance function (1-Lipschitz) describing a set.
pub type DistFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("averagedness constant must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("invalid operator parameter: {0}")]
    BadParameter(String),
    #[error("operand dimensions disagree: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("operator list must be nonempty")]
    Empty,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A description of a fixed-point set precise enough to measure distances to.
#[derive(Clone)]
pub enum FixSet {
    SinglePoint(Vec<f64>),
    /// `{ anchor + t * direction : t >= 0 }`; `direction` need not be unit.
    HalfLine {
        anchor: Vec<f64>,
        direction: Vec<f64>,
    },
    /// The fixed points are exactly a projectable set.
    ViaSet(ConvexSet),
    /// A caller-supplied distance function.
    Custom(DistFn),
}

impl FixSet {
    /// Distance from `x` to the described set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            FixSet::SinglePoint(p) => vm::dist(x, p),
            FixSet::HalfLine { anchor, direction } => {
                let w = vm::sub(x, anchor);
                let t = (vm::dot(&w, direction) / vm::dot(direction, direction)).max(0.0);
                vm::dist(&w, &vm::scale(direction, t))
            }
            FixSet::ViaSet(set) => set
                .distance(x)
                .expect("projection failed while evaluating fixed-set distance"),
            FixSet::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for FixSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixSet::SinglePoint(p) => write!(f, "SinglePoint({p:?})"),
            FixSet::HalfLine { anchor, direction } => {
                write!(f, "HalfLine {{ anchor: {anchor:?}, direction: {direction:?} }}")
            }
            FixSet::ViaSet(s) => write!(f, "ViaSet({s:?})"),
            FixSet::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// An averaged operator together with its averagedness constant.
#[derive(Clone)]
pub struct AveragedOperator {
    eval: EvalFn,
    alpha: f64,
    label: String,
    known_fix: Option<FixSet>,
    dim: usize,
}

impl fmt::Debug for AveragedOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AveragedOperator")
            .field("label", &self.label)
            .field("alpha", &self.alpha)
            .field("dim", &self.dim)
            .field("known_fix", &self.known_fix)
            .finish()
    }
}

impl AveragedOperator {
    pub fn new(
        eval: EvalFn,
        alpha: f64,
        label: impl Into<String>,
        dim: usize,
    ) -> Result<Self, OperatorError> {
        if !(alpha.is_finite() && 0.0 < alpha && alpha < 1.0) {
            return Err(OperatorError::BadAlpha(alpha));
        }
        Ok(AveragedOperator {
            eval,
            alpha,
            label: label.into(),
            known_fix: None,
            dim,
        })
    }

    /// Attach a description of the fixed-point set.
    pub fn with_known_fix(mut self, fix: FixSet) -> Self {
        self.known_fix = Some(fix);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Evaluate `T x`. Panics on dimension mismatch; iteration drivers
    /// validate dimensions before the loop.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "operator {}: bad input dimension", self.label);
        (self.eval)(x)
    }

    /// `|x - T x|`.
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        vm::dist(x, &self.apply(x))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn known_fix(&self) -> Option<&FixSet> {
        self.known_fix.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// The identity, used internally to express relaxations as two-operator
/// weighted schemes. Carries a nominal constant of 1/2 (any constant is
/// valid for `I`).
pub(crate) fn identity_op(dim: usize) -> AveragedOperator {
    AveragedOperator::new(Arc::new(|x: &[f64]| x.to_vec()), 0.5, "id", dim)
        .expect("identity construction cannot fail")
}

/// Projection onto a set as a 1/2-averaged operator. Its fixed points are
/// the set itself.
pub fn projection_op(set: ConvexSet) -> AveragedOperator {
    let dim = set.dim();
    let label = "proj";
    let fix = FixSet::ViaSet(set.clone());
    let eval: EvalFn = Arc::new(move |x: &[f64]| {
        set.project(x)
            .expect("projection failed inside projection operator")
    });
    AveragedOperator::new(eval, 0.5, label, dim)
        .expect("0.5 is a valid constant")
        .with_known_fix(fix)
}

/// The two-set splitting step `x + P_D(2 P_C x - x) - P_C x`, which equals
/// `(I + R_D R_C)/2` and is firmly nonexpansive.
pub fn dr_op(c: &ConvexSet, d: &ConvexSet) -> Result<AveragedOperator, OperatorError> {
    if c.dim() != d.dim() {
        return Err(OperatorError::DimensionMismatch(c.dim(), d.dim()));
    }
    let dim = c.dim();
    let (c, d) = (c.clone(), d.clone());
    let eval: EvalFn = Arc::new(move |x: &[f64]| {
        let y = c.project(x).expect("projection onto first set failed");
        let reflected = vm::add_scaled(&vm::scale(&y, 2.0), -1.0, x);
        let z = d
            .project(&reflected)
            .expect("projection onto second set failed");
        let mut out = x.to_vec();
        vm::axpy(&mut out, 1.0, &z);
        vm::axpy(&mut out, -1.0, &y);
        out
    });
    AveragedOperator::new(eval, 0.5, "dr", dim)
}

/// The closed-form expression reported for the splitting operator of the
/// pair (vertical line, unit ball centered at (-1, 0)) in the plane:
/// `x -> (a - 1 - a x1, a x2)` with `a = 1 / max(1, |x - (1, 0)|)`.
///
/// Kept as a testable artifact; it disagrees with the stepwise composition
/// by exactly `x1` in the first coordinate (see the discrepancy report in
/// the acceptance suite). The composition is authoritative.
pub fn dr_closed_form_ball_line(x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), 2, "closed form is specific to the plane");
    let a = 1.0 / 1.0f64.max(((x[0] - 1.0).powi(2) + x[1] * x[1]).sqrt());
    vec![a - 1.0 - a * x[0], a * x[1]]
}

/// Relaxation `x + lambda (T x - x)` for `lambda` in (0, 1); the constant
/// scales to `lambda * alpha` and fixed points are unchanged.
pub fn km_relax(op: &AveragedOperator, lambda: f64) -> Result<AveragedOperator, OperatorError> {
    if !(lambda.is_finite() && 0.0 < lambda && lambda < 1.0) {
        return Err(OperatorError::BadParameter(format!(
            "relaxation parameter must lie in (0, 1), got {lambda}"
        )));
    }
    let inner = op.clone();
    let eval: EvalFn = Arc::new(move |x: &[f64]| {
        let tx = inner.apply(x);
        vm::add_scaled(x, lambda, &vm::sub(&tx, x))
    });
    let mut out = AveragedOperator::new(
        eval,
        lambda * op.alpha(),
        format!("km({lambda})*{}", op.label()),
        op.dim(),
    )?;
    if let Some(fix) = op.known_fix() {
        out = out.with_known_fix(fix.clone());
    }
    Ok(out)
}

/// Proximal map used by the forward-backward step.
#[derive(Clone, Debug)]
pub enum ProxMap {
    /// Indicator of a set: the prox is its projection, for any step size.
    Indicator(ConvexSet),
    /// The zero function: the prox is the identity.
    Zero,
}

impl ProxMap {
    pub fn apply(&self, x: &[f64], _step: f64) -> Result<Vec<f64>, GeometryError> {
        match self {
            ProxMap::Indicator(set) => set.project(x),
            ProxMap::Zero => Ok(x.to_vec()),
        }
    }
}

/// A variational inequality problem: find `x` with
/// `<F(x), y - x> + f(y) - f(x) >= 0` for all `y`, with `F` cocoercive.
#[derive(Clone)]
pub struct VipProblem {
    prox: ProxMap,
    forward: EvalFn,
    cocoercivity: f64,
    dim: usize,
}

impl fmt::Debug for VipProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VipProblem")
            .field("prox", &self.prox)
            .field("cocoercivity", &self.cocoercivity)
            .field("dim", &self.dim)
            .finish()
    }
}

impl VipProblem {
    /// Builds the problem and spot-tests the claimed cocoercivity modulus:
    /// `<F x - F y, x - y> >= beta |F x - F y|^2` on sampled pairs
    /// (slack 1e-9).
    pub fn new(
        prox: ProxMap,
        forward: EvalFn,
        cocoercivity: f64,
        dim: usize,
    ) -> Result<Self, OperatorError> {
        if !(cocoercivity.is_finite() && cocoercivity > 0.0) {
            return Err(OperatorError::BadParameter(format!(
                "cocoercivity modulus must be positive, got {cocoercivity}"
            )));
        }
        if let ProxMap::Indicator(set) = &prox {
            if set.dim() != dim {
                return Err(OperatorError::DimensionMismatch(set.dim(), dim));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..32 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let df = vm::sub(&forward(&x), &forward(&y));
            let lhs = vm::dot(&df, &vm::sub(&x, &y));
            let rhs = cocoercivity * vm::dot(&df, &df);
            if lhs < rhs - 1e-9 {
                return Err(OperatorError::BadParameter(format!(
                    "cocoercivity spot test failed: <dF, dx> = {lhs:.6e} < beta |dF|^2 = {rhs:.6e}"
                )));
            }
        }
        Ok(VipProblem {
            prox,
            forward,
            cocoercivity,
            dim,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (self.forward)(x)
    }

    pub fn prox(&self) -> &ProxMap {
        &self.prox
    }

    pub fn cocoercivity(&self) -> f64 {
        self.cocoercivity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|x - prox(x - gamma F(x))|`; zero exactly at solutions.
    pub fn residual(&self, x: &[f64], gamma: f64) -> f64 {
        let step = vm::add_scaled(x, -gamma, &self.forward(x));
        let p = self
            .prox
            .apply(&step, gamma)
            .expect("prox evaluation failed");
        vm::dist(x, &p)
    }
}

/// Forward-backward step `x -> prox(x - gamma F(x))` for `gamma` in
/// `(0, 2 beta)`.
///
/// The declared constant is `max(2/3, 1/(2 - gamma/(2 beta)))`: the
/// composition of the 1/2-averaged prox with the `gamma/(2 beta)`-averaged
/// forward step is `1/(2 - gamma/(2 beta))`-averaged, which stays below
/// 2/3 precisely when `gamma <= beta`.
pub fn forward_backward_op(
    problem: &VipProblem,
    gamma: f64,
) -> Result<AveragedOperator, OperatorError> {
    let beta = problem.cocoercivity();
    if !(gamma.is_finite() && 0.0 < gamma && gamma < 2.0 * beta) {
        return Err(OperatorError::BadParameter(format!(
            "step size must lie in (0, 2 beta) = (0, {}), got {gamma}",
            2.0 * beta
        )));
    }
    let a = gamma / (2.0 * beta);
    let alpha = (2.0f64 / 3.0).max(1.0 / (2.0 - a));
    let p = problem.clone();
    let eval: EvalFn = Arc::new(move |x: &[f64]| {
        let step = vm::add_scaled(x, -gamma, &p.forward(x));
        p.prox
            .apply(&step, gamma)
            .expect("prox evaluation failed inside forward-backward step")
    });
    AveragedOperator::new(eval, alpha, "fb", problem.dim())
}

/// Convex combination `beta P_C + (1 - beta) T_{C,D}` for `beta` in (0, 1).
/// Both terms are 1/2-averaged, so the combination is as well. No fixed-point
/// description is attached: when `C` and `D` do not intersect the fixed
/// points move with `beta` and are best located empirically.
pub fn regularized_dr_op(
    c: &ConvexSet,
    d: &ConvexSet,
    beta: f64,
) -> Result<AveragedOperator, OperatorError> {
    if !(beta.is_finite() && 0.0 < beta && beta < 1.0) {
        return Err(OperatorError::BadParameter(format!(
            "regularization weight must lie in (0, 1), got {beta}"
        )));
    }
    let base = dr_op(c, d)?;
    let cset = c.clone();
    let eval: EvalFn = Arc::new(move |x: &[f64]| {
        let px = cset.project(x).expect("projection onto first set failed");
        let tx = base.apply(x);
        px.iter()
            .zip(&tx)
            .map(|(p, t)| beta * p + (1.0 - beta) * t)
            .collect()
    });
    AveragedOperator::new(eval, 0.5, "reg_dr", c.dim())
}

/// Composition of `p` firmly nonexpansive (1/2-averaged) operators, applied
/// left to right (`ops[0]` first). The result is `p/(p+1)`-averaged.
pub fn compose_dr_chain(ops: &[AveragedOperator]) -> Result<AveragedOperator, OperatorError> {
    if ops.is_empty() {
        return Err(OperatorError::Empty);
    }
    let dim = ops[0].dim();
    for op in ops {
        if op.dim() != dim {
            return Err(OperatorError::DimensionMismatch(dim, op.dim()));
        }
        if (op.alpha() - 0.5).abs() > 1e-12 {
            return Err(OperatorError::BadParameter(format!(
                "chain operands must be 1/2-averaged, got alpha = {}",
                op.alpha()
            )));
        }
    }
    let p = ops.len() as f64;
    let chain: Vec<AveragedOperator> = ops.to_vec();
    let eval: EvalFn = Arc::new(move |x: &[f64]| {
        let mut cur = x.to_vec();
        for op in &chain {
            cur = op.apply(&cur);
        }
        cur
    });
    AveragedOperator::new(eval, p / (p + 1.0), format!("chain({})", ops.len()), dim)
}

/// Rescales each `T_j` to `I + (alpha_bar / alpha_j)(T_j - I)`, which is
/// `alpha_bar`-averaged with the same fixed points and residuals scaled by
/// `alpha_bar / alpha_j`. Requires `max_j alpha_j <= alpha_bar < 1`; with
/// equality the operator with the largest constant passes through unchanged.
pub fn extrapolation_transform(
    ops: &[AveragedOperator],
    alpha_bar: f64,
) -> Result<Vec<AveragedOperator>, OperatorError> {
    if ops.is_empty() {
        return Err(OperatorError::Empty);
    }
    let max_alpha = ops.iter().map(|t| t.alpha()).fold(0.0f64, f64::max);
    if !(alpha_bar.is_finite() && alpha_bar >= max_alpha && alpha_bar < 1.0) {
        return Err(OperatorError::BadParameter(format!(
            "extrapolation target must lie in [max alpha_j, 1) = [{max_alpha}, 1), got {alpha_bar}"
        )));
    }
    ops.iter()
        .map(|op| {
            let c = alpha_bar / op.alpha();
            let inner = op.clone();
            let eval: EvalFn = Arc::new(move |x: &[f64]| {
                let tx = inner.apply(x);
                vm::add_scaled(x, c, &vm::sub(&tx, x))
            });
            let mut out = AveragedOperator::new(
                eval,
                alpha_bar,
                format!("extrap*{}", op.label()),
                op.dim(),
            )?;
            if let Some(fix) = op.known_fix() {
                out = out.with_known_fix(fix.clone());
            }
            Ok(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexSet;

    fn sample(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-10.0..10.0)).collect()
    }

    /// The averagedness characterization:
    /// `|Tx - Ty|^2 + ((1-a)/a) |(I-T)x - (I-T)y|^2 <= |x - y|^2`.
    fn assert_averaged(op: &AveragedOperator, pairs: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = (1.0 - op.alpha()) / op.alpha();
        for _ in 0..pairs {
            let x = sample(&mut rng, op.dim());
            let y = sample(&mut rng, op.dim());
            let tx = op.apply(&x);
            let ty = op.apply(&y);
            let rx = vm::sub(&x, &tx);
            let ry = vm::sub(&y, &ty);
            let lhs = vm::dist(&tx, &ty).powi(2) + k * vm::dist(&rx, &ry).powi(2);
            let rhs = vm::dist(&x, &y).powi(2);
            assert!(
                lhs <= rhs + 1e-8,
                "averagedness failed for {} (alpha {}): {lhs} > {rhs}",
                op.label(),
                op.alpha()
            );
        }
    }

    fn plane_sets() -> (ConvexSet, ConvexSet) {
        let line = ConvexSet::hyperplane(vec![1.0, 0.0], 0.0).unwrap();
        let ball = ConvexSet::ball(vec![-1.0, 0.0], 1.0).unwrap();
        (line, ball)
    }

    #[test]
    fn constructor_validation() {
        let (line, ball) = plane_sets();
        let t = dr_op(&line, &ball).unwrap();
        assert!(km_relax(&t, 0.0).is_err());
        assert!(km_relax(&t, 1.0).is_err());
        assert!(regularized_dr_op(&line, &ball, 0.0).is_err());
        assert!(regularized_dr_op(&line, &ball, 1.0).is_err());
        assert!(compose_dr_chain(&[]).is_err());
        let bad_dim = ConvexSet::ball(vec![0.0], 1.0).unwrap();
        assert!(dr_op(&line, &bad_dim).is_err());
        assert!(extrapolation_transform(&[t.clone()], 0.4).is_err());
        assert!(extrapolation_transform(&[t.clone()], 1.0).is_err());
        let relaxed = km_relax(&t, 0.5).unwrap();
        assert!((relaxed.alpha() - 0.25).abs() < 1e-15);
        // Chains only accept firmly nonexpansive operands.
        assert!(compose_dr_chain(&[relaxed]).is_err());
    }

    #[test]
    fn frozen_splitting_step_between_separated_halfspaces() {
        // C = {x1 <= -1}, D = {x1 >= 1}: the step translates by the gap.
        let c = ConvexSet::halfspace(vec![1.0, 0.0], -1.0).unwrap();
        let d = ConvexSet::halfspace(vec![-1.0, 0.0], -1.0).unwrap();
        let t = dr_op(&c, &d).unwrap();
        assert_eq!(t.apply(&[0.0, 0.0]), vec![2.0, 0.0]);
        assert_eq!(t.apply(&[5.0, 3.0]), vec![7.0, 3.0]);

        // The regularized variant pulls back toward C: at beta = 1/2 the
        // first coordinate maps u -> u/2 + 1/2.
        let r = regularized_dr_op(&c, &d, 0.5).unwrap();
        assert_eq!(r.apply(&[0.0, 0.0]), vec![0.5, 0.0]);
        let fixed = r.apply(&[1.0, 0.0]);
        assert!((fixed[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_ball_line_splitting_values() {
        let (line, ball) = plane_sets();
        let t = dr_op(&line, &ball).unwrap();
        let p = t.apply(&[1.0, 1.0]);
        assert!(vm::dist(&p, &[0.0, 1.0]) < 1e-14, "got {p:?}");
        let q = t.apply(&[-2.0, 1.0]);
        let s10 = 10.0f64.sqrt();
        let expect = [(1.0 - 1.0 / s10) * -3.0, 1.0 / s10];
        assert!(vm::dist(&q, &expect) < 1e-14, "got {q:?}, want {expect:?}");

        // The printed closed form differs by x1 in the first coordinate.
        let r = dr_closed_form_ball_line(&[1.0, 1.0]);
        assert!(vm::dist(&r, &[-1.0, 1.0]) < 1e-14, "got {r:?}");
        let s = dr_closed_form_ball_line(&[-0.5, 0.0]);
        assert!(vm::dist(&s, &[0.0, 0.0]) < 1e-14, "got {s:?}");
    }

    #[test]
    fn ball_line_ray_is_fixed() {
        let (line, ball) = plane_sets();
        let t = dr_op(&line, &ball).unwrap();
        for i in 0..100 {
            let u = -5.0 * i as f64 / 99.0;
            let x = [u, 0.0];
            assert!(
                t.residual_norm(&x) <= 1e-10,
                "ray point {x:?} moved by {}",
                t.residual_norm(&x)
            );
        }
    }

    #[test]
    fn epigraph_pair_fixes_vertical_ray() {
        let c = ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap();
        let d = ConvexSet::epigraph_power_norm(1, 4).unwrap();
        let t = dr_op(&c, &d).unwrap();
        for i in 0..=10 {
            let x = [0.0, i as f64 * 0.5];
            assert!(t.residual_norm(&x) <= 1e-10, "ray point {x:?} moved");
        }
    }

    #[test]
    fn forward_backward_solves_complementarity_toy() {
        // f the indicator of {x >= 0}, F(x) = x - 1: the unique solution is 1.
        let pos = ConvexSet::halfspace(vec![-1.0], 0.0).unwrap();
        let problem = VipProblem::new(
            ProxMap::Indicator(pos),
            Arc::new(|x: &[f64]| vec![x[0] - 1.0]),
            1.0,
            1,
        )
        .unwrap();
        let t = forward_backward_op(&problem, 1.0).unwrap();
        assert!((t.alpha() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.apply(&[5.0]), vec![1.0]);
        assert_eq!(t.apply(&[-3.0]), vec![1.0]);
        assert!(problem.residual(&[1.0], 1.0) < 1e-15);
        assert!(problem.residual(&[2.0], 1.0) > 0.9);

        // Step sizes: valid up to 2 beta, exclusive.
        assert!(forward_backward_op(&problem, 1.9).is_ok());
        assert!(forward_backward_op(&problem, 2.5).is_err());
        assert!(forward_backward_op(&problem, 0.0).is_err());
        // Above beta the declared constant grows past 2/3.
        let wide = forward_backward_op(&problem, 1.9).unwrap();
        assert!((wide.alpha() - 1.0 / (2.0 - 0.95)).abs() < 1e-15);

        // A claimed modulus the map cannot support is rejected.
        assert!(VipProblem::new(
            ProxMap::Zero,
            Arc::new(|x: &[f64]| vec![3.0 * x[0]]),
            1.0,
            1
        )
        .is_err());
    }

    #[test]
    fn extrapolation_rescales_residuals() {
        let ball = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = projection_op(ball);
        let bar = extrapolation_transform(std::slice::from_ref(&p), 0.75).unwrap();
        assert_eq!(bar.len(), 1);
        assert!((bar[0].alpha() - 0.75).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = sample(&mut rng, 2);
            // (3/2) P x - (1/2) x, and the residual scales by 3/2.
            let want = vm::add_scaled(&vm::scale(&p.apply(&x), 1.5), -0.5, &x);
            assert!(vm::dist(&bar[0].apply(&x), &want) <= 1e-12);
            assert!(
                (bar[0].residual_norm(&x) - 1.5 * p.residual_norm(&x)).abs() <= 1e-12,
                "residual identity failed"
            );
        }
        // Equal target constant: the transform is the identity on that op.
        let same = extrapolation_transform(std::slice::from_ref(&p), 0.5).unwrap();
        let x = [3.0, -1.0];
        assert!(vm::dist(&same[0].apply(&x), &p.apply(&x)) <= 1e-15);
    }

    #[test]
    fn averagedness_characterization_sampled() {
        let (line, ball) = plane_sets();
        let proj = projection_op(ball.clone());
        let t = dr_op(&line, &ball).unwrap();
        let km = km_relax(&t, 0.7).unwrap();
        let reg = regularized_dr_op(&line, &ball, 0.3).unwrap();
        let chain2 = compose_dr_chain(&[t.clone(), proj.clone()]).unwrap();
        let extrap = extrapolation_transform(&[proj.clone()], 0.8)
            .unwrap()
            .remove(0);
        let pos = ConvexSet::halfspace(vec![-1.0, 0.0], 0.0).unwrap();
        let problem = VipProblem::new(
            ProxMap::Indicator(pos),
            Arc::new(|x: &[f64]| vec![x[0] - 1.0, 0.5 * x[1]]),
            1.0,
            2,
        )
        .unwrap();
        let fb = forward_backward_op(&problem, 1.5).unwrap();
        for (i, op) in [proj, t, km, reg, chain2, extrap, fb].iter().enumerate() {
            assert_averaged(op, 50, 100 + i as u64);
        }
    }

    #[test]
    fn fix_set_distances() {
        let fix = FixSet::HalfLine {
            anchor: vec![0.0, 0.0],
            direction: vec![-1.0, 0.0],
        };
        // Distance is |x| ahead of the anchor and |x2| along the ray.
        assert!((fix.distance(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
        assert!((fix.distance(&[-3.0, 4.0]) - 4.0).abs() < 1e-15);
        let single = FixSet::SinglePoint(vec![1.0]);
        assert_eq!(single.distance(&[4.0]), 3.0);
        let via = FixSet::ViaSet(ConvexSet::ball(vec![0.0], 1.0).unwrap());
        assert_eq!(via.distance(&[3.0]), 2.0);
        let custom = FixSet::Custom(Arc::new(|x: &[f64]| x[0].abs()));
        assert_eq!(custom.distance(&[-2.5]), 2.5);
    }
}
