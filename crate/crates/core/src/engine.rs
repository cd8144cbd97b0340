//! Iteration drivers for weighted fixed-point schemes.
//!
//! All algorithms here are instances of one pattern: at step `t` a set of
//! active operators is evaluated at the current iterate and the next iterate
//! is a (possibly extrapolated) combination `x + sum_j w_j (T_j x - x)`.
//! The driver records a trace: dense residuals, optionally dense distances
//! to a fixed set or to constraint sets, and a thinned list of iterates.
//!
//! The recorded residual series has two flavors. `residuals[t]` is the step
//! norm `|x^{t+1} - x^t|`; `op_residuals[t]` is `max_j |x^t - T_j x^t|` over
//! the operators active at step `t`. Stopping uses the latter: a weighted
//! combination can have a tiny step while individual operators still move
//! points, and the operator residual bounds the step norm from above.

use crate::geometry::{ConvexSet, SetCollection};
use crate::operators::{
    forward_backward_op, identity_op, AveragedOperator, FixSet, OperatorError, VipProblem,
};
use crate::vecmath as vm;
use std::sync::Arc;
use thiserror::Error;

/// Residual threshold at which the limit-proxy continuation stops early.
pub const LIMIT_PROXY_RESIDUAL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid iteration setup: {0}")]
    Config(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("numerical check failed at step {step}: {what} (violation {magnitude:.3e})")]
    Numerical {
        what: String,
        step: usize,
        magnitude: f64,
    },
}

/// When to stop iterating.
#[derive(Clone, Debug)]
pub struct StoppingRule {
    pub max_iters: usize,
    /// Stop once the active-operator residual falls to or below this value.
    pub residual_tol: f64,
    /// Optionally stop once the distance to the monitored fixed set falls
    /// to or below this value.
    pub fix_dist_tol: Option<f64>,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            max_iters: 1_000_000,
            residual_tol: 1e-13,
            fix_dist_tol: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum StopReason {
    MaxIters,
    ResidualTol,
    FixDistTol,
}

/// Options shared by all drivers.
#[derive(Clone, Default)]
pub struct RunOptions {
    pub stop: StoppingRule,
    /// When present, the distance to this set is recorded densely and
    /// monitored for the optional `fix_dist_tol` stop.
    pub fejer_target: Option<FixSet>,
    /// When present, distances to each member set are recorded densely.
    pub record_sets: Option<SetCollection>,
    /// Continue past the horizon to produce a limit proxy.
    pub limit_proxy: bool,
    /// Total proxy budget as a multiple of `max_iters` (the run itself
    /// counts toward it).
    pub proxy_factor: usize,
}

impl RunOptions {
    pub fn new(stop: StoppingRule) -> Self {
        RunOptions {
            stop,
            fejer_target: None,
            record_sets: None,
            limit_proxy: true,
            proxy_factor: 10,
        }
    }

    pub fn horizon(max_iters: usize) -> Self {
        Self::new(StoppingRule {
            max_iters,
            ..StoppingRule::default()
        })
    }
}

/// Substitute for the unobservable true limit: the state reached after
/// continuing the same iteration to `proxy_factor * max_iters` total steps,
/// or until the operator residual falls below [`LIMIT_PROXY_RESIDUAL`].
#[derive(Clone, Debug)]
pub struct LimitProxy {
    pub point: Vec<f64>,
    pub total_steps: usize,
    pub residual: f64,
}

/// Dense per-step snapshot of a damped splitting run; `x` is the iterate
/// the step started from.
#[derive(Clone, Debug)]
pub struct DampedStep {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: f64,
}

/// Record of one run.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub label: String,
    /// Thinned iterates `(t, x^t)`: every step up to t = 100, then every
    /// ceil(t/100)-th step, plus the final state.
    pub iterates: Vec<(usize, Vec<f64>)>,
    /// `|x^{t+1} - x^t|` for every executed step.
    pub residuals: Vec<f64>,
    /// `max_j |x^t - T_j x^t|` over active operators, for every step.
    pub op_residuals: Vec<f64>,
    /// Distance to the monitored fixed set at `x^0 .. x^steps` (dense).
    pub fix_distances: Option<Vec<f64>>,
    /// Distances to each recorded set at `x^0 .. x^steps` (dense).
    pub per_set_distances: Option<Vec<Vec<f64>>>,
    /// Dense inner-point snapshots of damped runs.
    pub damped_steps: Option<Vec<DampedStep>>,
    pub final_state: Vec<f64>,
    pub steps: usize,
    pub stop: Option<StopReason>,
    pub limit_proxy: Option<LimitProxy>,
}

impl Trace {
    /// `(t, |x^t - x_bar|)` over the recorded iterates.
    pub fn errors_to(&self, x_bar: &[f64]) -> Vec<(usize, f64)> {
        self.iterates
            .iter()
            .map(|(t, x)| (*t, vm::dist(x, x_bar)))
            .collect()
    }

    /// Errors against the limit proxy, when one was computed.
    pub fn errors_to_proxy(&self) -> Option<Vec<(usize, f64)>> {
        self.limit_proxy.as_ref().map(|p| self.errors_to(&p.point))
    }
}

/// Whether iterate `t` is kept by the thinning rule.
pub fn record_iterate_at(t: usize) -> bool {
    t < 100 || t % t.div_ceil(100) == 0
}

/// Per-step weights over a family of operators.
#[derive(Clone)]
pub enum ScheduleKind {
    /// The same weights at every step.
    Constant(Vec<f64>),
    /// One-hot weights visiting the listed operator indices in a cycle.
    CyclicOneHot(Vec<usize>),
    /// Arbitrary time-varying weights.
    Custom(Arc<dyn Fn(usize) -> Vec<f64> + Send + Sync>),
}

#[derive(Clone)]
pub struct WeightSchedule {
    kind: ScheduleKind,
    span: usize,
}

impl WeightSchedule {
    pub fn constant(weights: Vec<f64>) -> Self {
        WeightSchedule {
            kind: ScheduleKind::Constant(weights),
            span: 1,
        }
    }

    pub fn cyclic(order: Vec<usize>) -> Self {
        let span = order.len().max(1);
        WeightSchedule {
            kind: ScheduleKind::CyclicOneHot(order),
            span,
        }
    }

    /// One-hot cycle `0, 1, .., m-1`.
    pub fn cyclic_sweep(m: usize) -> Self {
        Self::cyclic((0..m).collect())
    }

    /// `span` is the window length over which every operator must receive
    /// positive weight at least once.
    pub fn custom(f: Arc<dyn Fn(usize) -> Vec<f64> + Send + Sync>, span: usize) -> Self {
        WeightSchedule {
            kind: ScheduleKind::Custom(f),
            span: span.max(1),
        }
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn weights_at(&self, t: usize, num_ops: usize) -> Vec<f64> {
        match &self.kind {
            ScheduleKind::Constant(w) => w.clone(),
            ScheduleKind::CyclicOneHot(order) => {
                let mut w = vec![0.0; num_ops];
                if !order.is_empty() {
                    let j = order[t % order.len()];
                    if j < num_ops {
                        w[j] = 1.0;
                    }
                }
                w
            }
            ScheduleKind::Custom(f) => f(t),
        }
    }
}

/// Result of probing a schedule against the assumptions of weighted
/// quasi-cyclic iteration: convex weights, a positive floor on the weights
/// actually used, and full coverage on every span-length window.
#[derive(Clone, Debug)]
pub struct ScheduleReport {
    pub valid: bool,
    /// Smallest positive weight observed on the probe window.
    pub sigma: f64,
    pub coverage_ok: bool,
    pub max_weight_sum_residual: f64,
    pub issues: Vec<String>,
}

/// Probes `10 * span` steps of the schedule.
pub fn validate_schedule(schedule: &WeightSchedule, num_ops: usize) -> ScheduleReport {
    let mut issues = Vec::new();
    let mut sigma = f64::INFINITY;
    let mut max_sum_resid = 0.0f64;
    let mut coverage_ok = true;
    let probe_windows = 10;
    for window in 0..probe_windows {
        let mut seen = vec![false; num_ops];
        for k in 0..schedule.span() {
            let t = window * schedule.span() + k;
            let w = schedule.weights_at(t, num_ops);
            if w.len() != num_ops {
                issues.push(format!(
                    "step {t}: weight vector has length {}, expected {num_ops}",
                    w.len()
                ));
                continue;
            }
            let mut sum = 0.0;
            for (j, &wj) in w.iter().enumerate() {
                if !wj.is_finite() || wj < 0.0 {
                    issues.push(format!("step {t}: weight {j} is {wj}"));
                }
                if wj > 0.0 {
                    sigma = sigma.min(wj);
                    seen[j] = true;
                }
                sum += wj;
            }
            let resid = (sum - 1.0).abs();
            max_sum_resid = max_sum_resid.max(resid);
            if resid > 1e-12 {
                issues.push(format!("step {t}: weights sum to {sum}, expected 1"));
            }
        }
        if !seen.iter().all(|&s| s) {
            coverage_ok = false;
            let missing: Vec<usize> = (0..num_ops).filter(|&j| !seen[j]).collect();
            issues.push(format!(
                "window {window}: operators {missing:?} never receive positive weight"
            ));
        }
    }
    if !sigma.is_finite() {
        sigma = 0.0;
        issues.push("no positive weight observed on the probe window".into());
    }
    ScheduleReport {
        valid: issues.is_empty(),
        sigma,
        coverage_ok,
        max_weight_sum_residual: max_sum_resid,
        issues,
    }
}

struct StepOut {
    next: Vec<f64>,
    op_residual: f64,
    damped: Option<DampedStep>,
}

fn check_x0(x0: &[f64], dim: usize) -> Result<(), EngineError> {
    if x0.len() != dim {
        return Err(EngineError::Config(format!(
            "starting point has dimension {}, operators expect {dim}",
            x0.len()
        )));
    }
    if !vm::all_finite(x0) {
        return Err(EngineError::Config(
            "starting point has non-finite coordinates".into(),
        ));
    }
    Ok(())
}

fn drive<F>(
    label: &str,
    x0: &[f64],
    opts: &RunOptions,
    record_sets: Option<&SetCollection>,
    fejer: Option<&FixSet>,
    mut step: F,
) -> Result<Trace, EngineError>
where
    F: FnMut(usize, &[f64]) -> Result<StepOut, EngineError>,
{
    let mut trace = Trace {
        label: label.to_string(),
        fix_distances: fejer.map(|_| Vec::new()),
        per_set_distances: record_sets.map(|_| Vec::new()),
        ..Trace::default()
    };
    let mut x = x0.to_vec();
    let mut stop = StopReason::MaxIters;
    let mut steps = 0;
    let mut last_op_residual = f64::INFINITY;
    for t in 0..opts.stop.max_iters {
        if record_iterate_at(t) {
            trace.iterates.push((t, x.clone()));
        }
        if let (Some(f), Some(d)) = (fejer, trace.fix_distances.as_mut()) {
            d.push(f.distance(&x));
        }
        if let (Some(s), Some(d)) = (record_sets, trace.per_set_distances.as_mut()) {
            d.push(s.distances(&x)?);
        }
        let out = step(t, &x)?;
        trace.residuals.push(vm::dist(&out.next, &x));
        trace.op_residuals.push(out.op_residual);
        if let Some(ds) = out.damped {
            trace.damped_steps.get_or_insert_with(Vec::new).push(ds);
        }
        last_op_residual = out.op_residual;
        x = out.next;
        steps = t + 1;
        if out.op_residual <= opts.stop.residual_tol {
            stop = StopReason::ResidualTol;
            break;
        }
        if let (Some(tol), Some(f)) = (opts.stop.fix_dist_tol, fejer) {
            if f.distance(&x) <= tol {
                stop = StopReason::FixDistTol;
                break;
            }
        }
    }
    // Final state, always recorded.
    if trace.iterates.last().map(|(t, _)| *t) != Some(steps) {
        trace.iterates.push((steps, x.clone()));
    }
    if let (Some(f), Some(d)) = (fejer, trace.fix_distances.as_mut()) {
        d.push(f.distance(&x));
    }
    if let (Some(s), Some(d)) = (record_sets, trace.per_set_distances.as_mut()) {
        d.push(s.distances(&x)?);
    }
    trace.steps = steps;
    trace.stop = Some(stop);
    trace.final_state = x.clone();

    if opts.limit_proxy {
        let budget = opts.proxy_factor.max(1) * opts.stop.max_iters;
        let mut t = steps;
        while t < budget && last_op_residual > LIMIT_PROXY_RESIDUAL {
            let out = step(t, &x)?;
            last_op_residual = out.op_residual;
            x = out.next;
            t += 1;
        }
        trace.limit_proxy = Some(LimitProxy {
            point: x,
            total_steps: t,
            residual: last_op_residual,
        });
    }
    Ok(trace)
}

fn common_dim(ops: &[AveragedOperator]) -> Result<usize, EngineError> {
    let first = ops
        .first()
        .ok_or_else(|| EngineError::Config("operator list must be nonempty".into()))?;
    for op in ops {
        if op.dim() != first.dim() {
            return Err(EngineError::Config(format!(
                "operators {} and {} live in different dimensions",
                first.label(),
                op.label()
            )));
        }
    }
    Ok(first.dim())
}

/// Runs `x^{t+1} = sum_j w_{j,t} T_j(x^t)` with convex weights.
pub fn run_quasi_cyclic(
    ops: &[AveragedOperator],
    schedule: &WeightSchedule,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<Trace, EngineError> {
    let dim = common_dim(ops)?;
    check_x0(x0, dim)?;
    let report = validate_schedule(schedule, ops.len());
    if !report.valid {
        return Err(EngineError::Config(format!(
            "schedule rejected: {}",
            report.issues.join("; ")
        )));
    }
    drive(
        "quasi_cyclic",
        x0,
        opts,
        opts.record_sets.as_ref(),
        opts.fejer_target.as_ref(),
        |t, x| {
            let w = schedule.weights_at(t, ops.len());
            let mut next = x.to_vec();
            let mut op_residual = 0.0f64;
            for (j, &wj) in w.iter().enumerate() {
                if wj == 0.0 {
                    continue;
                }
                let tx = ops[j].apply(x);
                op_residual = op_residual.max(vm::dist(&tx, x));
                vm::axpy(&mut next, wj, &vm::sub(&tx, x));
            }
            Ok(StepOut {
                next,
                op_residual,
                damped: None,
            })
        },
    )
}

/// Runs the extrapolated scheme `x^{t+1} = w_{0,t} x^t + sum_j w_{j,t} T_j(x^t)`
/// where `w_{0,t} = 1 - sum_j w_{j,t}` may be negative. Admissible weights
/// satisfy `w_{j,t} in [0, alpha_bar/alpha_j]` with
/// `sum_j alpha_j w_{j,t} < alpha_bar < 1`; running it is equivalent to the
/// plain scheme on the extrapolated operators with rescaled weights.
pub fn run_extrapolated(
    ops: &[AveragedOperator],
    schedule: &WeightSchedule,
    alpha_bar: f64,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<Trace, EngineError> {
    let dim = common_dim(ops)?;
    check_x0(x0, dim)?;
    let max_alpha = ops.iter().map(|t| t.alpha()).fold(0.0f64, f64::max);
    if !(alpha_bar.is_finite() && alpha_bar >= max_alpha && alpha_bar < 1.0) {
        return Err(EngineError::Config(format!(
            "extrapolation target must lie in [{max_alpha}, 1), got {alpha_bar}"
        )));
    }
    // Probe the weight conditions over ten span windows.
    for t in 0..10 * schedule.span() {
        let w = schedule.weights_at(t, ops.len());
        if w.len() != ops.len() {
            return Err(EngineError::Config(format!(
                "step {t}: weight vector has length {}, expected {}",
                w.len(),
                ops.len()
            )));
        }
        let mut weighted_alpha = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            let cap = alpha_bar / ops[j].alpha();
            if !(0.0..=cap + 1e-12).contains(&wj) {
                return Err(EngineError::Config(format!(
                    "step {t}: weight {j} = {wj} outside [0, alpha_bar/alpha_{j}] = [0, {cap}]"
                )));
            }
            weighted_alpha += ops[j].alpha() * wj;
        }
        if weighted_alpha >= alpha_bar {
            return Err(EngineError::Config(format!(
                "step {t}: sum_j alpha_j w_j = {weighted_alpha} must stay below alpha_bar = {alpha_bar}"
            )));
        }
    }
    drive(
        "extrapolated",
        x0,
        opts,
        opts.record_sets.as_ref(),
        opts.fejer_target.as_ref(),
        |t, x| {
            let w = schedule.weights_at(t, ops.len());
            let mut next = x.to_vec();
            let mut op_residual = 0.0f64;
            for (j, &wj) in w.iter().enumerate() {
                if wj == 0.0 {
                    continue;
                }
                let tx = ops[j].apply(x);
                op_residual = op_residual.max(vm::dist(&tx, x));
                vm::axpy(&mut next, wj, &vm::sub(&tx, x));
            }
            Ok(StepOut {
                next,
                op_residual,
                damped: None,
            })
        },
    )
}

/// Relaxation sizes over time.
#[derive(Clone)]
pub enum LambdaSchedule {
    Constant(f64),
    /// Repeats the listed values.
    Cyclic(Vec<f64>),
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl LambdaSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            LambdaSchedule::Constant(l) => *l,
            LambdaSchedule::Cyclic(v) => v[t % v.len()],
            LambdaSchedule::Custom(f) => f(t),
        }
    }

    fn probe_len(&self) -> usize {
        match self {
            LambdaSchedule::Constant(_) => 1,
            LambdaSchedule::Cyclic(v) => v.len(),
            LambdaSchedule::Custom(_) => 1000,
        }
    }

    /// Every probed value must lie in `(lo, hi]`; returns the smallest.
    fn validate(&self, lo: f64, hi: f64, what: &str) -> Result<f64, EngineError> {
        if let LambdaSchedule::Cyclic(v) = self {
            if v.is_empty() {
                return Err(EngineError::Config(format!(
                    "{what}: cyclic relaxation list must be nonempty"
                )));
            }
        }
        let mut inf = f64::INFINITY;
        for t in 0..self.probe_len() {
            let l = self.at(t);
            if !(l.is_finite() && l > lo && l <= hi) {
                return Err(EngineError::Config(format!(
                    "{what}: relaxation parameter at step {t} is {l}, expected ({lo}, {hi}]"
                )));
            }
            inf = inf.min(l);
        }
        Ok(inf)
    }
}

/// Runs `x^{t+1} = x^t + lambda_t (T x^t - x^t)` with `lambda_t` in (0, 1),
/// expressed as the two-operator weighted scheme over `{I, T}`.
pub fn run_km(
    op: &AveragedOperator,
    lambdas: &LambdaSchedule,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<Trace, EngineError> {
    // (0, 1) exclusive: probe with an upper bound just below 1.
    let inf = lambdas.validate(0.0, 1.0, "km")?;
    for t in 0..lambdas.probe_len() {
        let l = lambdas.at(t);
        if l >= 1.0 {
            return Err(EngineError::Config(format!(
                "km: relaxation parameter at step {t} is {l}, expected strictly below 1"
            )));
        }
    }
    debug_assert!(inf > 0.0);
    let ops = vec![identity_op(op.dim()), op.clone()];
    let lam = lambdas.clone();
    let schedule = WeightSchedule::custom(
        Arc::new(move |t| {
            let l = lam.at(t);
            vec![1.0 - l, l]
        }),
        1,
    );
    let mut opts = opts.clone();
    if opts.fejer_target.is_none() {
        opts.fejer_target = op.known_fix().cloned();
    }
    let mut trace = run_quasi_cyclic(&ops, &schedule, x0, &opts)?;
    trace.label = format!("km[{}]", op.label());
    Ok(trace)
}

/// Forward-backward iteration with relaxation: the operator residual stored
/// in the trace is exactly the fixed-point residual
/// `|x - prox(x - gamma F x)|`, which vanishes at solutions of the
/// variational inequality.
pub fn run_forward_backward(
    problem: &VipProblem,
    gamma: f64,
    lambdas: &LambdaSchedule,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<Trace, EngineError> {
    let op = forward_backward_op(problem, gamma)?;
    let mut trace = run_km(&op, lambdas, x0, opts)?;
    trace.label = "forward_backward".into();
    Ok(trace)
}

/// Pairwise splitting over a family of sets: step `t` applies the two-set
/// splitting operator of the pair `tuples[t mod p]`. Distances to every
/// set are recorded densely.
pub fn run_multiset_dr(
    sets: &SetCollection,
    tuples: &[(usize, usize)],
    x0: &[f64],
    opts: &RunOptions,
) -> Result<Trace, EngineError> {
    check_x0(x0, sets.dim())?;
    if tuples.is_empty() {
        return Err(EngineError::Config("tuple list must be nonempty".into()));
    }
    let m = sets.len();
    let mut covered = vec![false; m];
    for &(i, j) in tuples {
        if i >= m || j >= m {
            return Err(EngineError::Config(format!(
                "tuple ({i}, {j}) references a set outside 0..{m}"
            )));
        }
        if i == j {
            return Err(EngineError::Config(format!(
                "tuple ({i}, {j}) must pair two distinct sets"
            )));
        }
        covered[i] = true;
        covered[j] = true;
    }
    if !covered.iter().all(|&c| c) {
        let missing: Vec<usize> = (0..m).filter(|&k| !covered[k]).collect();
        return Err(EngineError::Config(format!(
            "sets {missing:?} appear in no tuple"
        )));
    }
    drive(
        "multiset_dr",
        x0,
        opts,
        Some(sets),
        opts.fejer_target.as_ref(),
        |t, x| {
            let (i, j) = tuples[t % tuples.len()];
            let y = sets.get(i).project(x)?;
            let refl = vm::add_scaled(&vm::scale(&y, 2.0), -1.0, x);
            let z = sets.get(j).project(&refl)?;
            let mut next = x.to_vec();
            vm::axpy(&mut next, 1.0, &z);
            vm::axpy(&mut next, -1.0, &y);
            let op_residual = vm::dist(&z, &y);
            Ok(StepOut {
                next,
                op_residual,
                damped: None,
            })
        },
    )
}

/// Cyclic pair order `(0,1), (1,2), .., (m-1, 0)`.
pub fn cyclic_tuples(m: usize) -> Vec<(usize, usize)> {
    (0..m).map(|i| (i, (i + 1) % m)).collect()
}

/// Anchored pair order `(0,1), (0,2), .., (0, m-1)`.
pub fn anchored_tuples(m: usize) -> Vec<(usize, usize)> {
    (1..m).map(|j| (0, j)).collect()
}

/// Damped two-set splitting: projections are replaced by damped projections
/// `P^eta = (I + 2 eta P)/(2 eta + 1)` and the update is relaxed by
/// `lambda_t` in (0, 2].
///
/// Each step checks the two contraction identities of the damped step,
///   dist(y^{t+1}, C) = dist(x^t, C) / (2 eta + 1),
///   dist(z^{t+1}, D) = dist(2 y^{t+1} - x^t, D) / (2 eta + 1),
/// and returns a numerical error if either fails beyond 1e-10 relative
/// slack. Inner points are recorded densely for post-hoc verification, so
/// memory grows linearly with the horizon.
pub fn run_damped_dr(
    c: &ConvexSet,
    d: &ConvexSet,
    eta: f64,
    lambdas: &LambdaSchedule,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<Trace, EngineError> {
    if c.dim() != d.dim() {
        return Err(EngineError::Config(format!(
            "sets live in different dimensions: {} vs {}",
            c.dim(),
            d.dim()
        )));
    }
    check_x0(x0, c.dim())?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(EngineError::Config(format!(
            "damping parameter must be positive, got {eta}"
        )));
    }
    lambdas.validate(0.0, 2.0, "damped")?;
    let pair = SetCollection::new(vec![c.clone(), d.clone()])
        .expect("two sets of equal dimension form a collection");
    let denom = 2.0 * eta + 1.0;
    drive(
        "damped_dr",
        x0,
        opts,
        Some(&pair),
        opts.fejer_target.as_ref(),
        |t, x| {
            let lambda = lambdas.at(t);
            let y = c.relaxed_project(x, eta)?;
            let refl = vm::add_scaled(&vm::scale(&y, 2.0), -1.0, x);
            let z = d.relaxed_project(&refl, eta)?;
            // Contraction identities of the damped projections.
            let want_y = c.distance(x)? / denom;
            let got_y = c.distance(&y)?;
            if (got_y - want_y).abs() > 1e-10 * (1.0 + want_y) {
                return Err(EngineError::Numerical {
                    what: format!("damped identity dist(y, C): {got_y} vs {want_y}"),
                    step: t,
                    magnitude: (got_y - want_y).abs(),
                });
            }
            let want_z = d.distance(&refl)? / denom;
            let got_z = d.distance(&z)?;
            if (got_z - want_z).abs() > 1e-10 * (1.0 + want_z) {
                return Err(EngineError::Numerical {
                    what: format!("damped identity dist(z, D): {got_z} vs {want_z}"),
                    step: t,
                    magnitude: (got_z - want_z).abs(),
                });
            }
            let next = vm::add_scaled(x, lambda, &vm::sub(&z, &y));
            let op_residual = vm::dist(&z, &y);
            Ok(StepOut {
                next,
                op_residual,
                damped: Some(DampedStep {
                    x: x.to_vec(),
                    y,
                    z,
                    lambda,
                }),
            })
        },
    )
}
