//! Post-hoc checks and rate fitting for recorded runs.
//!
//! Everything here consumes recorded data (error curves, distance curves,
//! damped-step snapshots) and produces verdicts or fitted parameters. The
//! fits operate on the trailing part of a curve, where transient behavior
//! has died out, and ignore values at or below the numerical floor.

use crate::engine::Trace;
use crate::geometry::ConvexSet;
use crate::operators::AveragedOperator;
use crate::regularity::RateConstants;
use crate::vecmath as vm;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors at or below this are rounding artifacts, not convergence data,
/// and are excluded from every fit.
pub const FIT_FLOOR: f64 = 1e-15;
/// Target number of points in a fit window.
const WINDOW_MIN_POINTS: usize = 30;
/// Smallest usable number of points for any fit.
const FIT_MIN_POINTS: usize = 5;
/// Sublinear fits ignore steps below this; log-spacing is too coarse there.
const SUBLINEAR_MIN_T: usize = 10;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("not enough data: {0}")]
    TooFewPoints(String),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Verdict on a distance curve that should never increase.
#[derive(Clone, Debug)]
pub struct FejerReport {
    pub monotone: bool,
    /// Index of the first increase beyond the slack, if any.
    pub first_violation: Option<usize>,
    /// Largest observed increase between consecutive entries.
    pub max_increase: f64,
}

/// Checks that `distances[k] <= distances[k-1] + slack` for all k.
pub fn check_fejer(distances: &[f64], slack: f64) -> FejerReport {
    let mut first = None;
    let mut max_inc = f64::NEG_INFINITY;
    for k in 1..distances.len() {
        let inc = distances[k] - distances[k - 1];
        max_inc = max_inc.max(inc);
        if inc > slack && first.is_none() {
            first = Some(k);
        }
    }
    FejerReport {
        monotone: first.is_none(),
        first_violation: first,
        max_increase: if distances.len() > 1 {
            max_inc
        } else {
            0.0
        },
    }
}

#[derive(Clone, Copy, Debug)]
pub enum RateKind {
    /// err ~ C r^t; `r_fit` is the per-step ratio.
    Linear { r_fit: f64 },
    /// err ~ C t^(-rho); `rho_fit` is the decay exponent.
    Sublinear { rho_fit: f64 },
}

#[derive(Clone, Debug)]
pub struct RateReport {
    pub kind: RateKind,
    /// R^2 of the underlying regression.
    pub fit_quality: f64,
    /// First and last step index of the fitted window.
    pub window: (usize, usize),
    pub points_used: usize,
}

/// Trailing-half window of fit-eligible points: finite, above the floor,
/// and at step `min_t` or later. Uses at least `WINDOW_MIN_POINTS` when
/// available.
fn fit_window(errors: &[(usize, f64)], min_t: usize) -> Result<Vec<(usize, f64)>, DiagnosticsError> {
    let eligible: Vec<(usize, f64)> = errors
        .iter()
        .copied()
        .filter(|&(t, e)| t >= min_t && e.is_finite() && e > FIT_FLOOR)
        .collect();
    if eligible.len() < FIT_MIN_POINTS {
        return Err(DiagnosticsError::TooFewPoints(format!(
            "{} usable error values, need {FIT_MIN_POINTS}",
            eligible.len()
        )));
    }
    let take = (eligible.len().div_ceil(2)).max(WINDOW_MIN_POINTS).min(eligible.len());
    Ok(eligible[eligible.len() - take..].to_vec())
}

/// Least squares y = a + b x; returns (slope, r_squared).
fn ols(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in pts {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
        syy += (y - ybar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let r2 = if syy <= 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, r2)
}

/// Fits err ~ C r^t on the trailing window; `errors` are `(step, err)`.
pub fn fit_linear_rate(errors: &[(usize, f64)]) -> Result<RateReport, DiagnosticsError> {
    let win = fit_window(errors, 0)?;
    let pts: Vec<(f64, f64)> = win.iter().map(|&(t, e)| (t as f64, e.ln())).collect();
    let (slope, r2) = ols(&pts);
    Ok(RateReport {
        kind: RateKind::Linear { r_fit: slope.exp() },
        fit_quality: r2,
        window: (win[0].0, win[win.len() - 1].0),
        points_used: win.len(),
    })
}

/// Fits err ~ C t^(-rho) on the trailing window, using steps >= 10.
pub fn fit_sublinear_exponent(errors: &[(usize, f64)]) -> Result<RateReport, DiagnosticsError> {
    let win = fit_window(errors, SUBLINEAR_MIN_T)?;
    let pts: Vec<(f64, f64)> = win
        .iter()
        .map(|&(t, e)| ((t as f64).ln(), e.ln()))
        .collect();
    let (slope, r2) = ols(&pts);
    Ok(RateReport {
        kind: RateKind::Sublinear { rho_fit: -slope },
        fit_quality: r2,
        window: (win[0].0, win[win.len() - 1].0),
        points_used: win.len(),
    })
}

/// Instantaneous decay exponents `-ln(err) / ln(t)` for steps >= 2 with
/// positive error. A curve settling near a constant value signals a clean
/// power-law decay with that exponent.
pub fn ratio_curve(errors: &[(usize, f64)]) -> Vec<(usize, f64)> {
    errors
        .iter()
        .filter(|&&(t, e)| t >= 2 && e > 0.0 && e.is_finite())
        .map(|&(t, e)| (t, -e.ln() / (t as f64).ln()))
        .collect()
}

/// Verdict on error-curve domination by a theoretical envelope.
#[derive(Clone, Debug)]
pub struct EnvelopeReport {
    /// Fraction of checked points with err <= envelope(t).
    pub fraction_within: f64,
    /// First `(t, err, envelope)` exceeding the envelope, if any.
    pub first_violation: Option<(usize, f64, f64)>,
    pub checked: usize,
}

/// Compares recorded errors against the envelope of `rc` with a tiny
/// relative allowance for rounding.
pub fn check_envelope(errors: &[(usize, f64)], rc: &RateConstants) -> EnvelopeReport {
    let mut within = 0usize;
    let mut first = None;
    let mut checked = 0usize;
    for &(t, e) in errors {
        if !e.is_finite() {
            continue;
        }
        checked += 1;
        let env = rc.envelope(t);
        if e <= env * (1.0 + 1e-12) || e <= FIT_FLOOR {
            within += 1;
        } else if first.is_none() {
            first = Some((t, e, env));
        }
    }
    EnvelopeReport {
        fraction_within: if checked == 0 {
            1.0
        } else {
            within as f64 / checked as f64
        },
        first_violation: first,
        checked,
    }
}

/// Largest relative violation of the averagedness inequality
///
///   |Tx - Ty|^2 + ((1 - a)/a) |(x - Tx) - (y - Ty)|^2 <= |x - y|^2
///
/// over random point pairs in a box, where `a` is the operator's declared
/// constant. Values at rounding level (about 1e-12) confirm the declared
/// constant; clearly positive values refute it.
pub fn averagedness_defect(
    op: &AveragedOperator,
    lower: &[f64],
    upper: &[f64],
    pairs: usize,
    seed: u64,
) -> Result<f64, DiagnosticsError> {
    if lower.len() != op.dim() || upper.len() != op.dim() {
        return Err(DiagnosticsError::BadInput(format!(
            "box dimension {} does not match operator dimension {}",
            lower.len(),
            op.dim()
        )));
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
        return Err(DiagnosticsError::BadInput(
            "box must have positive extent in every coordinate".into(),
        ));
    }
    if pairs == 0 {
        return Err(DiagnosticsError::BadInput("need at least one pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        lower
            .iter()
            .zip(upper)
            .map(|(l, u)| rng.gen_range(*l..*u))
            .collect()
    };
    let ratio = (1.0 - op.alpha()) / op.alpha();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let tx = op.apply(&x);
        let ty = op.apply(&y);
        let dt = vm::dist(&tx, &ty);
        let rx = vm::sub(&x, &tx);
        let ry = vm::sub(&y, &ty);
        let dr = vm::dist(&rx, &ry);
        let rhs = vm::dist(&x, &y).powi(2);
        let lhs = dt * dt + ratio * dr * dr;
        worst = worst.max((lhs - rhs) / (1.0 + rhs));
    }
    Ok(worst)
}

/// Verdict on a damped splitting run, reconstructed from the dense
/// per-step snapshots.
#[derive(Clone, Debug)]
pub struct DampedCheckReport {
    pub steps_checked: usize,
    /// Largest deviation in the two damped-projection contraction
    /// identities, relative to 1 + the expected value.
    pub max_identity_deviation: f64,
    /// Whether the per-step descent inequality held at every step.
    pub descent_ok: bool,
    pub first_descent_violation: Option<usize>,
    /// Largest value of lhs - rhs in the descent inequality (negative
    /// when the inequality holds strictly).
    pub max_descent_violation: f64,
}

/// Re-verifies a damped run against a solution `x_star` in both sets:
///
/// identities, for each step from state x:
///   dist(y, C) = dist(x, C) / (2 eta + 1),
///   dist(z, D) = dist(2y - x, D) / (2 eta + 1);
///
/// descent, with x' the next state and lambda the step relaxation:
///   2 eta lambda (dist^2(y, C) + dist^2(z, D))
///     + ((2 - lambda)/lambda) |x' - x|^2
///   <= |x - x_star|^2 - |x' - x_star|^2 + slack * (1 + |x - x_star|^2).
pub fn check_damped_steps(
    trace: &Trace,
    c: &ConvexSet,
    d: &ConvexSet,
    eta: f64,
    x_star: &[f64],
    slack: f64,
) -> Result<DampedCheckReport, DiagnosticsError> {
    let steps = trace
        .damped_steps
        .as_ref()
        .ok_or_else(|| DiagnosticsError::BadInput("trace has no damped-step snapshots".into()))?;
    if c.distance(x_star)? > 1e-9 || d.distance(x_star)? > 1e-9 {
        return Err(DiagnosticsError::BadInput(
            "reference solution must lie in both sets".into(),
        ));
    }
    let denom = 2.0 * eta + 1.0;
    let mut max_dev = 0.0f64;
    let mut first = None;
    let mut max_viol = f64::NEG_INFINITY;
    for (k, step) in steps.iter().enumerate() {
        let refl = vm::add_scaled(&vm::scale(&step.y, 2.0), -1.0, &step.x);
        let dy = c.distance(&step.y)?;
        let dz = d.distance(&step.z)?;
        let want_y = c.distance(&step.x)? / denom;
        let want_z = d.distance(&refl)? / denom;
        max_dev = max_dev.max((dy - want_y).abs() / (1.0 + want_y));
        max_dev = max_dev.max((dz - want_z).abs() / (1.0 + want_z));

        let next = if k + 1 < steps.len() {
            &steps[k + 1].x
        } else {
            &trace.final_state
        };
        let lambda = step.lambda;
        let lhs = 2.0 * eta * lambda * (dy * dy + dz * dz)
            + (2.0 - lambda) / lambda * vm::dist(next, &step.x).powi(2);
        let d_now = vm::dist(&step.x, x_star);
        let d_next = vm::dist(next, x_star);
        let rhs = d_now * d_now - d_next * d_next;
        let viol = lhs - rhs - slack * (1.0 + d_now * d_now);
        max_viol = max_viol.max(lhs - rhs);
        if viol > 0.0 && first.is_none() {
            first = Some(k);
        }
    }
    Ok(DampedCheckReport {
        steps_checked: steps.len(),
        max_identity_deviation: max_dev,
        descent_ok: first.is_none(),
        first_descent_violation: first,
        max_descent_violation: if steps.is_empty() {
            0.0
        } else {
            max_viol
        },
    })
}
