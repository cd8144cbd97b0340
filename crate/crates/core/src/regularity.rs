//! Rate constants from regularity data, and empirical exponent estimation.
//!
//! Two directions are covered. The worst-case direction turns Holder
//! regularity moduli into explicit recurrence parameters (delta, theta),
//! convergence envelopes, and integer exponents for semialgebraic set
//! families. The empirical direction estimates a Holder exponent and
//! modulus from samples of an operator near its fixed set, or of a set
//! family near its intersection.
//!
//! The central error model is the bound
//!   dist(x, F) <= mu * res(x)^gamma      for all x in a box K,
//! where `res` is either the fixed-point residual |x - Tx| of an operator
//! with fixed set F, or the largest distance to the members of a set
//! family with intersection F.

use crate::geometry::SetCollection;
use crate::operators::{AveragedOperator, FixSet};
use crate::vecmath as vm;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Residuals below this are treated as exact fixed points and excluded
/// from exponent fits: they carry rounding noise, not geometry.
pub const RESIDUAL_FLOOR: f64 = 1e-14;
/// Number of logarithmic residual bins used by the envelope fit.
const N_BINS: usize = 20;
/// Minimum number of populated bins for a meaningful fit.
const MIN_BINS_FOR_FIT: usize = 5;
/// Smallest sampling radius, as a fraction of the box diameter. Deep
/// enough that the distance envelope stays resolvable down to the residual
/// floor even when residuals scale like the fourth power of the distance.
const RADIUS_FLOOR_FRAC: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum RegularityError {
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("estimation failed: {0}")]
    Degenerate(String),
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("operator has no recorded fixed set")]
    MissingFix,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Central binomial coefficient C(n, floor(n/2)), exact in 128 bits.
pub fn central_binomial(n: u32) -> Result<u128, RegularityError> {
    let k = (n / 2) as u128;
    let n = n as u128;
    let mut out: u128 = 1;
    for i in 1..=k {
        // Multiply before dividing; the intermediate product of a binomial
        // prefix times (n - k + i) is always divisible by i.
        out = out
            .checked_mul(n - k + i)
            .ok_or_else(|| RegularityError::Overflow(format!("central binomial of {n}")))?
            / i;
    }
    Ok(out)
}

/// Worst-case Holder exponent of a family of sets cut out by polynomial
/// inequalities: `n_vars` variables, degrees at most `degree`. The exponent
/// is 1/min{((2d-1)^n + 1)/2, B(n-1) d^n} with B the central binomial
/// coefficient; it equals 1 for affine descriptions (degree 1) and 1/d on
/// the line.
pub fn semialgebraic_exponent(n_vars: u32, degree: u32) -> Result<f64, RegularityError> {
    if n_vars == 0 || degree == 0 {
        return Err(RegularityError::BadParameter(format!(
            "need at least one variable and degree >= 1, got n = {n_vars}, d = {degree}"
        )));
    }
    let n = n_vars;
    let d = degree as u128;
    let overflow = || RegularityError::Overflow(format!("exponent bound for n = {n_vars}, d = {degree}"));
    let a = (2 * d - 1)
        .checked_pow(n)
        .ok_or_else(overflow)?
        .checked_add(1)
        .ok_or_else(overflow)?
        / 2;
    let b = central_binomial(n - 1)?
        .checked_mul(d.checked_pow(n).ok_or_else(overflow)?)
        .ok_or_else(overflow)?;
    Ok(1.0 / a.min(b) as f64)
}

/// Combines the Holder modulus of the operators (`mu`, exponent `gamma1`)
/// and of their fixed-set intersection (`beta`, exponent `gamma2`) with the
/// averagedness bound `alpha`, the weight floor `sigma`, and the coverage
/// span `span_s` into the distance-recurrence parameters `(delta, theta)`:
///
///   delta = ( s^g2 * beta^2 * (mu (alpha/(sigma(1-alpha)))^g1
///             + alpha/(1-alpha))^g2 )^(-1),
///   theta = 1 / (g1 g2).
///
/// When theta = 1 the recurrence itself forces delta <= 1, so the returned
/// delta is capped at 1 in that case.
pub fn combined_rate_parameters(
    mu: f64,
    gamma1: f64,
    beta: f64,
    gamma2: f64,
    alpha: f64,
    sigma: f64,
    span_s: usize,
) -> Result<(f64, f64), RegularityError> {
    for (name, v, lo, hi) in [
        ("gamma1", gamma1, 0.0, 1.0),
        ("gamma2", gamma2, 0.0, 1.0),
        ("sigma", sigma, 0.0, 1.0),
    ] {
        if !(v.is_finite() && v > lo && v <= hi) {
            return Err(RegularityError::BadParameter(format!(
                "{name} must lie in ({lo}, {hi}], got {v}"
            )));
        }
    }
    if !(mu.is_finite() && mu > 0.0) || !(beta.is_finite() && beta > 0.0) {
        return Err(RegularityError::BadParameter(format!(
            "moduli must be positive, got mu = {mu}, beta = {beta}"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(RegularityError::BadParameter(format!(
            "averagedness constant must lie in (0, 1), got {alpha}"
        )));
    }
    if span_s == 0 {
        return Err(RegularityError::BadParameter("span must be positive".into()));
    }
    let theta = 1.0 / (gamma1 * gamma2);
    let inner = mu * (alpha / (sigma * (1.0 - alpha))).powf(gamma1) + alpha / (1.0 - alpha);
    let mut delta = ((span_s as f64).powf(gamma2) * beta * beta * inner.powf(gamma2)).recip();
    if theta == 1.0 {
        delta = delta.min(1.0);
    }
    Ok((delta, theta))
}

/// Explicit envelope constants for a Fejer monotone sequence whose squared
/// distances to the limit set contract once per `span_s` steps:
///   dist^2(block t+1) <= dist^2(block t) - delta * dist^(2 theta)(block t).
#[derive(Clone, Debug)]
pub struct RateConstants {
    pub theta: f64,
    pub delta: f64,
    pub span_s: usize,
    pub dist0: f64,
    /// Sublinear envelope factor, present when theta > 1.
    pub m1: Option<f64>,
    /// Linear envelope factor, present when theta = 1.
    pub m2: Option<f64>,
    /// Linear envelope ratio, present when theta = 1.
    pub r: Option<f64>,
}

/// `dist0` is the starting distance to the limit set.
pub fn rate_constants(
    delta: f64,
    theta: f64,
    span_s: usize,
    dist0: f64,
) -> Result<RateConstants, RegularityError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(RegularityError::BadParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if !(theta.is_finite() && theta >= 1.0) {
        return Err(RegularityError::BadParameter(format!(
            "theta must be at least 1, got {theta}"
        )));
    }
    if span_s == 0 {
        return Err(RegularityError::BadParameter("span must be positive".into()));
    }
    if !(dist0.is_finite() && dist0 >= 0.0) {
        return Err(RegularityError::BadParameter(format!(
            "starting distance must be nonnegative, got {dist0}"
        )));
    }
    let s = span_s as f64;
    if theta > 1.0 {
        let e = 1.0 / (2.0 * (theta - 1.0));
        let m1 = 2.0 * (2.0 * s).powf(e) * (((theta - 1.0) * delta).powf(-e)).max(dist0);
        Ok(RateConstants {
            theta,
            delta,
            span_s,
            dist0,
            m1: Some(m1),
            m2: None,
            r: None,
        })
    } else {
        if delta > 1.0 {
            return Err(RegularityError::BadParameter(format!(
                "a linear-rate recurrence forces delta <= 1, got {delta}"
            )));
        }
        let r = (1.0 - delta).powf(1.0 / (4.0 * s));
        // r^(-2s) = (1 - delta)^(-1/2), independently of the span.
        let m2 = 2.0 * (dist0 / (1.0 - delta).sqrt()).max(dist0.sqrt());
        Ok(RateConstants {
            theta,
            delta,
            span_s,
            dist0,
            m1: None,
            m2: Some(m2),
            r: Some(r),
        })
    }
}

impl RateConstants {
    /// Envelope value at step `t`: M1 t^(-1/(2(theta-1))) for theta > 1
    /// (infinite at t = 0), or M2 r^t for theta = 1.
    pub fn envelope(&self, t: usize) -> f64 {
        if self.theta > 1.0 {
            let e = -1.0 / (2.0 * (self.theta - 1.0));
            self.m1.unwrap_or(f64::NAN) * (t as f64).powf(e)
        } else {
            let r = self.r.unwrap_or(f64::NAN);
            if t == 0 {
                self.m2.unwrap_or(f64::NAN)
            } else if r == 0.0 {
                0.0
            } else {
                self.m2.unwrap_or(f64::NAN) * r.powi(t as i32)
            }
        }
    }
}

/// Upper bound for nonnegative sequences obeying
/// `beta_{t+1} <= beta_t (1 - delta_t beta_t^p)` with nonnegative `delta_t`:
///
///   beta_t <= ( beta_0^(-p) + p * sum_{i < t} delta_i )^(-1/p),
///
/// with the convention that the bound is 0 when `beta_0` is 0.
pub fn recurrence_bound(
    beta0: f64,
    p: f64,
    deltas: &[f64],
    t: usize,
) -> Result<f64, RegularityError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(RegularityError::BadParameter(format!(
            "exponent p must be positive, got {p}"
        )));
    }
    if !(beta0.is_finite() && beta0 >= 0.0) {
        return Err(RegularityError::BadParameter(format!(
            "beta0 must be nonnegative, got {beta0}"
        )));
    }
    if t > deltas.len() {
        return Err(RegularityError::BadParameter(format!(
            "need {t} step moduli, got {}",
            deltas.len()
        )));
    }
    if beta0 == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (i, &d) in deltas[..t].iter().enumerate() {
        if !(d.is_finite() && d >= 0.0) {
            return Err(RegularityError::BadParameter(format!(
                "step modulus {i} must be nonnegative, got {d}"
            )));
        }
        sum += d;
    }
    Ok((beta0.powf(-p) + p * sum).powf(-1.0 / p))
}

/// Result of an empirical Holder fit `dist <= mu * res^gamma`.
#[derive(Clone, Debug)]
pub struct HolderFit {
    pub gamma: f64,
    pub mu: f64,
    /// Goodness of the log-log regression over bin envelopes.
    pub r_squared: f64,
    /// Set when the raw slope exceeded 1 and was clamped down to 1.
    pub clamped: bool,
    pub samples_used: usize,
    pub bins_used: usize,
}

fn check_box(lower: &[f64], upper: &[f64], dim: usize) -> Result<f64, RegularityError> {
    if lower.len() != dim || upper.len() != dim {
        return Err(RegularityError::BadParameter(format!(
            "box bounds must have dimension {dim}, got {} and {}",
            lower.len(),
            upper.len()
        )));
    }
    for i in 0..dim {
        if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
            return Err(RegularityError::BadParameter(format!(
                "box coordinate {i} is degenerate: [{}, {}]",
                lower[i], upper[i]
            )));
        }
    }
    Ok(vm::dist(lower, upper))
}

fn sample_box(rng: &mut ChaCha8Rng, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    lower
        .iter()
        .zip(upper)
        .map(|(&a, &b)| rng.gen_range(a..=b))
        .collect()
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = vm::norm(&v);
        if n > 1e-12 {
            return vm::scale(&v, 1.0 / n);
        }
    }
}

fn clip_to_box(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

/// Draws a point on (or numerically near) the fixed set, preferring
/// locations inside the sampling box. Half-line fixed sets mix the
/// endpoint, log-uniform, and uniform parameters so that samples probe
/// both the endpoint geometry and the interior.
fn anchor_on_fix(
    rng: &mut ChaCha8Rng,
    fix: &FixSet,
    lower: &[f64],
    upper: &[f64],
    diam: f64,
) -> Result<Vec<f64>, RegularityError> {
    match fix {
        FixSet::SinglePoint(p) => Ok(p.clone()),
        FixSet::HalfLine { anchor, direction } => {
            let n = vm::norm(direction);
            if n <= 0.0 {
                return Err(RegularityError::BadParameter(
                    "half-line direction must be nonzero".into(),
                ));
            }
            let d = vm::scale(direction, 1.0 / n);
            // Longest parameter that keeps the point inside the box.
            let mut tmax = f64::INFINITY;
            for i in 0..anchor.len() {
                if d[i] > 1e-15 {
                    tmax = tmax.min((upper[i] - anchor[i]) / d[i]);
                } else if d[i] < -1e-15 {
                    tmax = tmax.min((lower[i] - anchor[i]) / d[i]);
                }
            }
            if !tmax.is_finite() {
                tmax = diam;
            }
            tmax = tmax.max(0.0);
            let u: f64 = rng.gen();
            let t = if u < 0.25 || tmax <= 0.0 {
                0.0
            } else if u < 0.70 {
                let lo = (1e-6 * tmax).max(1e-12);
                (lo.ln() + rng.gen::<f64>() * (tmax.ln() - lo.ln())).exp()
            } else {
                rng.gen::<f64>() * tmax
            };
            Ok(vm::add_scaled(anchor, t, &d))
        }
        FixSet::ViaSet(set) => Ok(set.project(&sample_box(rng, lower, upper))?),
        FixSet::Custom(f) => {
            // Newton-style descent on the distance function: distance
            // functions have unit-norm gradients away from the set, so
            // x - d * grad jumps close to the nearest point.
            let mut x = sample_box(rng, lower, upper);
            let scale = 1.0 + vm::norm(&x);
            for _ in 0..80 {
                let d0 = f(&x);
                if d0 <= 1e-9 * scale {
                    break;
                }
                let mut g = vec![0.0; x.len()];
                let mut gn2 = 0.0;
                for i in 0..x.len() {
                    let h = 1e-6 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    xp[i] += h;
                    let mut xm = x.clone();
                    xm[i] -= h;
                    g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
                    gn2 += g[i] * g[i];
                }
                if gn2 < 1e-18 {
                    break;
                }
                vm::axpy(&mut x, -d0 / gn2, &g);
            }
            Ok(x)
        }
    }
}

/// Least-squares fit of `log lhs = a + gamma * log res` through the
/// per-bin maxima of `lhs`, which estimate the envelope rather than the
/// bulk of the cloud.
fn fit_holder(pairs: &[(f64, f64)]) -> Result<HolderFit, RegularityError> {
    if pairs.len() < 20 {
        return Err(RegularityError::Degenerate(format!(
            "only {} usable samples; the sampled region may lie inside the fixed set",
            pairs.len()
        )));
    }
    let lo = pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-9 {
        return Err(RegularityError::Degenerate(
            "residuals span a single scale; cannot identify an exponent".into(),
        ));
    }
    let mut best: Vec<Option<(f64, f64)>> = vec![None; N_BINS];
    for &(lr, ll) in pairs {
        let idx = (((lr - lo) / (hi - lo)) * N_BINS as f64) as usize;
        let idx = idx.min(N_BINS - 1);
        if best[idx].map_or(true, |(_, b)| ll > b) {
            best[idx] = Some((lr, ll));
        }
    }
    let pts: Vec<(f64, f64)> = best.into_iter().flatten().collect();
    if pts.len() < MIN_BINS_FOR_FIT {
        return Err(RegularityError::Degenerate(format!(
            "only {} populated residual scales, need {MIN_BINS_FOR_FIT}",
            pts.len()
        )));
    }
    // The exponent is an asymptotic quantity: fit it on the small-residual
    // half of the scale range, where the envelope shows it, provided enough
    // bins survive; large residuals only influence the modulus.
    let mid = lo + 0.5 * (hi - lo);
    let small: Vec<(f64, f64)> = pts.iter().copied().filter(|&(lr, _)| lr <= mid).collect();
    let pts = if small.len() >= MIN_BINS_FOR_FIT { small } else { pts };
    let n = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in &pts {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
        syy += (y - ybar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let r_squared = if syy <= 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    if slope <= 1e-6 {
        return Err(RegularityError::Degenerate(format!(
            "no positive distance-residual relation (slope {slope:.3e})"
        )));
    }
    let (gamma, clamped) = if slope > 1.0 { (1.0, true) } else { (slope, false) };
    // Smallest modulus covering every sample at the fitted exponent.
    let lmu = pairs
        .iter()
        .map(|&(lr, ll)| ll - gamma * lr)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HolderFit {
        gamma,
        mu: lmu.exp(),
        r_squared,
        clamped,
        samples_used: pairs.len(),
        bins_used: pts.len(),
    })
}

fn collect_pairs<R>(
    rng: &mut ChaCha8Rng,
    fix: &FixSet,
    lower: &[f64],
    upper: &[f64],
    diam: f64,
    n_samples: usize,
    surfaces: Option<&SetCollection>,
    mut residual: R,
) -> Result<Vec<(f64, f64)>, RegularityError>
where
    R: FnMut(&[f64]) -> Result<f64, RegularityError>,
{
    let r_lo = (RADIUS_FLOOR_FRAC * diam).ln();
    let r_hi = diam.ln();
    let mut pairs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let anchor = anchor_on_fix(rng, fix, lower, upper, diam)?;
        let dir = unit_direction(rng, lower.len());
        let radius = (r_lo + rng.gen::<f64>() * (r_hi - r_lo)).exp();
        let mut x = vm::add_scaled(&anchor, radius, &dir);
        // For set families the worst points at a given residual lie on a
        // member set (only the others contribute); radial sampling alone
        // reaches that surface with vanishing probability at small radii.
        if let Some(sets) = surfaces {
            if rng.gen::<f64>() < 0.5 {
                let j = rng.gen_range(0..sets.len());
                x = sets.get(j).project(&x)?;
            }
        }
        clip_to_box(&mut x, lower, upper);
        let res = residual(&x)?;
        let lhs = fix.distance(&x);
        if res >= RESIDUAL_FLOOR && lhs >= 1e-15 {
            pairs.push((res.ln(), lhs.ln()));
        }
    }
    Ok(pairs)
}

/// Estimates the Holder exponent and modulus of an operator relative to
/// its recorded fixed set, over the box `[lower, upper]`. Samples cluster
/// around the fixed set at log-uniform radii so that the small-residual
/// envelope, where the exponent shows, is well populated.
pub fn estimate_operator_holder(
    op: &AveragedOperator,
    lower: &[f64],
    upper: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<HolderFit, RegularityError> {
    let diam = check_box(lower, upper, op.dim())?;
    let fix = op.known_fix().ok_or(RegularityError::MissingFix)?;
    if n_samples < 50 {
        return Err(RegularityError::BadParameter(format!(
            "need at least 50 samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = collect_pairs(&mut rng, fix, lower, upper, diam, n_samples, None, |x| {
        Ok(op.residual_norm(x))
    })?;
    fit_holder(&pairs)
}

/// Estimates the Holder exponent of a set family relative to its
/// intersection: dist(x, F) <= mu * (max_j dist(x, C_j))^gamma over the
/// box. `intersection` supplies both the distance to F and the anchor
/// sampler.
pub fn estimate_intersection_holder(
    sets: &SetCollection,
    intersection: &FixSet,
    lower: &[f64],
    upper: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<HolderFit, RegularityError> {
    let diam = check_box(lower, upper, sets.dim())?;
    if n_samples < 50 {
        return Err(RegularityError::BadParameter(format!(
            "need at least 50 samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = collect_pairs(&mut rng, intersection, lower, upper, diam, n_samples, Some(sets), |x| {
        Ok(sets.max_distance(x)?)
    })?;
    fit_holder(&pairs)
}
