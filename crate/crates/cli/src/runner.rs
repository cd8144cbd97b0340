//! Experiment execution: builds the configured problem, runs each
//! ensemble member under its own derived seed, analyzes the traces, and
//! emits CSV/JSON artifacts. Members run in parallel; every output is a
//! pure function of config + seed, so reruns are byte-identical.

use crate::config::{
    AlgorithmConfig, ConfigError, ExperimentConfig, FitChoice, OperatorConfig, RegularityTarget,
    TupleMode, X0Config,
};
use crate::output;
use fixiter_core::diagnostics::{
    self, check_damped_steps, check_envelope, check_fejer, fit_linear_rate,
    fit_sublinear_exponent, ratio_curve, RateKind, FIT_FLOOR,
};
use fixiter_core::engine::{
    anchored_tuples, cyclic_tuples, run_damped_dr, run_extrapolated, run_forward_backward,
    run_km, run_multiset_dr, run_quasi_cyclic, EngineError, LambdaSchedule, RunOptions,
    StoppingRule, Trace, WeightSchedule,
};
use fixiter_core::operators::{dr_closed_form_ball_line, dr_op, projection_op, regularized_dr_op};
use fixiter_core::regularity::{
    estimate_intersection_holder, estimate_operator_holder, rate_constants,
};
use fixiter_core::{AveragedOperator, ConvexSet, FixSet, VipProblem};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl From<EngineError> for RunError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Numerical { .. } => RunError::Numerical(e.to_string()),
            EngineError::Config(msg) => RunError::Setup(msg),
            other => RunError::Setup(other.to_string()),
        }
    }
}

impl RunError {
    /// Process exit code: 2 for config problems, 3 for numerical
    /// failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

/// One step of the splitmix64 generator.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-member seed: element `k + 1` of the splitmix64 stream at `base`,
/// independent of how members are scheduled across threads.
pub fn member_seed(base: u64, k: usize) -> u64 {
    splitmix64(base.wrapping_add((k as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15)))
}

#[derive(Clone, Debug, Serialize)]
pub struct FitJson {
    pub kind: &'static str,
    pub value: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
    pub points: usize,
}

fn fit_json(report: &diagnostics::RateReport) -> FitJson {
    let (kind, value) = match report.kind {
        RateKind::Linear { r_fit } => ("linear", r_fit),
        RateKind::Sublinear { rho_fit } => ("sublinear", rho_fit),
    };
    FitJson {
        kind,
        value,
        r_squared: report.fit_quality,
        window: report.window,
        points: report.points_used,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FejerJson {
    pub monotone: bool,
    pub max_increase: f64,
    pub first_violation: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DampedJson {
    pub steps_checked: usize,
    pub max_identity_deviation: f64,
    pub descent_ok: bool,
    pub max_descent_violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowJson {
    /// Terminal gap between the two alternating shadows.
    pub gap: f64,
    pub shadow_d: Vec<f64>,
    pub shadow_cd: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberSummary {
    pub index: usize,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub stop: String,
    /// Operator residual at the last executed step.
    pub final_residual: f64,
    pub limit_proxy: Option<Vec<f64>>,
    pub proxy_residual: Option<f64>,
    pub proxy_steps: Option<usize>,
    /// True when the whole error curve sits at rounding level.
    pub constant_zero: bool,
    /// Rate fits on the error-to-proxy curve.
    pub linear_fit: Option<FitJson>,
    pub sublinear_fit: Option<FitJson>,
    /// Rate fits on the distance-to-fix curve (bias-free when the fixed
    /// set is known exactly).
    pub dist_linear_fit: Option<FitJson>,
    pub dist_sublinear_fit: Option<FitJson>,
    /// -log err / log t at the last recorded step with positive error.
    pub terminal_ratio: Option<f64>,
    pub fejer: Option<FejerJson>,
    /// Whether t^p * err was nonincreasing past the burn-in.
    pub scaled_monotone: Option<bool>,
    pub envelope_fraction: Option<f64>,
    pub damped: Option<DampedJson>,
    pub shadow: Option<ShadowJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Stats {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

fn stats(values: impl Iterator<Item = f64>) -> Option<Stats> {
    let mut v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(Stats {
        median: v[(v.len() - 1) / 2],
        min: v[0],
        max: v[v.len() - 1],
        count: v.len(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AggregateStats {
    pub r_fit: Option<Stats>,
    pub rho_fit: Option<Stats>,
    pub terminal_ratio: Option<Stats>,
    /// (members passing, members checked) for the scaled-series
    /// monotonicity check.
    pub scaled_monotone: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AveragednessJson {
    pub operator: String,
    pub alpha: f64,
    pub defect: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityJson {
    pub target: String,
    pub gamma: f64,
    pub mu: f64,
    pub r_squared: f64,
    pub clamped: bool,
    pub samples_used: usize,
    pub bins_used: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrintedFormulaJson {
    pub points: usize,
    /// Largest norm gap between the composition and the closed form.
    pub max_gap: f64,
    /// Largest deviation of the gap from the shift (-x1, 0); at rounding
    /// level the closed form differs from the composition by exactly
    /// that shift.
    pub max_gap_minus_shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub algorithm: String,
    pub seed: u64,
    pub ensemble_count: usize,
    pub max_iters: usize,
    pub residual_tol: f64,
    /// Records the stopping/horizon conventions used for every run.
    pub defaults_note: String,
    pub members: Vec<MemberSummary>,
    pub aggregate: AggregateStats,
    pub averagedness: Vec<AveragednessJson>,
    pub regularity: Option<RegularityJson>,
    pub regularity_error: Option<String>,
    pub printed_formula: Option<PrintedFormulaJson>,
    pub timing_seconds: f64,
}

/// Everything a member run needs, built once from the config.
enum RunKind {
    Ops {
        ops: Vec<AveragedOperator>,
        schedule: WeightSchedule,
    },
    Extrapolated {
        ops: Vec<AveragedOperator>,
        schedule: WeightSchedule,
        alpha_bar: f64,
    },
    Km {
        op: AveragedOperator,
        lambda: LambdaSchedule,
    },
    Multiset {
        tuples: Vec<(usize, usize)>,
    },
    Damped {
        eta: f64,
        lambda: LambdaSchedule,
    },
    ForwardBackward {
        problem: VipProblem,
        gamma: f64,
        lambda: LambdaSchedule,
    },
}

struct Prepared {
    kind: RunKind,
    /// Operators whose declared averagedness constants get spot-checked.
    check_ops: Vec<AveragedOperator>,
    label: String,
    span_s: usize,
}

fn build_operator(
    op: &OperatorConfig,
    sets: &[ConvexSet],
    fix: Option<&FixSet>,
) -> Result<AveragedOperator, RunError> {
    let built = match op {
        OperatorConfig::Projection { set } => projection_op(sets[*set].clone()),
        OperatorConfig::Dr { c, d } => {
            dr_op(&sets[*c], &sets[*d]).map_err(|e| RunError::Setup(e.to_string()))?
        }
        OperatorConfig::RegularizedDr { c, d, beta } => regularized_dr_op(&sets[*c], &sets[*d], *beta)
            .map_err(|e| RunError::Setup(e.to_string()))?,
    };
    Ok(match fix {
        Some(f) => built.with_known_fix(f.clone()),
        None => built,
    })
}

fn prepare(cfg: &ExperimentConfig, built: &crate::config::BuiltProblem) -> Result<Prepared, RunError> {
    let sets = &built.sets;
    let fix = built.fix.as_ref();
    Ok(match &cfg.algorithm {
        AlgorithmConfig::Iterate { op } => {
            let t = build_operator(op, sets, fix)?;
            Prepared {
                label: format!("iterate[{}]", t.label()),
                check_ops: vec![t.clone()],
                kind: RunKind::Ops {
                    ops: vec![t],
                    schedule: WeightSchedule::constant(vec![1.0]),
                },
                span_s: 1,
            }
        }
        AlgorithmConfig::QuasiCyclic { weights, span } => {
            let ops: Vec<_> = sets.iter().map(|s| projection_op(s.clone())).collect();
            let ops: Vec<_> = match fix {
                Some(f) => ops
                    .into_iter()
                    .map(|o| o.with_known_fix(f.clone()))
                    .collect(),
                None => ops,
            };
            let w = weights.clone();
            let schedule =
                WeightSchedule::custom(std::sync::Arc::new(move |_| w.clone()), *span);
            Prepared {
                label: "quasi_cyclic[projections]".into(),
                check_ops: ops.clone(),
                kind: RunKind::Ops { ops, schedule },
                span_s: *span,
            }
        }
        AlgorithmConfig::Extrapolated { weights, alpha_bar } => {
            let ops: Vec<_> = sets.iter().map(|s| projection_op(s.clone())).collect();
            Prepared {
                label: "extrapolated[projections]".into(),
                check_ops: ops.clone(),
                kind: RunKind::Extrapolated {
                    ops,
                    schedule: WeightSchedule::constant(weights.clone()),
                    alpha_bar: *alpha_bar,
                },
                span_s: 1,
            }
        }
        AlgorithmConfig::CyclicProjections => {
            let ops: Vec<_> = sets.iter().map(|s| projection_op(s.clone())).collect();
            let m = ops.len();
            Prepared {
                label: format!("cyclic_projections[{m}]"),
                check_ops: ops.clone(),
                kind: RunKind::Ops {
                    ops,
                    schedule: WeightSchedule::cyclic_sweep(m),
                },
                span_s: m,
            }
        }
        AlgorithmConfig::MultisetDr { tuples, mode } => {
            let ts = match (tuples, mode) {
                (Some(ts), None) => ts.clone(),
                (None, Some(TupleMode::Cyclic)) => cyclic_tuples(sets.len()),
                (None, Some(TupleMode::Anchored)) => anchored_tuples(sets.len()),
                _ => unreachable!("validated in build_problem"),
            };
            let mut check_ops = Vec::new();
            for (a, b) in &ts {
                check_ops.push(
                    dr_op(&sets[*a], &sets[*b]).map_err(|e| RunError::Setup(e.to_string()))?,
                );
            }
            Prepared {
                label: format!("multiset_dr[{} tuples]", ts.len()),
                check_ops,
                span_s: ts.len(),
                kind: RunKind::Multiset { tuples: ts },
            }
        }
        AlgorithmConfig::DampedDr { eta, lambda } => Prepared {
            label: format!("damped_dr[eta={eta}]"),
            check_ops: Vec::new(),
            kind: RunKind::Damped {
                eta: *eta,
                lambda: lambda.build(),
            },
            span_s: 1,
        },
        AlgorithmConfig::Km { op, lambda } => {
            let t = build_operator(op, sets, fix)?;
            Prepared {
                label: format!("km[{}]", t.label()),
                check_ops: vec![t.clone()],
                kind: RunKind::Km {
                    op: t,
                    lambda: lambda.build(),
                },
                span_s: 1,
            }
        }
        AlgorithmConfig::ForwardBackward { gamma, lambda } => {
            let problem = built
                .vip
                .clone()
                .expect("validated in build_problem");
            let op = fixiter_core::operators::forward_backward_op(&problem, *gamma)
                .map_err(|e| RunError::Setup(e.to_string()))?;
            Prepared {
                label: format!("forward_backward[gamma={gamma}]"),
                check_ops: vec![op],
                kind: RunKind::ForwardBackward {
                    problem,
                    gamma: *gamma,
                    lambda: lambda.build(),
                },
                span_s: 1,
            }
        }
    })
}

fn sample_x0(cfg: &ExperimentConfig, member: usize) -> Vec<f64> {
    match &cfg.run.x0 {
        X0Config::Point { value } => value.clone(),
        X0Config::Box { lower, upper } => {
            let mut rng = ChaCha8Rng::seed_from_u64(member_seed(cfg.run.seed, member));
            lower
                .iter()
                .zip(upper)
                .map(|(l, u)| rng.gen_range(*l..*u))
                .collect()
        }
    }
}

struct MemberArtifacts {
    summary: MemberSummary,
    ratio: Vec<(usize, f64)>,
    scaled: Option<Vec<(usize, f64)>>,
}

#[allow(clippy::too_many_arguments)]
fn run_member(
    cfg: &ExperimentConfig,
    built: &crate::config::BuiltProblem,
    prepared: &Prepared,
    member: usize,
    trace_dir: Option<&Path>,
) -> Result<MemberArtifacts, RunError> {
    let x0 = sample_x0(cfg, member);
    let mut opts = RunOptions::new(StoppingRule {
        max_iters: cfg.run.max_iters,
        residual_tol: cfg.run.residual_tol,
        fix_dist_tol: None,
    });
    opts.fejer_target = built.fix.clone();
    if trace_dir.is_some() && !matches!(prepared.kind, RunKind::Damped { .. }) {
        opts.record_sets = built.collection.clone();
    }

    let trace: Trace = match &prepared.kind {
        RunKind::Ops { ops, schedule } => run_quasi_cyclic(ops, schedule, &x0, &opts)?,
        RunKind::Extrapolated {
            ops,
            schedule,
            alpha_bar,
        } => run_extrapolated(ops, schedule, *alpha_bar, &x0, &opts)?,
        RunKind::Km { op, lambda } => run_km(op, lambda, &x0, &opts)?,
        RunKind::Multiset { tuples } => run_multiset_dr(
            built.collection.as_ref().expect("validated"),
            tuples,
            &x0,
            &opts,
        )?,
        RunKind::Damped { eta, lambda } => run_damped_dr(
            &built.sets[0],
            &built.sets[1],
            *eta,
            lambda,
            &x0,
            &opts,
        )?,
        RunKind::ForwardBackward {
            problem,
            gamma,
            lambda,
        } => run_forward_backward(problem, *gamma, lambda, &x0, &opts)?,
    };

    if let Some(dir) = trace_dir {
        let path = dir.join(format!("member_{member:03}.csv"));
        output::write_atomic(&path, &output::trace_csv(&trace, cfg.output.iterate_stride))?;
    }

    let errors = trace
        .errors_to_proxy()
        .expect("limit proxy is always enabled");
    let constant_zero = errors.iter().all(|&(_, e)| e <= FIT_FLOOR);

    let want_linear = matches!(cfg.analysis.fit, FitChoice::Linear | FitChoice::Both);
    let want_sublinear = matches!(cfg.analysis.fit, FitChoice::Sublinear | FitChoice::Both);
    let linear_fit = (want_linear && !constant_zero)
        .then(|| fit_linear_rate(&errors).ok().map(|r| fit_json(&r)))
        .flatten();
    let sublinear_fit = (want_sublinear && !constant_zero)
        .then(|| fit_sublinear_exponent(&errors).ok().map(|r| fit_json(&r)))
        .flatten();

    // Distance curve sampled on the recorded-iterate grid.
    let dist_curve: Option<Vec<(usize, f64)>> = trace.fix_distances.as_ref().map(|d| {
        trace
            .iterates
            .iter()
            .map(|(t, _)| (*t, d[*t]))
            .collect()
    });
    let (dist_linear_fit, dist_sublinear_fit) = match &dist_curve {
        Some(curve) => (
            want_linear
                .then(|| fit_linear_rate(curve).ok().map(|r| fit_json(&r)))
                .flatten(),
            want_sublinear
                .then(|| fit_sublinear_exponent(curve).ok().map(|r| fit_json(&r)))
                .flatten(),
        ),
        None => (None, None),
    };

    // Decay exponent read off at the end of the run; absent for members
    // whose error has already collapsed to rounding level there.
    let terminal_ratio = errors
        .last()
        .filter(|&&(t, e)| t >= 2 && e > FIT_FLOOR)
        .map(|&(t, e)| -e.ln() / (t as f64).ln());

    let fejer = trace.fix_distances.as_ref().map(|d| {
        let rep = check_fejer(d, 1e-9 * (1.0 + d.first().copied().unwrap_or(0.0)));
        FejerJson {
            monotone: rep.monotone,
            max_increase: rep.max_increase,
            first_violation: rep.first_violation,
        }
    });

    let scaled = cfg.analysis.scaled_exponent.map(|p| {
        errors
            .iter()
            .map(|&(t, e)| (t, (t as f64).powf(p) * e))
            .collect::<Vec<_>>()
    });
    let scaled_monotone = scaled.as_ref().map(|s| {
        let mut prev: Option<f64> = None;
        let mut ok = true;
        for &(t, v) in s.iter().filter(|&&(t, _)| t >= cfg.analysis.burn_in) {
            let _ = t;
            if let Some(p) = prev {
                if v > p * (1.0 + 1e-9) + 1e-12 {
                    ok = false;
                    break;
                }
            }
            prev = Some(v);
        }
        ok
    });

    let envelope_fraction = match (&cfg.analysis.envelope, &trace.fix_distances) {
        (Some(env), Some(d)) => {
            let alpha = prepared
                .check_ops
                .iter()
                .map(|o| o.alpha())
                .fold(0.5f64, f64::max);
            let (delta, theta) = env.resolve(alpha, prepared.span_s)?;
            let span = env.span_s.unwrap_or(prepared.span_s);
            let rc = rate_constants(delta, theta, span, d[0])
                .map_err(|e| RunError::Setup(e.to_string()))?;
            Some(check_envelope(&errors, &rc).fraction_within)
        }
        _ => None,
    };

    let damped = match &prepared.kind {
        RunKind::Damped { eta, .. } => {
            let x_star = trace
                .limit_proxy
                .as_ref()
                .map(|p| p.point.clone())
                .unwrap_or_else(|| trace.final_state.clone());
            let rep = check_damped_steps(
                &trace,
                &built.sets[0],
                &built.sets[1],
                *eta,
                &x_star,
                1e-8,
            )
            .map_err(|e| RunError::Numerical(e.to_string()))?;
            Some(DampedJson {
                steps_checked: rep.steps_checked,
                max_identity_deviation: rep.max_identity_deviation,
                descent_ok: rep.descent_ok,
                max_descent_violation: rep.max_descent_violation,
            })
        }
        _ => None,
    };

    let shadow = if cfg.analysis.shadow_report && built.sets.len() >= 2 {
        let s1 = built.sets[1]
            .project(&trace.final_state)
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        let s2 = built.sets[0]
            .project(&s1)
            .map_err(|e| RunError::Numerical(e.to_string()))?;
        let gap = fixiter_core::vecmath::dist(&s1, &s2);
        Some(ShadowJson {
            gap,
            shadow_d: s1,
            shadow_cd: s2,
        })
    } else {
        None
    };

    let ratio = ratio_curve(&errors);
    let summary = MemberSummary {
        index: member,
        x0,
        steps: trace.steps,
        stop: format!("{:?}", trace.stop.expect("driver always sets a reason")),
        final_residual: trace.op_residuals.last().copied().unwrap_or(f64::NAN),
        limit_proxy: trace.limit_proxy.as_ref().map(|p| p.point.clone()),
        proxy_residual: trace.limit_proxy.as_ref().map(|p| p.residual),
        proxy_steps: trace.limit_proxy.as_ref().map(|p| p.total_steps),
        constant_zero,
        linear_fit,
        sublinear_fit,
        dist_linear_fit,
        dist_sublinear_fit,
        terminal_ratio,
        fejer,
        scaled_monotone,
        envelope_fraction,
        damped,
        shadow,
    };
    Ok(MemberArtifacts {
        summary,
        ratio,
        scaled,
    })
}

/// Runs the whole experiment and writes the configured artifacts under
/// `out_dir`. Returns the summary that was (optionally) serialized.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary, RunError> {
    let started = std::time::Instant::now();
    let built = cfg.build_problem()?;
    let prepared = prepare(cfg, &built)?;

    let trace_dir: Option<PathBuf> = cfg
        .output
        .trace_csv
        .resolve("traces")
        .map(|p| out_dir.join(p));
    let plot_dir: Option<PathBuf> = cfg
        .output
        .plot_data
        .resolve("plots")
        .map(|p| out_dir.join(p));

    let members: Vec<MemberArtifacts> = (0..cfg.run.ensemble_count)
        .into_par_iter()
        .map(|k| run_member(cfg, &built, &prepared, k, trace_dir.as_deref()))
        .collect::<Result<_, _>>()?;

    if let Some(dir) = &plot_dir {
        for m in &members {
            output::write_atomic(
                &dir.join(format!("ratio_member_{:03}.csv", m.summary.index)),
                &output::series_csv("ratio", &m.ratio),
            )?;
            if let Some(s) = &m.scaled {
                output::write_atomic(
                    &dir.join(format!("scaled_member_{:03}.csv", m.summary.index)),
                    &output::series_csv("scaled_err", s),
                )?;
            }
        }
        if cfg.run.ensemble_count > 1 {
            let ratios: Vec<_> = members.iter().map(|m| m.ratio.clone()).collect();
            output::write_atomic(
                &dir.join("percentiles_ratio.csv"),
                &output::percentile_csv(&ratios),
            )?;
            if members.iter().any(|m| m.scaled.is_some()) {
                let scaled: Vec<_> = members
                    .iter()
                    .filter_map(|m| m.scaled.clone())
                    .collect();
                output::write_atomic(
                    &dir.join("percentiles_scaled.csv"),
                    &output::percentile_csv(&scaled),
                )?;
            }
        }
    }

    let averagedness = averagedness_reports(cfg, &prepared)?;
    let (regularity, regularity_error) = regularity_report(cfg, &built, &prepared);
    let printed_formula = if cfg.analysis.printed_formula_report {
        Some(printed_formula_report(&built, cfg.run.seed)?)
    } else {
        None
    };

    let summaries: Vec<MemberSummary> = members.iter().map(|m| m.summary.clone()).collect();
    let scaled_checked: Vec<bool> = summaries
        .iter()
        .filter_map(|m| m.scaled_monotone)
        .collect();
    let aggregate = AggregateStats {
        r_fit: stats(summaries.iter().filter_map(|m| {
            m.linear_fit
                .as_ref()
                .or(m.dist_linear_fit.as_ref())
                .map(|f| f.value)
        })),
        rho_fit: stats(summaries.iter().filter_map(|m| {
            m.sublinear_fit
                .as_ref()
                .or(m.dist_sublinear_fit.as_ref())
                .map(|f| f.value)
        })),
        terminal_ratio: stats(summaries.iter().filter_map(|m| m.terminal_ratio)),
        scaled_monotone: if scaled_checked.is_empty() {
            None
        } else {
            Some((
                scaled_checked.iter().filter(|&&b| b).count(),
                scaled_checked.len(),
            ))
        },
    };

    let summary = RunSummary {
        name: cfg.name.clone(),
        algorithm: prepared.label.clone(),
        seed: cfg.run.seed,
        ensemble_count: cfg.run.ensemble_count,
        max_iters: cfg.run.max_iters,
        residual_tol: cfg.run.residual_tol,
        defaults_note: format!(
            "horizon {} iterations; limit proxy continues to {}x the horizon or operator \
             residual 1e-13, whichever comes first",
            cfg.run.max_iters, 10
        ),
        members: summaries,
        aggregate,
        averagedness,
        regularity,
        regularity_error,
        printed_formula,
        timing_seconds: started.elapsed().as_secs_f64(),
    };

    if let Some(name) = cfg.output.summary_json.resolve("summary.json") {
        let text = serde_json::to_string_pretty(&summary)
            .expect("summary serialization cannot fail")
            + "\n";
        output::write_atomic(&out_dir.join(name), &text)?;
    }
    Ok(summary)
}

fn averagedness_reports(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
) -> Result<Vec<AveragednessJson>, RunError> {
    let mut out = Vec::new();
    let (lower, upper) = match &cfg.run.x0 {
        X0Config::Box { lower, upper } => (lower.clone(), upper.clone()),
        X0Config::Point { value } => (
            value.iter().map(|v| v - 10.0).collect(),
            value.iter().map(|v| v + 10.0).collect(),
        ),
    };
    for op in &prepared.check_ops {
        let defect =
            diagnostics::averagedness_defect(op, &lower, &upper, 50, cfg.run.seed ^ 0xA5A5)
                .map_err(|e| RunError::Setup(e.to_string()))?;
        out.push(AveragednessJson {
            operator: op.label().to_string(),
            alpha: op.alpha(),
            defect,
            pairs: 50,
        });
    }
    Ok(out)
}

fn regularity_report(
    cfg: &ExperimentConfig,
    built: &crate::config::BuiltProblem,
    prepared: &Prepared,
) -> (Option<RegularityJson>, Option<String>) {
    let Some(reg) = &cfg.analysis.regularity else {
        return (None, None);
    };
    let seed = cfg.run.seed ^ 0x5EED_CAFE;
    let result = match reg.target {
        RegularityTarget::Operator => {
            let Some(op) = prepared.check_ops.first() else {
                return (None, Some("no operator available to estimate".into()));
            };
            estimate_operator_holder(op, &reg.lower, &reg.upper, reg.samples, seed)
        }
        RegularityTarget::Intersection => {
            let (Some(coll), Some(fix)) = (&built.collection, &built.fix) else {
                return (
                    None,
                    Some("intersection estimation needs sets and a fix description".into()),
                );
            };
            estimate_intersection_holder(coll, fix, &reg.lower, &reg.upper, reg.samples, seed)
        }
    };
    match result {
        Ok(fit) => (
            Some(RegularityJson {
                target: match reg.target {
                    RegularityTarget::Operator => "operator".into(),
                    RegularityTarget::Intersection => "intersection".into(),
                },
                gamma: fit.gamma,
                mu: fit.mu,
                r_squared: fit.r_squared,
                clamped: fit.clamped,
                samples_used: fit.samples_used,
                bins_used: fit.bins_used,
            }),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    }
}

/// Compares the generic two-set splitting composition against the plane
/// ball/line closed form on random points in [-100, 100]^2.
fn printed_formula_report(
    built: &crate::config::BuiltProblem,
    seed: u64,
) -> Result<PrintedFormulaJson, RunError> {
    if built.dim != 2 || built.sets.len() < 2 {
        return Err(RunError::Setup(
            "the closed-form report needs the two plane sets".into(),
        ));
    }
    let op = dr_op(&built.sets[0], &built.sets[1]).map_err(|e| RunError::Setup(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF0F0);
    let mut max_gap = 0.0f64;
    let mut max_dev = 0.0f64;
    let points = 100;
    for _ in 0..points {
        let x = [rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)];
        let a = op.apply(&x);
        let b = dr_closed_form_ball_line(&x);
        let gap = fixiter_core::vecmath::dist(&a, &b);
        max_gap = max_gap.max(gap);
        // Expected shift between the two formulas.
        let dev = ((b[0] - a[0] + x[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        max_dev = max_dev.max(dev);
    }
    Ok(PrintedFormulaJson {
        points,
        max_gap,
        max_gap_minus_shift: max_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn run_builtin(name: &str, tweak: impl FnOnce(&mut ExperimentConfig)) -> (RunSummary, tempfile::TempDir) {
        let text = builtin::builtin(name).unwrap();
        let mut cfg = ExperimentConfig::parse(&text).unwrap();
        tweak(&mut cfg);
        let dir = tempfile::tempdir().unwrap();
        let summary = run_experiment(&cfg, dir.path()).unwrap();
        (summary, dir)
    }

    #[test]
    fn member_seeds_are_stable_and_distinct() {
        let a = member_seed(2024, 0);
        let b = member_seed(2024, 1);
        assert_ne!(a, b);
        assert_eq!(a, member_seed(2024, 0));
    }

    #[test]
    fn fb_lcp_converges_to_unit_solution() {
        let (summary, dir) = run_builtin("fb-lcp", |_| {});
        let m = &summary.members[0];
        assert!(m.final_residual < 1e-14, "residual {}", m.final_residual);
        let proxy = m.limit_proxy.as_ref().unwrap();
        assert!((proxy[0] - 1.0).abs() < 1e-10, "limit {proxy:?}");
        assert!(m.fejer.as_ref().unwrap().monotone);
        assert!(dir.path().join("summary.json").exists());
        assert!(dir.path().join("traces/member_000.csv").exists());
    }

    #[test]
    fn cyclic_lines_contract_per_sweep() {
        let (summary, _dir) = run_builtin("cyclic-projections-lines", |_| {});
        let m = &summary.members[0];
        let fit = m.dist_linear_fit.as_ref().unwrap();
        // Distance halves per 2-step sweep: per-step ratio sqrt(1/2).
        assert!(
            (fit.value - 0.5f64.sqrt()).abs() < 1e-3,
            "per-step ratio {}",
            fit.value
        );
        assert!(m.fejer.as_ref().unwrap().monotone);
    }

    #[test]
    fn small_ensembles_are_deterministic() {
        let tweak = |cfg: &mut ExperimentConfig| {
            cfg.run.ensemble_count = 3;
            cfg.run.max_iters = 500;
            cfg.run.residual_tol = 1e-13;
        };
        let (_, dir_a) = run_builtin("ex62-ensemble", tweak);
        let (_, dir_b) = run_builtin("ex62-ensemble", tweak);
        for name in [
            "plots/ratio_member_000.csv",
            "plots/ratio_member_002.csv",
            "plots/percentiles_ratio.csv",
            "plots/percentiles_scaled.csv",
        ] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "nondeterministic {name}");
        }
    }

    #[test]
    fn damped_builtin_passes_step_checks() {
        let (summary, _dir) = run_builtin("polyhedral-damped", |_| {});
        let m = &summary.members[0];
        let damped = m.damped.as_ref().unwrap();
        assert!(damped.descent_ok);
        assert!(damped.max_identity_deviation < 1e-10);
        let fit = m.linear_fit.as_ref().unwrap();
        assert!(fit.value < 1.0, "r {}", fit.value);
    }

    #[test]
    fn infeasible_pair_reports_shadow_gap() {
        let (summary, _dir) = run_builtin("infeasible-regularized-dr", |_| {});
        let shadow = summary.members[0].shadow.as_ref().unwrap();
        assert!((shadow.gap - 2.0).abs() < 1e-6, "gap {}", shadow.gap);
    }
}
