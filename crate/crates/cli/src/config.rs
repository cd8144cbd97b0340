//! Experiment configuration: a strict TOML schema mapped onto the library
//! types. Unknown keys are rejected so a config never silently degrades.

use fixiter_core::engine::LambdaSchedule;
use fixiter_core::geometry::{ConvexSet, SetCollection};
use fixiter_core::operators::FixSet;
use fixiter_core::{ProxMap, VipProblem};
use serde::Deserialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field {field}: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Geometry(#[from] fixiter_core::GeometryError),
    #[error(transparent)]
    Operator(#[from] fixiter_core::OperatorError),
}

fn field_err(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub sets: Vec<SetConfig>,
    #[serde(default)]
    pub vip: Option<VipConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetConfig {
    Halfspace { normal: Vec<f64>, offset: f64 },
    Hyperplane { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    AffineSubspace { basis: Vec<Vec<f64>>, anchor: Vec<f64> },
    EpigraphPowerNorm { n: usize, d: u32 },
}

impl SetConfig {
    pub fn build(&self) -> Result<ConvexSet, ConfigError> {
        Ok(match self {
            SetConfig::Halfspace { normal, offset } => {
                ConvexSet::halfspace(normal.clone(), *offset)?
            }
            SetConfig::Hyperplane { normal, offset } => {
                ConvexSet::hyperplane(normal.clone(), *offset)?
            }
            SetConfig::Ball { center, radius } => ConvexSet::ball(center.clone(), *radius)?,
            SetConfig::Box { lower, upper } => ConvexSet::box_set(lower.clone(), upper.clone())?,
            SetConfig::AffineSubspace { basis, anchor } => {
                ConvexSet::affine_subspace(basis.clone(), anchor.clone())?
            }
            SetConfig::EpigraphPowerNorm { n, d } => ConvexSet::epigraph_power_norm(*n, *d)?,
        })
    }
}

/// Affine map F(x) = A x + b together with its cocoercivity modulus
/// and the proximal part of the inclusion.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VipConfig {
    pub affine_a: Vec<Vec<f64>>,
    pub affine_b: Vec<f64>,
    pub cocoercivity: f64,
    pub prox: ProxConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProxConfig {
    Indicator { set: SetConfig },
    Zero,
}

impl VipConfig {
    pub fn build(&self) -> Result<VipProblem, ConfigError> {
        let dim = self.affine_b.len();
        if self.affine_a.len() != dim || self.affine_a.iter().any(|row| row.len() != dim) {
            return Err(field_err(
                "problem.vip.affine_a",
                format!("matrix must be {dim}x{dim} to match affine_b"),
            ));
        }
        let a = self.affine_a.clone();
        let b = self.affine_b.clone();
        let forward = Arc::new(move |x: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(&b)
                .map(|(row, bi)| row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>() + bi)
                .collect()
        });
        let prox = match &self.prox {
            ProxConfig::Indicator { set } => ProxMap::Indicator(set.build()?),
            ProxConfig::Zero => ProxMap::Zero,
        };
        Ok(VipProblem::new(prox, forward, self.cocoercivity, dim)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorConfig {
    /// Projection onto one problem set.
    Projection { set: usize },
    /// Two-set splitting operator over problem sets `c` and `d`.
    Dr { c: usize, d: usize },
    /// Convex combination of projection and splitting, for pairs that
    /// need not intersect.
    RegularizedDr { c: usize, d: usize, beta: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    /// Plain iteration x^{t+1} = T x^t of one operator.
    Iterate { op: OperatorConfig },
    /// Constant-weight averaging of the projections onto all sets.
    QuasiCyclic { weights: Vec<f64>, span: usize },
    /// Extrapolated constant-weight averaging of the projections;
    /// `weights` are the raw per-operator weights, identity weight is
    /// 1 - sum.
    Extrapolated { weights: Vec<f64>, alpha_bar: f64 },
    /// One projection per step, sweeping the sets in order.
    CyclicProjections,
    /// Pairwise splitting steps over a tuple list, one tuple per step.
    MultisetDr {
        #[serde(default)]
        tuples: Option<Vec<(usize, usize)>>,
        #[serde(default)]
        mode: Option<TupleMode>,
    },
    /// Splitting with relaxed projections.
    DampedDr { eta: f64, lambda: LambdaConfig },
    /// Relaxed iteration of one operator.
    Km {
        op: OperatorConfig,
        lambda: LambdaConfig,
    },
    /// Proximal-gradient iteration for the configured inclusion problem.
    ForwardBackward { gamma: f64, lambda: LambdaConfig },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TupleMode {
    Cyclic,
    Anchored,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum LambdaConfig {
    Constant(f64),
    Cyclic(Vec<f64>),
}

impl LambdaConfig {
    pub fn build(&self) -> LambdaSchedule {
        match self {
            LambdaConfig::Constant(v) => LambdaSchedule::Constant(*v),
            LambdaConfig::Cyclic(vs) => LambdaSchedule::Cyclic(vs.clone()),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub x0: X0Config,
    #[serde(default = "default_ensemble")]
    pub ensemble_count: usize,
    pub seed: u64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
}

fn default_ensemble() -> usize {
    1
}
fn default_max_iters() -> usize {
    100_000
}
fn default_residual_tol() -> f64 {
    1e-13
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum X0Config {
    Point { value: Vec<f64> },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Which rate fits to attempt on the error curves.
    pub fit: FitChoice,
    /// Known solution set, enabling distance curves and monotonicity
    /// checks.
    pub fix: Option<FixConfig>,
    /// Exponent p for the reported series t^p * err.
    pub scaled_exponent: Option<f64>,
    /// Steps ignored by the scaled-series monotonicity check.
    pub burn_in: usize,
    /// Empirical regularity estimation over a sampling box.
    pub regularity: Option<RegularityConfig>,
    /// Inputs for the theoretical envelope check.
    pub envelope: Option<EnvelopeConfig>,
    /// Compare the generic splitting operator of the first two sets
    /// against the plane ball/line closed form and report the gap.
    pub printed_formula_report: bool,
    /// Report the terminal gap between the two alternating shadows
    /// P_D x and P_C P_D x (for pairs that need not intersect).
    pub shadow_report: bool,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FitChoice {
    None,
    Linear,
    Sublinear,
    #[default]
    Both,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FixConfig {
    Point { value: Vec<f64> },
    Ray { anchor: Vec<f64>, direction: Vec<f64> },
    Set { index: usize },
}

impl FixConfig {
    pub fn build(&self, sets: &[ConvexSet]) -> Result<FixSet, ConfigError> {
        Ok(match self {
            FixConfig::Point { value } => FixSet::SinglePoint(value.clone()),
            FixConfig::Ray { anchor, direction } => FixSet::HalfLine {
                anchor: anchor.clone(),
                direction: direction.clone(),
            },
            FixConfig::Set { index } => {
                let set = sets.get(*index).ok_or_else(|| {
                    field_err("analysis.fix.index", format!("no problem set {index}"))
                })?;
                FixSet::ViaSet(set.clone())
            }
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_reg_samples")]
    pub samples: usize,
    pub target: RegularityTarget,
}

fn default_reg_samples() -> usize {
    2000
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RegularityTarget {
    Operator,
    Intersection,
}

/// Either `delta` and `theta` directly, or the five moduli they are
/// derived from.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub delta: Option<f64>,
    pub theta: Option<f64>,
    pub mu: Option<f64>,
    pub gamma1: Option<f64>,
    pub beta: Option<f64>,
    pub gamma2: Option<f64>,
    pub sigma: Option<f64>,
    pub span_s: Option<usize>,
}

impl EnvelopeConfig {
    /// Resolves to `(delta, theta)`, deriving them from the moduli when
    /// not given directly.
    pub fn resolve(&self, alpha: f64, span_s: usize) -> Result<(f64, f64), ConfigError> {
        match (self.delta, self.theta) {
            (Some(d), Some(t)) => Ok((d, t)),
            (None, None) => {
                let (mu, g1, beta, g2, sigma) = match (
                    self.mu,
                    self.gamma1,
                    self.beta,
                    self.gamma2,
                    self.sigma,
                ) {
                    (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
                    _ => {
                        return Err(field_err(
                            "analysis.envelope",
                            "give either delta+theta or all of mu, gamma1, beta, gamma2, sigma",
                        ))
                    }
                };
                let (theta, delta) = fixiter_core::regularity::combined_rate_parameters(
                    mu, g1, beta, g2, alpha, sigma, span_s,
                )
                .map_err(|e| field_err("analysis.envelope", e.to_string()))?;
                Ok((delta, theta))
            }
            _ => Err(field_err(
                "analysis.envelope",
                "delta and theta must be given together",
            )),
        }
    }
}

/// Output location: `false` disables, `true` uses the default path,
/// a string overrides the path (relative to the output directory).
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Toggle {
    Switch(bool),
    Path(String),
}

impl Default for Toggle {
    fn default() -> Self {
        Toggle::Switch(true)
    }
}

impl Toggle {
    pub fn resolve(&self, default_path: &str) -> Option<String> {
        match self {
            Toggle::Switch(false) => None,
            Toggle::Switch(true) => Some(default_path.to_string()),
            Toggle::Path(p) => Some(p.clone()),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Per-member trace CSVs (directory).
    pub trace_csv: Toggle,
    /// Run summary document (file).
    pub summary_json: Toggle,
    /// Plot-ready series (directory).
    pub plot_data: Toggle,
    /// Keep every k-th recorded iterate's coordinates in the trace CSV;
    /// 0 omits the coordinate columns.
    pub iterate_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trace_csv: Toggle::default(),
            summary_json: Toggle::default(),
            plot_data: Toggle::default(),
            iterate_stride: 1,
        }
    }
}

/// Fully validated problem pieces, ready to run.
pub struct BuiltProblem {
    pub sets: Vec<ConvexSet>,
    pub collection: Option<SetCollection>,
    pub vip: Option<VipProblem>,
    pub dim: usize,
    pub fix: Option<FixSet>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Validates cross-field consistency and builds the problem objects.
    pub fn build_problem(&self) -> Result<BuiltProblem, ConfigError> {
        let sets: Vec<ConvexSet> = self
            .problem
            .sets
            .iter()
            .map(|s| s.build())
            .collect::<Result<_, _>>()?;
        let vip = self.problem.vip.as_ref().map(|v| v.build()).transpose()?;
        let dim = if let Some(s) = sets.first() {
            s.dim()
        } else if let Some(v) = &vip {
            v.dim()
        } else {
            return Err(field_err("problem", "needs sets or a vip section"));
        };
        if let Some(bad) = sets.iter().position(|s| s.dim() != dim) {
            return Err(field_err(
                "problem.sets",
                format!("set {bad} has dimension {}, expected {dim}", sets[bad].dim()),
            ));
        }
        if let Some(v) = &vip {
            if v.dim() != dim {
                return Err(field_err(
                    "problem.vip",
                    format!("dimension {} does not match sets ({dim})", v.dim()),
                ));
            }
        }
        let collection = if sets.is_empty() {
            None
        } else {
            Some(SetCollection::new(sets.clone())?)
        };
        let fix = self
            .analysis
            .fix
            .as_ref()
            .map(|f| f.build(&sets))
            .transpose()?;

        match &self.run.x0 {
            X0Config::Point { value } => {
                if value.len() != dim {
                    return Err(field_err(
                        "run.x0.value",
                        format!("dimension {} does not match problem ({dim})", value.len()),
                    ));
                }
            }
            X0Config::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(field_err("run.x0", "box dimensions must match the problem"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(field_err("run.x0", "box must satisfy lower < upper"));
                }
            }
        }
        if self.run.ensemble_count == 0 {
            return Err(field_err("run.ensemble_count", "must be at least 1"));
        }
        if self.run.max_iters == 0 {
            return Err(field_err("run.max_iters", "must be at least 1"));
        }
        if !(self.run.residual_tol.is_finite() && self.run.residual_tol >= 0.0) {
            return Err(field_err("run.residual_tol", "must be finite and >= 0"));
        }
        self.check_algorithm(&sets, &vip)?;
        Ok(BuiltProblem {
            sets,
            collection,
            vip,
            dim,
            fix,
        })
    }

    fn check_algorithm(
        &self,
        sets: &[ConvexSet],
        vip: &Option<VipProblem>,
    ) -> Result<(), ConfigError> {
        let check_idx = |field: &str, i: usize| -> Result<(), ConfigError> {
            if i >= sets.len() {
                Err(field_err(
                    field,
                    format!("set index {i} out of range ({} sets)", sets.len()),
                ))
            } else {
                Ok(())
            }
        };
        let check_op = |op: &OperatorConfig| -> Result<(), ConfigError> {
            match op {
                OperatorConfig::Projection { set } => check_idx("algorithm.op.set", *set),
                OperatorConfig::Dr { c, d } => {
                    check_idx("algorithm.op.c", *c)?;
                    check_idx("algorithm.op.d", *d)
                }
                OperatorConfig::RegularizedDr { c, d, .. } => {
                    check_idx("algorithm.op.c", *c)?;
                    check_idx("algorithm.op.d", *d)
                }
            }
        };
        match &self.algorithm {
            AlgorithmConfig::Iterate { op } | AlgorithmConfig::Km { op, .. } => check_op(op),
            AlgorithmConfig::QuasiCyclic { weights, span } => {
                if weights.len() != sets.len() {
                    return Err(field_err(
                        "algorithm.weights",
                        "one weight per problem set required",
                    ));
                }
                if *span == 0 {
                    return Err(field_err("algorithm.span", "must be at least 1"));
                }
                Ok(())
            }
            AlgorithmConfig::Extrapolated { weights, .. } => {
                if weights.len() != sets.len() {
                    return Err(field_err(
                        "algorithm.weights",
                        "one weight per problem set required",
                    ));
                }
                Ok(())
            }
            AlgorithmConfig::CyclicProjections => {
                if sets.is_empty() {
                    Err(field_err("problem.sets", "cyclic projections need sets"))
                } else {
                    Ok(())
                }
            }
            AlgorithmConfig::MultisetDr { tuples, mode } => match (tuples, mode) {
                (Some(ts), None) => {
                    for (a, b) in ts {
                        check_idx("algorithm.tuples", *a)?;
                        check_idx("algorithm.tuples", *b)?;
                    }
                    Ok(())
                }
                (None, Some(_)) => {
                    if sets.len() < 2 {
                        Err(field_err("problem.sets", "tuple modes need at least 2 sets"))
                    } else {
                        Ok(())
                    }
                }
                _ => Err(field_err(
                    "algorithm",
                    "give exactly one of tuples or mode",
                )),
            },
            AlgorithmConfig::DampedDr { eta, .. } => {
                if sets.len() < 2 {
                    return Err(field_err("problem.sets", "damped splitting needs 2 sets"));
                }
                if !(eta.is_finite() && *eta > 0.0) {
                    return Err(field_err("algorithm.eta", "must be positive"));
                }
                Ok(())
            }
            AlgorithmConfig::ForwardBackward { .. } => {
                if vip.is_none() {
                    Err(field_err(
                        "problem.vip",
                        "forward-backward needs a vip section",
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }
}
