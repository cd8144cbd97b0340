//! Built-in experiment registry. Each entry is a complete config document
//! parsed through the same path as user-supplied files, so every built-in
//! also exercises the schema.

/// Registry order is the `list` output order.
pub const NAMES: [&str; 10] = [
    "ex61",
    "ex62-single",
    "ex62-ensemble",
    "ex63-restricted-start",
    "polyhedral-damped",
    "cyclic-projections-lines",
    "multiset-dr-cyclic",
    "multiset-dr-anchored",
    "infeasible-regularized-dr",
    "fb-lcp",
];

/// Halfspace below the axis and the region above a quartic curve; their
/// splitting operator fixes the upward vertical ray and approaches it at
/// a sublinear rate governed by the curve's flatness at the origin.
const EX61: &str = r#"
name = "ex61"

[[problem.sets]]
kind = "halfspace"
normal = [0.0, 1.0]
offset = 0.0

[[problem.sets]]
kind = "epigraph-power-norm"
n = 1
d = 4

[algorithm]
kind = "iterate"
op = { kind = "dr", c = 0, d = 1 }

[run]
x0 = { kind = "point", value = [1.0, 1.0] }
seed = 61
max_iters = 100000

[analysis]
fit = "sublinear"
fix = { kind = "ray", anchor = [0.0, 0.0], direction = [0.0, 1.0] }
regularity = { lower = [-2.0, -2.0], upper = [2.0, 2.0], samples = 2000, target = "operator" }
"#;

/// Vertical line tangent to a unit ball: one run from a fixed start.
/// The splitting operator fixes the ray (-inf, 0] x {0}; the discrepancy
/// report compares the generic composition against the closed-form
/// expression once reported for this pair.
const EX62_SINGLE: &str = r#"
name = "ex62-single"

[[problem.sets]]
kind = "hyperplane"
normal = [1.0, 0.0]
offset = 0.0

[[problem.sets]]
kind = "ball"
center = [-1.0, 0.0]
radius = 1.0

[algorithm]
kind = "iterate"
op = { kind = "dr", c = 0, d = 1 }

[run]
x0 = { kind = "point", value = [3.0, 4.0] }
seed = 62
max_iters = 100000

[analysis]
fit = "both"
fix = { kind = "ray", anchor = [0.0, 0.0], direction = [-1.0, 0.0] }
scaled_exponent = 0.25
burn_in = 1000
printed_formula_report = true
"#;

/// The tangent ball/line pair run from 200 random starts in the square
/// [-100, 100]^2, tracking t^(1/4)-scaled errors and per-member decay
/// exponents. Member traces are large and disabled by default.
const EX62_ENSEMBLE: &str = r#"
name = "ex62-ensemble"

[[problem.sets]]
kind = "hyperplane"
normal = [1.0, 0.0]
offset = 0.0

[[problem.sets]]
kind = "ball"
center = [-1.0, 0.0]
radius = 1.0

[algorithm]
kind = "iterate"
op = { kind = "dr", c = 0, d = 1 }

[run]
x0 = { kind = "box", lower = [-100.0, -100.0], upper = [100.0, 100.0] }
ensemble_count = 200
seed = 2024
max_iters = 100000
residual_tol = 0.0

[analysis]
fit = "sublinear"
fix = { kind = "ray", anchor = [0.0, 0.0], direction = [-1.0, 0.0] }
scaled_exponent = 0.25
burn_in = 1000
printed_formula_report = true

[output]
trace_csv = false
"#;

/// The tangent ball/line pair started in the strip where the reported
/// closed form predicts an exact 1/sqrt(t) error order. Rates are
/// measured and reported, not asserted: under the authoritative
/// composition dynamics this start converges much faster.
const EX63: &str = r#"
name = "ex63-restricted-start"

[[problem.sets]]
kind = "hyperplane"
normal = [1.0, 0.0]
offset = 0.0

[[problem.sets]]
kind = "ball"
center = [-1.0, 0.0]
radius = 1.0

[algorithm]
kind = "iterate"
op = { kind = "dr", c = 0, d = 1 }

[run]
x0 = { kind = "point", value = [-5.0, 0.5] }
seed = 63
max_iters = 10000

[analysis]
fit = "both"
fix = { kind = "ray", anchor = [0.0, 0.0], direction = [-1.0, 0.0] }
scaled_exponent = 0.5
burn_in = 100
"#;

/// Two halfspaces meeting in a line, iterated with damped projections
/// (eta = 1, lambda = 1). Polyhedral data makes the convergence linear;
/// the per-step descent inequality is re-verified after the run.
const POLYHEDRAL_DAMPED: &str = r#"
name = "polyhedral-damped"

[[problem.sets]]
kind = "halfspace"
normal = [1.0, 0.0]
offset = 0.0

[[problem.sets]]
kind = "halfspace"
normal = [-1.0, 0.0]
offset = 0.0

[[problem.sets]]
kind = "hyperplane"
normal = [1.0, 0.0]
offset = 0.0

[algorithm]
kind = "damped-dr"
eta = 1.0
lambda = 1.0

[run]
x0 = { kind = "point", value = [3.0, 4.0] }
seed = 54
max_iters = 2000

[analysis]
fit = "linear"
fix = { kind = "set", index = 2 }
"#;

/// Alternating projections onto two lines through the origin at angle
/// pi/4; the distance to their intersection halves every full sweep.
const CYCLIC_LINES: &str = r#"
name = "cyclic-projections-lines"

[[problem.sets]]
kind = "affine-subspace"
basis = [[1.0, 0.0]]
anchor = [0.0, 0.0]

[[problem.sets]]
kind = "affine-subspace"
basis = [[0.7071067811865476, 0.7071067811865476]]
anchor = [0.0, 0.0]

[algorithm]
kind = "cyclic-projections"

[run]
x0 = { kind = "point", value = [3.0, 4.0] }
seed = 45
max_iters = 200

[analysis]
fit = "linear"
fix = { kind = "point", value = [0.0, 0.0] }
"#;

const MULTISET_SETS: &str = r#"
[[problem.sets]]
kind = "halfspace"
normal = [1.0, 0.0]
offset = 1.0

[[problem.sets]]
kind = "halfspace"
normal = [0.0, 1.0]
offset = 1.0

[[problem.sets]]
kind = "halfspace"
normal = [-0.7071067811865476, -0.7071067811865476]
offset = 1.0
"#;

/// Pairwise splitting over three halfspaces, consuming the pair tuples
/// (0,1), (1,2), (2,0) cyclically.
const MULTISET_CYCLIC_HEAD: &str = r#"
name = "multiset-dr-cyclic"
"#;

const MULTISET_CYCLIC_TAIL: &str = r#"
[algorithm]
kind = "multiset-dr"
mode = "cyclic"

[run]
x0 = { kind = "point", value = [5.0, 7.0] }
seed = 41
max_iters = 3000

[analysis]
fit = "linear"
"#;

/// Same three halfspaces with every pair anchored on the first set:
/// tuples (0,1), (0,2).
const MULTISET_ANCHORED_HEAD: &str = r#"
name = "multiset-dr-anchored"
"#;

const MULTISET_ANCHORED_TAIL: &str = r#"
[algorithm]
kind = "multiset-dr"
mode = "anchored"

[run]
x0 = { kind = "point", value = [5.0, 7.0] }
seed = 42
max_iters = 3000

[analysis]
fit = "linear"
"#;

/// Two parallel halfspaces at distance 2 with empty intersection,
/// iterated with the regularized splitting map (weight 1/2 on the first
/// projection). The two alternating shadows converge to the nearest
/// points of the pair; their terminal gap reproduces the set distance.
const INFEASIBLE_REG: &str = r#"
name = "infeasible-regularized-dr"

[[problem.sets]]
kind = "halfspace"
normal = [1.0, 0.0]
offset = -1.0

[[problem.sets]]
kind = "halfspace"
normal = [-1.0, 0.0]
offset = -1.0

[algorithm]
kind = "iterate"
op = { kind = "regularized-dr", c = 0, d = 1, beta = 0.5 }

[run]
x0 = { kind = "point", value = [0.3, 0.7] }
seed = 77
max_iters = 5000

[analysis]
fit = "linear"
shadow_report = true
"#;

/// Scalar linear complementarity problem: find x >= 0 with x - 1 >= 0
/// and x (x - 1) = 0, solved by the proximal-gradient iteration with
/// step 1 and relaxation 1/2. The solution is x = 1.
const FB_LCP: &str = r#"
name = "fb-lcp"

[problem.vip]
affine_a = [[1.0]]
affine_b = [-1.0]
cocoercivity = 1.0
prox = { kind = "indicator", set = { kind = "halfspace", normal = [-1.0], offset = 0.0 } }

[algorithm]
kind = "forward-backward"
gamma = 1.0
lambda = 0.5

[run]
x0 = { kind = "point", value = [5.0] }
seed = 38
max_iters = 200
residual_tol = 1e-15

[analysis]
fit = "linear"
fix = { kind = "point", value = [1.0] }
"#;

/// Returns the config text for a built-in name.
pub fn builtin(name: &str) -> Option<String> {
    match name {
        "ex61" => Some(EX61.to_string()),
        "ex62-single" => Some(EX62_SINGLE.to_string()),
        "ex62-ensemble" => Some(EX62_ENSEMBLE.to_string()),
        "ex63-restricted-start" => Some(EX63.to_string()),
        "polyhedral-damped" => Some(POLYHEDRAL_DAMPED.to_string()),
        "cyclic-projections-lines" => Some(CYCLIC_LINES.to_string()),
        "multiset-dr-cyclic" => Some(format!(
            "{MULTISET_CYCLIC_HEAD}{MULTISET_SETS}{MULTISET_CYCLIC_TAIL}"
        )),
        "multiset-dr-anchored" => Some(format!(
            "{MULTISET_ANCHORED_HEAD}{MULTISET_SETS}{MULTISET_ANCHORED_TAIL}"
        )),
        "infeasible-regularized-dr" => Some(INFEASIBLE_REG.to_string()),
        "fb-lcp" => Some(FB_LCP.to_string()),
        _ => None,
    }
}

/// One-line description for the `list` output.
pub fn description(name: &str) -> &'static str {
    match name {
        "ex61" => "splitting over a halfspace and a quartic epigraph; sublinear rate",
        "ex62-single" => "tangent ball/line splitting from one start, with closed-form report",
        "ex62-ensemble" => "200 random starts on the tangent ball/line pair; scaled-error study",
        "ex63-restricted-start" => "ball/line pair from the strip claimed to decay like 1/sqrt(t)",
        "polyhedral-damped" => "damped splitting on two halfspaces; linear rate and step checks",
        "cyclic-projections-lines" => "alternating projections onto two lines at angle pi/4",
        "multiset-dr-cyclic" => "pairwise splitting over three halfspaces, cyclic tuples",
        "multiset-dr-anchored" => "pairwise splitting over three halfspaces, anchored tuples",
        "infeasible-regularized-dr" => "regularized splitting on disjoint halfspaces; shadow gap",
        "fb-lcp" => "proximal-gradient solve of a scalar complementarity problem",
        _ => "",
    }
}
