//! CSV and JSON emission. All floats are written with 17 significant
//! digits so values round-trip exactly; writes go through a temp file in
//! the target directory followed by a rename.

use fixiter_core::engine::Trace;
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

/// 17 significant digits: exact round-trip for doubles.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Renders a trace as CSV with the fixed column set
/// `t, residual, dist_fix?, dist_set_1..m?, x_1..n?`.
///
/// `residual` is the operator residual max_j |x^t - T_j x^t|; it is not
/// evaluated at the final state, so the last row's cell is empty.
/// Coordinates appear only on rows whose iterate was recorded, further
/// thinned to every `stride`-th recorded iterate (0 omits the columns).
pub fn trace_csv(trace: &Trace, stride: usize) -> String {
    let dim = trace.final_state.len();
    let n_sets = trace
        .per_set_distances
        .as_ref()
        .and_then(|d| d.first().map(|row| row.len()))
        .unwrap_or(0);
    let mut header = String::from("t,residual");
    if trace.fix_distances.is_some() {
        header.push_str(",dist_fix");
    }
    for j in 1..=n_sets {
        header.push_str(&format!(",dist_set_{j}"));
    }
    if stride > 0 {
        for i in 1..=dim {
            header.push_str(&format!(",x_{i}"));
        }
    }
    let mut out = header;
    out.push('\n');

    // Iterate rows are sparse; walk them alongside the dense columns.
    let keep: BTreeMap<usize, &Vec<f64>> = trace
        .iterates
        .iter()
        .enumerate()
        .filter(|(i, _)| stride > 0 && i % stride == 0)
        .map(|(_, (t, x))| (*t, x))
        .collect();
    for t in 0..=trace.steps {
        out.push_str(&t.to_string());
        out.push(',');
        if t < trace.op_residuals.len() {
            out.push_str(&fmt_float(trace.op_residuals[t]));
        }
        if let Some(d) = &trace.fix_distances {
            out.push(',');
            out.push_str(&fmt_float(d[t]));
        }
        if let Some(rows) = &trace.per_set_distances {
            for v in &rows[t] {
                out.push(',');
                out.push_str(&fmt_float(*v));
            }
        }
        if stride > 0 {
            match keep.get(&t) {
                Some(x) => {
                    for v in *x {
                        out.push(',');
                        out.push_str(&fmt_float(*v));
                    }
                }
                None => out.push_str(&",".repeat(dim)),
            }
        }
        out.push('\n');
    }
    out
}

/// Two-column series `t, <name>`.
pub fn series_csv(name: &str, rows: &[(usize, f64)]) -> String {
    let mut out = format!("t,{name}\n");
    for (t, v) in rows {
        out.push_str(&t.to_string());
        out.push(',');
        out.push_str(&fmt_float(*v));
        out.push('\n');
    }
    out
}

/// Aggregates member series into per-step percentiles (nearest-rank
/// p10/p50/p90) over the members that recorded each step.
pub fn percentile_csv(series: &[Vec<(usize, f64)>]) -> String {
    let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for s in series {
        for &(t, v) in s {
            if v.is_finite() {
                by_t.entry(t).or_default().push(v);
            }
        }
    }
    let mut out = String::from("t,count,p10,p50,p90\n");
    for (t, mut vals) in by_t {
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| -> f64 {
            let rank = ((p * vals.len() as f64).ceil() as usize).clamp(1, vals.len());
            vals[rank - 1]
        };
        out.push_str(&format!(
            "{t},{},{},{},{}\n",
            vals.len(),
            fmt_float(q(0.10)),
            fmt_float(q(0.50)),
            fmt_float(q(0.90))
        ));
    }
    out
}
