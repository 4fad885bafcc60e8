//! Variance scaling, fluctuation-tail profile and mean gap along one direction.

use serde_json::json;

use crate::error::{Error, Result};
use crate::lattice::rng::mix64;
use crate::lattice::LatticeBox;
use crate::stats::{linear_fit, moments, tail_rate_fit, RateFit};
use crate::subadd::{estimate_mu_from, sample_direction, BoxPolicy, DirectionSamples};

use super::plan::ExperimentPlan;
use super::{fmt, ExperimentReport, Status, Table, Verdict};

/// Replicate cells along the plan's direction, sampled or synthetic.
pub type Cells = DirectionSamples;

pub fn direction_cells(plan: &ExperimentPlan) -> Result<Cells> {
    let y = plan.y();
    if let Some(s) = &plan.synthetic {
        return Ok(s.samples(&y, &plan.ns, plan.replicates));
    }
    sample_direction(&y, &plan.ns, plan.p, plan.replicates, plan.seed, BoxPolicy::default())
}

fn digests(plan: &ExperimentPlan, cells: &Cells) -> Result<Vec<String>> {
    if plan.synthetic.is_some() {
        return Ok(Vec::new());
    }
    (0..2).map(|r| Ok(cells.replicate_config(plan.p, plan.seed, r)?.digest())).collect()
}

fn y_l1(plan: &ExperimentPlan) -> u64 {
    let y = plan.y();
    LatticeBox::l1(&y, &vec![0; y.len()])
}

/// Log-log regression of `Var D*(0, n·y)` on `n`; the exponent's 95% CI must sit below the tolerance.
pub fn variance_scaling(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let cells = direction_cells(plan)?;
    variance_from_cells(plan, &cells)
}

pub fn variance_from_cells(plan: &ExperimentPlan, cells: &Cells) -> Result<ExperimentReport> {
    let l1 = y_l1(plan);
    let mut table = Table::new("variance", &["n", "mean", "variance", "variance_stderr", "reference_m_log_m", "ratio"]);
    let mut rows = Vec::new();
    let mut log_n = Vec::new();
    let mut log_v = Vec::new();
    for (i, &n) in cells.ns.iter().enumerate() {
        let m = moments(&cells.column(i));
        let mm = (n * l1) as f64;
        let reference = mm * (1.0 + mm).ln();
        let ratio = m.variance / reference;
        table.push(vec![
            n.to_string(),
            fmt(m.mean),
            fmt(m.variance),
            fmt(m.variance_stderr),
            fmt(reference),
            fmt(ratio),
        ]);
        rows.push(json!({"n": n, "mean": m.mean, "variance": m.variance, "variance_stderr": m.variance_stderr,
                         "replicates": m.n, "ratio_to_m_log_m": ratio}));
        if m.variance > 0.0 {
            log_n.push((n as f64).ln());
            log_v.push(m.variance.ln());
        }
    }
    let tol = plan.tolerances.exponent_max;
    let criterion = "variance-exponent-below-2";
    let tolerance = format!("95% CI upper < {tol}");
    let samples = cells.rows.len();
    let (fit, verdict) = if log_n.len() < cells.ns.len() || log_n.len() < 3 {
        let v = Verdict::new(
            criterion,
            tolerance,
            Status::Degenerate,
            samples,
            "zero variance in some cell; exponent undefined",
        );
        (serde_json::Value::Null, v)
    } else {
        let f = linear_fit(&log_n, &log_v)?;
        let ci = f.slope_ci95();
        let v = Verdict::check(
            criterion,
            tolerance,
            ci.1 < tol,
            samples,
            format!("exponent {:.4}, CI [{:.4}, {:.4}]", f.slope, ci.0, ci.1),
        )
        .with_statistic(f.slope);
        (json!({"exponent": f.slope, "ci95": [ci.0, ci.1], "stderr": f.slope_stderr, "r_squared": f.r_squared}), v)
    };
    let mut report = ExperimentReport::new(plan, json!({"cells": rows, "fit": fit}), vec![verdict]);
    report.excluded = cells.excluded;
    report.digests = digests(plan, cells)?;
    report.tables.push(table);
    Ok(report)
}

/// Multipliers of the default lower window cut examined for sensitivity.
pub const WINDOW_SENSITIVITY: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.0];
const GRID_POINTS: usize = 20;

fn grid(lo: f64, hi: f64) -> Vec<f64> {
    (0..GRID_POINTS).map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).collect()
}

/// Exponential fit of the log-survival of `|D* − mean|/√m` over the window.
pub fn tail_profile(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let cells = direction_cells(plan)?;
    tail_from_cells(plan, &cells)
}

pub fn tail_from_cells(plan: &ExperimentPlan, cells: &Cells) -> Result<ExperimentReport> {
    let m = (cells.ns[0] * y_l1(plan)) as f64;
    let values = cells.column(0);
    let mean = moments(&values).mean;
    let z: Vec<f64> = values.iter().map(|v| (v - mean).abs() / m.sqrt()).collect();
    let samples = z.len();
    let [lo, hi] = plan.window.expect("resolved plan has a window");
    let criterion_slope = "tail-slope-negative";
    let criterion_r2 = "tail-r-squared";
    let r2_tol = plan.tolerances.r_squared_min;
    if z.iter().all(|&v| v == z[0]) {
        let why = format!("all mass at {}", z[0]);
        let verdicts = vec![
            Verdict::new(criterion_slope, "slope < 0", Status::Degenerate, samples, why.clone()),
            Verdict::new(criterion_r2, format!("R² ≥ {r2_tol}"), Status::Degenerate, samples, why),
        ];
        let mut r = ExperimentReport::new(plan, json!({"degenerate": true}), verdicts);
        r.excluded = cells.excluded;
        return Ok(r);
    }
    let default_lo = 1.0 + m.ln();
    let sensitivity: Vec<serde_json::Value> = WINDOW_SENSITIVITY
        .iter()
        .map(|&f| {
            let cut = f * default_lo;
            match tail_rate_fit(&z, &grid(cut, hi)) {
                Ok(fit) => json!({"lower": cut, "usable_points": fit.points.len(), "rate": fit.rate, "r_squared": fit.r_squared}),
                Err(e) => json!({"lower": cut, "usable_points": 0, "error": e.to_string()}),
            }
        })
        .collect();
    let fit: RateFit<f64> = tail_rate_fit(&z, &grid(lo, hi)).map_err(|e| {
        let e = match e {
            Error::Insufficient(m) => m,
            other => other.to_string(),
        };
        Error::Insufficient(format!(
            "{e} in window [{lo:.3}, {hi:.3}] ({} samples, max |D*−mean|/√m = {:.3}); lower-cut sensitivity: {}",
            samples,
            z.iter().cloned().fold(0.0, f64::max),
            serde_json::Value::Array(sensitivity.clone())
        ))
    })?;
    let mut table = Table::new("tail", &["x", "exceed", "log_survival"]);
    for &(x, c) in &fit.points {
        table.push(vec![fmt(x), c.to_string(), fmt((c as f64 / samples as f64).ln())]);
    }
    let verdicts = vec![
        Verdict::check(criterion_slope, "slope < 0", fit.rate > 0.0, samples, format!("slope {:.4}", -fit.rate))
            .with_statistic(-fit.rate),
        Verdict::check(
            criterion_r2,
            format!("R² ≥ {r2_tol}"),
            fit.r_squared >= r2_tol,
            samples,
            format!("R² {:.4}", fit.r_squared),
        )
        .with_statistic(fit.r_squared),
    ];
    let payload = json!({
        "n": cells.ns[0], "window": [lo, hi], "mean": mean,
        "slope": -fit.rate, "slope_stderr": fit.stderr, "r_squared": fit.r_squared,
        "points": fit.points, "sensitivity": sensitivity,
    });
    let mut report = ExperimentReport::new(plan, payload, verdicts);
    report.excluded = cells.excluded;
    report.digests = digests(plan, cells)?;
    report.tables.push(table);
    Ok(report)
}

/// `g(n) = ĥ(ny)/n − μ̂(y)`: nonnegative within CI and of order `√m·log(1+m)/n`.
pub fn mean_gap(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let cells = direction_cells(plan)?;
    gap_from_cells(plan, &cells)
}

pub fn gap_from_cells(plan: &ExperimentPlan, cells: &Cells) -> Result<ExperimentReport> {
    let l1 = y_l1(plan);
    let y = plan.y();
    let fitted = estimate_mu_from::<f64>(cells, plan.bootstrap, mix64(plan.seed ^ 0x4d55))?;
    let given = plan.norm.estimates.as_ref().and_then(|es| es.iter().find(|e| e.direction == y).cloned());
    let (mu, hw, constant) = match &given {
        Some(e) => (e.mu, e.half_width(), None),
        None => (fitted.mu, fitted.half_width(), Some(fitted.correction)),
    };
    let mut table = Table::new("gap", &["n", "ratio", "gap", "ci", "normalized"]);
    let mut rows = Vec::new();
    let mut nonneg = true;
    let mut max_gap = 0f64;
    let (mut ln_n, mut qs) = (Vec::new(), Vec::new());
    for (i, &n) in cells.ns.iter().enumerate() {
        let mo = moments(&cells.column(i));
        let nf = n as f64;
        let ratio = mo.mean / nf;
        let g = ratio - mu;
        let ci = hw + 1.96 * mo.stderr / nf;
        let mm = (n * l1) as f64;
        let q = g * nf / (mm.sqrt() * (1.0 + mm).ln());
        nonneg &= g >= -ci;
        max_gap = max_gap.max(g.abs());
        ln_n.push(nf.ln());
        qs.push(q);
        table.push(vec![n.to_string(), fmt(ratio), fmt(g), fmt(ci), fmt(q)]);
        rows.push(json!({"n": n, "ratio": ratio, "gap": g, "ci": ci, "normalized": q}));
    }
    let samples = cells.rows.len();
    let constant = constant.unwrap_or_else(|| qs.iter().cloned().fold(0.0, f64::max));
    let trend = linear_fit(&ln_n, &qs)?;
    let (lo, hi) = trend.slope_ci95();
    let bounded = lo <= 0.0;
    let bounded_verdict = if hw > max_gap {
        Verdict::new(
            "gap-bounded",
            "normalized-gap trend vs log n not significantly > 0",
            Status::Inconclusive,
            samples,
            format!("μ̂ half-width {hw:.4} exceeds every observed gap (max {max_gap:.4})"),
        )
    } else {
        Verdict::check(
            "gap-bounded",
            "normalized-gap trend vs log n not significantly > 0",
            bounded,
            samples,
            format!("fitted constant {constant:.4}; trend slope {:.4} CI [{lo:.4}, {hi:.4}]", trend.slope),
        )
    }
    .with_statistic(constant);
    let verdicts = vec![
        Verdict::check("gap-nonnegative", "g(n) ≥ −CI for every n", nonneg, samples, format!("μ̂ = {mu:.5} ± {hw:.5}")),
        bounded_verdict,
    ];
    let payload = json!({
        "mu": mu, "mu_half_width": hw, "mu_source": if given.is_some() { "given" } else { "fitted" },
        "fit_warning": fitted.warning, "fitted_constant": constant, "cells": rows,
        "trend": {"slope": trend.slope, "ci95": [lo, hi]},
    });
    let mut report = ExperimentReport::new(plan, payload, verdicts);
    report.excluded = cells.excluded;
    report.digests = digests(plan, cells)?;
    report.tables.push(table);
    Ok(report)
}
