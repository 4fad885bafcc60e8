//! Exponential tails: finite-cluster and hole radii, `(D* − ρ*‖y‖₁)⁺`, and `ρ` calibration.

use serde_json::json;

use crate::clusters::{origin_radii, TailHistogram};
use crate::error::Result;
use crate::lattice::LatticeBox;
use crate::stats::{quantile, tail_rate_fit};
use crate::subadd::{sample_direction, BoxPolicy};

use super::plan::ExperimentPlan;
use super::{fmt, ExperimentReport, Status, Table, Verdict};

/// `ρ` is this quantile of `D*(0, y)/‖y‖₁`…
pub const RHO_QUANTILE: f64 = 0.999;
/// …times this margin.
pub const RHO_MARGIN: f64 = 1.25;

pub fn calibrate_rho(ratios: &[f64]) -> f64 {
    RHO_MARGIN * quantile(ratios, RHO_QUANTILE)
}

fn histogram_table(name: &str, h: &TailHistogram) -> Table {
    let mut t = Table::new(name, &["r", "exceed_count", "n_samples"]);
    for (r, c) in h.thresholds.iter().zip(&h.exceed) {
        t.push(vec![r.to_string(), c.to_string(), h.n_samples.to_string()]);
    }
    t
}

fn tail_verdict(criterion: &str, h: &TailHistogram, r2_min: f64) -> Verdict {
    let tolerance = format!("rate > 0 and R² ≥ {r2_min}");
    match &h.fit {
        Some(f) => Verdict::check(
            criterion,
            tolerance,
            f.rate > 0.0 && f.r_squared >= r2_min,
            h.n_samples,
            format!(
                "rate {:.4} ± {:.4}, R² {:.4}, {} events, {} bins",
                f.rate,
                f.stderr,
                f.r_squared,
                h.n_events,
                f.points.len()
            ),
        )
        .with_statistic(f.rate),
        None => Verdict::new(
            criterion,
            tolerance,
            Status::Inconclusive,
            h.n_samples,
            format!(
                "no fit ({} events, exceedances {:?}): {}",
                h.n_events,
                &h.exceed[..h.exceed.len().min(6)],
                h.note.as_deref().unwrap_or("")
            ),
        ),
    }
}

/// Tails of the finite-cluster radius and of the hole radius at the origin.
pub fn cluster_tails(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let g = LatticeBox::centered(plan.dim, plan.side.expect("resolved"))?;
    let radii = origin_radii(&g, plan.p, plan.seed, plan.replicates)?;
    let finite = TailHistogram::from_observations(&radii.iter().map(|r| r.0).collect::<Vec<_>>());
    let hole = TailHistogram::from_observations(&radii.iter().map(|r| Some(r.1)).collect::<Vec<_>>());
    let r2 = plan.tolerances.cluster_r_squared_min;
    let verdicts = vec![tail_verdict("finite-radius-tail", &finite, r2), tail_verdict("hole-tail", &hole, r2)];
    let payload = json!({
        "finite_radius": {"fit": finite.sidecar(), "thresholds": finite.thresholds, "exceed": finite.exceed},
        "hole": {"fit": hole.sidecar(), "thresholds": hole.thresholds, "exceed": hole.exceed},
    });
    let mut report = ExperimentReport::new(plan, payload, verdicts);
    report.tables.push(histogram_table("finite_radius_tail", &finite));
    report.tables.push(histogram_table("hole_tail", &hole));
    Ok(report)
}

fn star_samples(plan: &ExperimentPlan) -> Result<(Vec<f64>, u64, usize)> {
    let y = plan.y();
    let m = plan.ns[0] * LatticeBox::l1(&y, &vec![0; y.len()]);
    let s = match &plan.synthetic {
        Some(law) => law.samples(&y, &plan.ns, plan.replicates),
        None => sample_direction(&y, &plan.ns, plan.p, plan.replicates, plan.seed, BoxPolicy::default())?,
    };
    Ok((s.column(0), m, s.excluded))
}

/// Exponential decay of `P(D*(0, y) > ρ*‖y‖₁ + r)`; `ρ*` is the plan constant,
/// or the median of `D*/‖y‖₁` when absent.
pub fn distance_tail(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let (samples, m, excluded) = star_samples(plan)?;
    let mf = m as f64;
    let ratios: Vec<f64> = samples.iter().map(|s| s / mf).collect();
    let rho_star = plan.constant.unwrap_or_else(|| quantile(&ratios, 0.5));
    let start = (rho_star * mf).ceil() as i64;
    let top = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) as i64;
    let thresholds: Vec<f64> = (start..top.max(start)).map(|r| r as f64).collect();
    let fit = tail_rate_fit(&samples, &thresholds)?;
    let tolerance = "rate > 0";
    let verdict = if fit.degenerate {
        Verdict::new("distance-tail-rate", tolerance, Status::Degenerate, samples.len(), "constant samples")
    } else {
        Verdict::check(
            "distance-tail-rate",
            tolerance,
            fit.rate > 0.0,
            samples.len(),
            format!(
                "rate {:.4} ± {:.4}, R² {:.4}, {} thresholds above {:.1}",
                fit.rate,
                fit.stderr,
                fit.r_squared,
                fit.points.len(),
                rho_star * mf
            ),
        )
        .with_statistic(fit.rate)
    };
    let mut table = Table::new("distance_tail", &["excess", "exceed_count", "n_samples"]);
    for &(r, c) in &fit.points {
        table.push(vec![fmt(r - rho_star * mf), c.to_string(), samples.len().to_string()]);
    }
    let payload = json!({"m": m, "rho_star": rho_star, "fit": fit});
    let mut report = ExperimentReport::new(plan, payload, vec![verdict]);
    report.excluded = excluded;
    report.tables.push(table);
    Ok(report)
}

/// `ρ = 1.25 ×` the 99.9th percentile of `D*(0, y)/‖y‖₁`.
pub fn rho_calibration(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let (samples, m, excluded) = star_samples(plan)?;
    let ratios: Vec<f64> = samples.iter().map(|s| s / m as f64).collect();
    let rho = calibrate_rho(&ratios);
    let above = ratios.iter().filter(|&&r| r > rho).count() as f64 / ratios.len() as f64;
    let verdict = Verdict::check(
        "rho-exceedance",
        format!("fraction of D*/‖y‖₁ above ρ ≤ {}", 1.0 - RHO_QUANTILE),
        above <= 1.0 - RHO_QUANTILE,
        ratios.len(),
        format!("ρ = {rho:.4}, suggested K = {:.4}", 4.0 * rho.max(1.0) + 1.0),
    )
    .with_statistic(rho);
    let payload = json!({
        "m": m, "rho": rho.max(1.0), "raw_rho": rho, "quantile": quantile(&ratios, RHO_QUANTILE),
        "exceed_fraction": above, "max_ratio": ratios.iter().copied().fold(0.0, f64::max),
    });
    let mut report = ExperimentReport::new(plan, payload, vec![verdict]);
    report.excluded = excluded;
    Ok(report)
}
