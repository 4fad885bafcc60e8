//! Shape corridor `B_μ(t − C√t log t) ∩ giant ⊆ B⁰(t) ⊆ B_μ(t + C√t log t)` on one configuration.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::chemdist::distance_field_from;
use crate::clusters::{label_clusters, nearest_giant_index};
use crate::error::{Error, Result};
use crate::lattice::rng::{derive_seed, mix64};
use crate::lattice::{EdgeConfiguration, LatticeBox};
use crate::subadd::{estimate_mu_from, sample_direction, BoxPolicy, MuEstimate, NormEstimate};

use super::plan::{ExperimentPlan, NormSpec};
use super::{fmt, ExperimentReport, Table, Verdict};

const STREAM_SHAPE: u64 = 0x53;
const STREAM_NORM: u64 = 0x4E;

/// Norm from given estimates, or fitted along each direction of the spec.
pub fn build_norm(
    spec: &NormSpec,
    p: f64,
    seed: u64,
    bootstrap: usize,
) -> Result<(NormEstimate<f64>, Vec<MuEstimate<f64>>)> {
    if let Some(given) = &spec.estimates {
        return Ok((NormEstimate::build(given, spec.lattice_symmetric)?, Vec::new()));
    }
    let fits: Vec<MuEstimate<f64>> = spec
        .directions
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let s = derive_seed(seed, STREAM_NORM, i as u64);
            let samples = sample_direction(y, &spec.ns, p, spec.replicates, s, BoxPolicy::default())?;
            estimate_mu_from(&samples, bootstrap, mix64(s))
        })
        .collect::<Result<_>>()?;
    let est: Vec<_> = fits.iter().map(MuEstimate::direction_estimate).collect();
    Ok((NormEstimate::build(&est, spec.lattice_symmetric)?, fits))
}

/// Chemical distance from `0*` and norm value, per giant vertex.
#[derive(Clone, Debug)]
pub struct Corridor {
    pub points: Vec<(u32, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorridorRow {
    pub t: u64,
    pub constant: f64,
    /// Giant vertices inside the inner μ-ball but farther than `t`.
    pub inner: usize,
    /// Vertices within distance `t` but outside the outer μ-ball.
    pub outer: usize,
    pub denominator: usize,
    pub fraction: f64,
}

fn width(t: u64) -> f64 {
    let t = t as f64;
    t.sqrt() * t.ln()
}

pub fn corridor_profile(c: &Corridor, t: u64, constant: f64) -> CorridorRow {
    let tf = t as f64;
    let (lo, hi) = (tf - constant * width(t), tf + constant * width(t));
    let (mut inner, mut outer, mut denom) = (0, 0, 0);
    for &(d, mu) in &c.points {
        let near = (d as u64) <= t;
        if near || mu <= hi {
            denom += 1;
        }
        if !near && mu <= lo {
            inner += 1;
        }
        if near && mu > hi {
            outer += 1;
        }
    }
    let fraction = if denom == 0 { 0.0 } else { (inner + outer) as f64 / denom as f64 };
    CorridorRow { t, constant, inner, outer, denominator: denom, fraction }
}

/// Smallest `C ≥ 0` with no violation at radius `t`.
pub fn fit_corridor_constant(c: &Corridor, t: u64) -> f64 {
    let tf = t as f64;
    let w = width(t);
    c.points.iter().map(|&(d, mu)| if (d as u64) <= t { (mu - tf) / w } else { (tf - mu) / w }).fold(0.0, f64::max)
}

pub fn shape_corridor(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let side = plan.side.expect("resolved");
    let g = LatticeBox::centered(plan.dim, side)?;
    let config = EdgeConfiguration::sample(g.clone(), plan.p, derive_seed(plan.seed, STREAM_SHAPE, 0))?;
    let lab = label_clusters(&config);
    if !lab.is_valid() {
        return Err(Error::DataQuality("no crossing cluster in the shape configuration".into()));
    }
    let (norm, fits) = build_norm(&plan.norm, plan.p, plan.seed, plan.bootstrap)?;
    let src = nearest_giant_index(&lab, &g, g.index_of(&vec![0; plan.dim])?)?;
    let field = distance_field_from(&config, src);
    let raw = field.raw();
    let mus: Vec<f64> = (0..g.vertex_count()).into_par_iter().map(|v| norm.eval_lattice(&g.point_of(v))).collect();
    let corridor =
        Corridor { points: (0..g.vertex_count()).filter(|&v| lab.in_giant(v)).map(|v| (raw[v], mus[v])).collect() };
    let t0 = plan.ts[0];
    let fitted = plan.constant.is_none();
    let constant = plan.constant.unwrap_or_else(|| fit_corridor_constant(&corridor, t0));

    let t_max = *plan.ts.last().expect("validated");
    let reach = t_max as f64 + constant * width(t_max);
    let on_face = |v: usize| {
        (0..plan.dim).any(|a| {
            let c = g.local_coord(v, a);
            c == 0 || c + 1 == side
        })
    };
    if let Some(v) = (0..g.vertex_count()).find(|&v| on_face(v) && (mus[v] <= reach || (raw[v] as u64) <= t_max)) {
        return Err(Error::Range(format!(
            "the radius-{reach:.1} ball reaches the box face at {:?}; enlarge the box (side {side})",
            g.point_of(v)
        )));
    }

    let mut table = Table::new("shape", &["t", "constant", "inner", "outer", "denominator", "fraction", "fraction_c0"]);
    let mut rows = Vec::new();
    let mut ok = true;
    let mut worst = 0f64;
    for &t in &plan.ts {
        let r = corridor_profile(&corridor, t, constant);
        let r0 = corridor_profile(&corridor, t, 0.0);
        if !fitted || t > t0 {
            ok &= r.fraction <= plan.tolerances.shape_violation_max;
            worst = worst.max(r.fraction);
        }
        table.push(vec![
            t.to_string(),
            fmt(constant),
            r.inner.to_string(),
            r.outer.to_string(),
            r.denominator.to_string(),
            fmt(r.fraction),
            fmt(r0.fraction),
        ]);
        rows.push(json!({"row": r, "fraction_without_margin": r0.fraction}));
    }
    let scope = if fitted { format!("t > {t0}") } else { "every t".into() };
    let verdict = Verdict::check(
        "shape-corridor",
        format!("violation fraction ≤ {} at {scope}", plan.tolerances.shape_violation_max),
        ok,
        corridor.points.len(),
        format!(
            "C = {constant:.4} ({}), worst fraction {worst:.5}",
            if fitted { format!("fitted at t = {t0}") } else { "given".into() }
        ),
    )
    .with_statistic(worst);
    let payload = json!({
        "constant": constant, "constant_fitted_at": if fitted { Some(t0) } else { None },
        "giant_size": corridor.points.len(), "rows": rows,
        "norm": norm.to_json(), "direction_fits": fits,
    });
    let mut report = ExperimentReport::new(plan, payload, vec![verdict]);
    report.digests = vec![config.digest()];
    report.tables.push(table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;
    use crate::subadd::DirectionEstimate;

    fn l1_plan(p: f64, side: usize, ts: Vec<u64>) -> ExperimentPlan {
        let mut pl = ExperimentPlan::new(ExperimentKind::Shape, p, 30, 3);
        pl.side = Some(side);
        pl.ts = ts;
        pl.norm.estimates =
            Some(vec![DirectionEstimate::exact(vec![1, 0], 1.0), DirectionEstimate::exact(vec![0, 1], 1.0)]);
        pl
    }

    #[test]
    fn full_percolation_has_no_violations() {
        for c in [0.0, 0.5] {
            let mut pl = l1_plan(1.0, 101, vec![10, 20, 30]);
            pl.constant = Some(c);
            let r = shape_corridor(&pl).unwrap();
            assert!(r.all_passed());
            for row in r.payload["rows"].as_array().unwrap() {
                assert_eq!(row["row"]["fraction"].as_f64().unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn zero_margin_shows_violations_at_finite_t() {
        let mut pl = l1_plan(0.7, 161, vec![20, 30]);
        pl.norm.estimates =
            Some(vec![DirectionEstimate::exact(vec![1, 0], 1.25), DirectionEstimate::exact(vec![1, 1], 2.3)]);
        let r = shape_corridor(&pl).unwrap();
        let f0 = r.payload["rows"][0]["fraction_without_margin"].as_f64().unwrap();
        assert!(f0 > 0.0);
        // The fitted constant clears the fitting radius exactly.
        assert_eq!(r.payload["rows"][0]["row"]["fraction"].as_f64().unwrap(), 0.0);
    }

    #[test]
    fn ball_leaving_box_is_range_error() {
        let pl = l1_plan(1.0, 41, vec![10, 25]);
        assert!(matches!(shape_corridor(&pl), Err(Error::Range(_))));
    }

    #[test]
    fn fitted_constant_is_minimal() {
        let c = Corridor { points: vec![(3, 8.0), (10, 5.0), (6, 6.0)] };
        let t = 6;
        let k = fit_corridor_constant(&c, t);
        assert_eq!(corridor_profile(&c, t, k).fraction, 0.0);
        assert!(corridor_profile(&c, t, k * 0.99).fraction > 0.0);
    }
}
