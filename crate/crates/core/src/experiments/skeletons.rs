//! `Q_x`-skeleton counts of geodesics `0* → (nx)*` against `2n + 1`.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::chemdist::{geodesic_from_bfs, Bfs};
use crate::clusters::{label_clusters, nearest_giant_index};
use crate::error::{Error, Result};
use crate::lattice::rng::derive_seed;
use crate::lattice::{EdgeConfiguration, LatticeBox, Point};
use crate::subadd::{
    check_exclusion, classify_increments, estimate_h_ball, extract_skeleton, gap_check, BoxPolicy, HTable,
    NormEstimate, QxSet,
};

use super::plan::ExperimentPlan;
use super::shape::build_norm;
use super::{fmt, ExperimentReport, Status, Table, Verdict};

const STREAM_SKELETON: u64 = 0x4B;
const STREAM_TABLE: u64 = 0x54;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkeletonSample {
    pub n: u64,
    pub length: usize,
    /// Vertices of the `Q_x`-path `0, skeleton…, nx`.
    pub count: usize,
    pub long: usize,
    pub short: usize,
    pub queries: usize,
    pub indeterminate: usize,
}

/// Skeleton of the geodesic between the projections of `0` and `nx`, with both
/// defining clauses re-checked.
fn replicate(
    config: &EdgeConfiguration,
    bfs: &mut Bfs,
    q: &QxSet<'_, f64>,
    h: &HTable<f64>,
    n: u64,
) -> Result<Option<SkeletonSample>> {
    let g = config.geometry();
    let lab = label_clusters(config);
    if !lab.is_valid() {
        return Ok(None);
    }
    let origin = vec![0i64; g.dim()];
    let end: Point = q.x().iter().map(|&c| c * n as i64).collect();
    let s = nearest_giant_index(&lab, g, g.index_of(&origin)?)?;
    let t = nearest_giant_index(&lab, g, g.index_of(&end)?)?;
    bfs.run(config, s, Some(t), None);
    let path = geodesic_from_bfs(config, bfs, s, t)?.points;
    let mut queries = 0;
    let skeleton = extract_skeleton(&path, |y| {
        queries += 1;
        q.membership(h, y)
    })
    .map_err(|e| Error::LawViolation { law: format!("skeleton extraction: {e}"), digest: config.digest() })?;
    skeleton
        .check(&path, |y| q.membership(h, y))
        .map_err(|e| Error::LawViolation { law: format!("skeleton clauses: {e}"), digest: config.digest() })?;
    let cls = classify_increments(q, &skeleton);
    Ok(Some(SkeletonSample {
        n,
        length: path.len() - 1,
        count: skeleton.path_count(&origin, &end),
        long: cls.long,
        short: cls.short,
        queries,
        indeterminate: skeleton.indeterminate,
    }))
}

/// Skeleton counts for every `n` of the schedule, given the norm, the table of
/// `h` and the approximation constant.
pub fn skeleton_samples(
    plan: &ExperimentPlan,
    norm: &NormEstimate<f64>,
    table: &HTable<f64>,
    constant: f64,
) -> Result<(Vec<SkeletonSample>, usize)> {
    let x = plan.y();
    let q = QxSet::new(norm, &x, plan.classification_factor * constant)?;
    let x_l1 = LatticeBox::l1(&x, &vec![0; x.len()]);
    let mut all = Vec::new();
    let mut excluded = 0;
    for (i, &n) in plan.ns.iter().enumerate() {
        let g = BoxPolicy::default().geometry(x.len(), n * x_l1)?;
        let seed = derive_seed(plan.seed, STREAM_SKELETON, i as u64);
        let results: Vec<Option<SkeletonSample>> = (0..plan.replicates as u64)
            .into_par_iter()
            .map_init(Bfs::new, |bfs, r| {
                let config = EdgeConfiguration::sample(g.clone(), plan.p, derive_seed(seed, STREAM_SKELETON, r))?;
                replicate(&config, bfs, &q, table, n)
            })
            .collect::<Result<_>>()?;
        let ex = results.iter().filter(|r| r.is_none()).count();
        check_exclusion(ex, plan.replicates)?;
        excluded += ex;
        all.extend(results.into_iter().flatten());
    }
    Ok((all, excluded))
}

pub fn skeleton_count(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let x = plan.y();
    let d = x.len();
    let x_l1 = LatticeBox::l1(&x, &vec![0; d]);
    let (norm, fits) = build_norm(&plan.norm, plan.p, plan.seed, plan.bootstrap)?;
    let radius = (2 * d as u64 + 1) * x_l1;
    let table: HTable<f64> = estimate_h_ball(
        d,
        radius,
        plan.p,
        plan.table_replicates,
        derive_seed(plan.seed, STREAM_TABLE, 0),
        BoxPolicy::default(),
    )?;
    let (constant, gap) = match plan.constant {
        Some(c) => (c, serde_json::Value::Null),
        None => {
            let r = gap_check(&norm, &table, plan.threshold, 0.0)?;
            (
                r.minimal_constant,
                json!({"threshold": plan.threshold, "minimal_constant": r.minimal_constant, "rows": r.rows.len()}),
            )
        }
    };
    let (samples, excluded) = skeleton_samples(plan, &norm, &table, constant)?;

    let queries: usize = samples.iter().map(|s| s.queries).sum();
    let indeterminate: usize = samples.iter().map(|s| s.indeterminate).sum();
    let ind_fraction = if queries == 0 { 0.0 } else { indeterminate as f64 / queries as f64 };
    if ind_fraction > plan.tolerances.indeterminate_max {
        return Err(Error::DataQuality(format!(
            "{:.1}% of membership queries lacked h; widen the table",
            100.0 * ind_fraction
        )));
    }

    let mut csv = Table::new(
        "skeleton",
        &["n", "replicates", "mean_count", "max_count", "bound", "exceed_fraction", "mean_long", "mean_short"],
    );
    let mut rows = Vec::new();
    let mut last = (0.0, 0);
    for &n in &plan.ns {
        let at: Vec<&SkeletonSample> = samples.iter().filter(|s| s.n == n).collect();
        let bound = 2 * n as usize + 1;
        let k = at.len().max(1) as f64;
        let exceed = at.iter().filter(|s| s.count > bound).count() as f64 / k;
        let mean = at.iter().map(|s| s.count as f64).sum::<f64>() / k;
        let max = at.iter().map(|s| s.count).max().unwrap_or(0);
        let long = at.iter().map(|s| s.long as f64).sum::<f64>() / k;
        let short = at.iter().map(|s| s.short as f64).sum::<f64>() / k;
        csv.push(vec![
            n.to_string(),
            at.len().to_string(),
            fmt(mean),
            max.to_string(),
            bound.to_string(),
            fmt(exceed),
            fmt(long),
            fmt(short),
        ]);
        let counts: Vec<usize> = at.iter().map(|s| s.count).collect();
        rows.push(json!({"n": n, "bound": bound, "exceed_fraction": exceed, "mean_count": mean, "max_count": max,
                         "mean_long": long, "mean_short": short, "counts": counts}));
        last = (exceed, at.len());
    }
    let tol = plan.tolerances.skeleton_exceed_max;
    let n_max = plan.ns.last().copied().unwrap_or(0);
    let verdict = Verdict::check(
        "skeleton-count",
        format!("fraction above 2n+1 ≤ {tol} at n = {n_max}"),
        last.0 <= tol,
        last.1,
        format!(
            "exceedance {:.4}; C = {constant:.4}, classification constant {:.4}",
            last.0,
            plan.classification_factor * constant
        ),
    )
    .with_statistic(last.0);
    let structural = Verdict::new(
        "skeleton-structure",
        "both defining clauses on every extraction",
        Status::Pass,
        samples.len(),
        "asserted per replicate",
    );
    let payload = json!({
        "x": x, "constant": constant, "classification_constant": plan.classification_factor * constant,
        "gap": gap, "table_radius": radius, "table_size": table.len(),
        "indeterminate_fraction": ind_fraction, "rows": rows,
        "norm": norm.to_json(), "direction_fits": fits,
    });
    let mut report = ExperimentReport::new(plan, payload, vec![verdict, structural]);
    report.excluded = excluded;
    let g = BoxPolicy::default().geometry(d, plan.ns[0] * x_l1)?;
    report.digests = vec![EdgeConfiguration::sample(
        g,
        plan.p,
        derive_seed(derive_seed(plan.seed, STREAM_SKELETON, 0), STREAM_SKELETON, 0),
    )?
    .digest()];
    report.tables.push(csv);
    Ok(report)
}
