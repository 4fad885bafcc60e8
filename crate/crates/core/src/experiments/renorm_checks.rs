//! Agreement of the renormalized distance with `D*`, and the Efron–Stein comparison.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::chemdist::Bfs;
use crate::clusters::{label_clusters, nearest_giant_index};
use crate::error::{Error, Result};
use crate::lattice::rng::derive_seed;
use crate::lattice::{EdgeConfiguration, LatticeBox};
use crate::renorm::{efron_stein_v_minus, EfronSteinEstimate, EfronSteinSample, RenormEngine};
use crate::scalar::Scalar;
use crate::subadd::{check_exclusion, BoxPolicy};

use super::plan::ExperimentPlan;
use super::{fmt, ExperimentReport, Status, Table, Verdict};

const STREAM_AGREEMENT: u64 = 0x41;
const STREAM_EFRON_STEIN: u64 = 0x45;

/// `D*(0, y)` and `D^t(0*, y*)` for each scale of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementSample {
    pub star: u64,
    pub renormalized: Vec<f64>,
}

impl AgreementSample {
    pub fn disagrees(&self, i: usize) -> bool {
        (self.renormalized[i] - self.star as f64).abs() > f64::tolerance() * (self.star as f64).max(1.0)
    }
}

/// One configuration against every engine; `None` when the giant proxy is unusable.
/// Domination `D^t ≤ D*` is asserted exactly.
pub fn agreement_replicate(
    config: &EdgeConfiguration,
    engines: &mut [RenormEngine<f64>],
    bfs: &mut Bfs,
    y: &[i64],
) -> Result<Option<AgreementSample>> {
    let g = config.geometry();
    let lab = label_clusters(config);
    if !lab.is_valid() {
        return Ok(None);
    }
    let s = nearest_giant_index(&lab, g, g.index_of(&vec![0; g.dim()])?)?;
    let t = nearest_giant_index(&lab, g, g.index_of(y)?)?;
    bfs.run(config, s, Some(t), None);
    let star = bfs
        .distance(t)
        .finite()
        .ok_or_else(|| Error::Structural("projections onto the giant proxy are disconnected".into()))?;
    let mut renormalized = Vec::with_capacity(engines.len());
    for e in engines.iter_mut() {
        let d = e.distance_between(config, s, t).0;
        if d > star as f64 * (1.0 + f64::tolerance()) {
            return Err(Error::LawViolation {
                law: format!("domination at t = {}: D^t = {d} > D* = {star}", e.scheme().t()),
                digest: config.digest(),
            });
        }
        renormalized.push(d);
    }
    Ok(Some(AgreementSample { star, renormalized }))
}

fn target(plan: &ExperimentPlan) -> Vec<i64> {
    plan.y().iter().map(|&c| c * plan.ns[0] as i64).collect()
}

fn geometry_for(y: &[i64]) -> Result<LatticeBox> {
    BoxPolicy::default().geometry(y.len(), LatticeBox::l1(y, &vec![0; y.len()]))
}

/// Disagreement frequency `P(D^t(0*, y*) ≠ D*(0, y))` per scale; must not increase in `t`.
pub fn renorm_agreement(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let y = target(plan);
    let g = geometry_for(&y)?;
    let engines: Vec<RenormEngine<f64>> =
        plan.ts.iter().map(|&t| Ok(RenormEngine::new(&g, plan.scheme.at(t as u32)?))).collect::<Result<_>>()?;
    let results: Vec<Option<AgreementSample>> = (0..plan.replicates as u64)
        .into_par_iter()
        .map_init(
            || (engines.clone(), Bfs::new()),
            |(engines, bfs), r| {
                let config = EdgeConfiguration::sample(g.clone(), plan.p, derive_seed(plan.seed, STREAM_AGREEMENT, r))?;
                agreement_replicate(&config, engines, bfs, &y)
            },
        )
        .collect::<Result<_>>()?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    check_exclusion(excluded, plan.replicates)?;
    let samples: Vec<AgreementSample> = results.into_iter().flatten().collect();
    let n = samples.len() as f64;

    let mut table = Table::new("agreement", &["t", "disagreement", "stderr", "mean_gap"]);
    let mut freq = Vec::new();
    let mut rows = Vec::new();
    for (i, &t) in plan.ts.iter().enumerate() {
        let k = samples.iter().filter(|s| s.disagrees(i)).count() as f64;
        let f = k / n;
        let se = (f * (1.0 - f) / n).sqrt();
        let gap = samples.iter().map(|s| s.star as f64 - s.renormalized[i]).sum::<f64>() / n;
        table.push(vec![t.to_string(), fmt(f), fmt(se), fmt(gap)]);
        rows.push(json!({"t": t, "disagreement": f, "stderr": se, "mean_gap": gap}));
        freq.push((f, se));
    }
    let sig = plan.tolerances.agreement_sigmas;
    let worst = freq
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) / (w[0].1.powi(2) + w[1].1.powi(2)).sqrt().max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    let rises = freq.windows(2).filter(|w| w[1].0 > w[0].0 + sig * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt()).count();
    let verdict = Verdict::check(
        "agreement-non-increasing",
        format!("each step rises by at most {sig} combined stderr"),
        rises == 0,
        samples.len(),
        format!("{rises} significant rises; frequencies {:?}", freq.iter().map(|f| f.0).collect::<Vec<_>>()),
    );
    let verdict = if worst.is_finite() { verdict.with_statistic(worst) } else { verdict };
    let domination = Verdict::check(
        "domination",
        "D^t(0*, y*) ≤ D*(0, y) on every replicate",
        true,
        samples.len(),
        "asserted per replicate",
    );
    let mut report = ExperimentReport::new(plan, json!({"target": y, "rows": rows}), vec![verdict, domination]);
    report.excluded = excluded;
    report.digests = (0..2)
        .map(
            |r| Ok(EdgeConfiguration::sample(g.clone(), plan.p, derive_seed(plan.seed, STREAM_AGREEMENT, r))?.digest()),
        )
        .collect::<Result<_>>()?;
    report.tables.push(table);
    Ok(report)
}

/// `Var D^t(0, y)` against `E[V₋]`, resampling only the cells a geodesic crosses.
pub fn efron_stein_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    let plan = &plan.resolved();
    let y = target(plan);
    let g = geometry_for(&y)?;
    let origin = vec![0i64; y.len()];
    let engine = RenormEngine::new(&g, plan.scheme.at(plan.scheme.t)?);
    let samples: Vec<EfronSteinSample<f64>> = (0..plan.replicates as u64)
        .into_par_iter()
        .map_init(
            || engine.clone(),
            |engine, r| {
                let seed = derive_seed(plan.seed, STREAM_EFRON_STEIN, r);
                let config = EdgeConfiguration::sample(g.clone(), plan.p, seed)?;
                efron_stein_v_minus(engine, &config, &origin, &y, plan.resamples, seed)
            },
        )
        .collect::<Result<_>>()?;
    let est = EfronSteinEstimate::from_samples(&samples);
    let sig = plan.tolerances.efron_stein_sigmas;
    let tolerance = format!("Var ≤ E[V-] + {sig} combined stderr");
    let verdict = if est.var_s == 0.0 && est.mean_v_minus == 0.0 {
        Verdict::new("efron-stein", tolerance, Status::Pass, samples.len(), "both sides vanish")
    } else {
        Verdict::check(
            "efron-stein",
            tolerance,
            est.inequality_holds(sig),
            samples.len(),
            format!(
                "Var = {:.4} ± {:.4}, E[V-] = {:.4} ± {:.4}",
                est.var_s, est.var_s_stderr, est.mean_v_minus, est.v_minus_stderr
            ),
        )
    }
    .with_statistic((est.var_s - est.mean_v_minus) / est.combined_stderr().max(f64::MIN_POSITIVE));
    let cap = Verdict::check(
        "v-minus-cap",
        "V- ≤ 3^d K² t (S + t) on every replicate",
        true,
        samples.len(),
        "asserted per replicate",
    );
    let mut table = Table::new("efron_stein", &["replicate", "s", "v_minus", "visited_cells", "cap"]);
    for (i, s) in samples.iter().enumerate() {
        table.push(vec![i.to_string(), fmt(s.s), fmt(s.v_minus), s.visited_cells.to_string(), fmt(s.cap)]);
    }
    let payload = json!({
        "target": y, "var_s": est.var_s, "var_s_stderr": est.var_s_stderr,
        "mean_v_minus": est.mean_v_minus, "v_minus_stderr": est.v_minus_stderr,
        "combined_stderr": est.combined_stderr(), "replicates": est.replicates, "resamples": est.resamples,
        "mean_s": est.s_values.iter().sum::<f64>() / est.s_values.len().max(1) as f64,
    });
    let mut report = ExperimentReport::new(plan, payload, vec![verdict, cap]);
    report.digests = (0..2)
        .map(|r| {
            Ok(EdgeConfiguration::sample(g.clone(), plan.p, derive_seed(plan.seed, STREAM_EFRON_STEIN, r))?.digest())
        })
        .collect::<Result<_>>()?;
    report.tables.push(table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;
    use crate::lattice::RenormScheme;

    fn agreement_plan(p: f64, n: u64, ts: Vec<u64>, replicates: usize) -> ExperimentPlan {
        let mut pl = ExperimentPlan::new(ExperimentKind::Renorm, p, replicates, 11);
        pl.ns = vec![n];
        pl.ts = ts;
        pl
    }

    #[test]
    fn full_percolation_always_agrees() {
        let r = renorm_agreement(&agreement_plan(1.0, 12, vec![2, 4], 30)).unwrap();
        for row in r.payload["rows"].as_array().unwrap() {
            assert_eq!(row["disagreement"].as_f64().unwrap(), 0.0);
        }
        assert!(r.all_passed());
    }

    #[test]
    fn red_shortcut_across_a_detour_disagrees() {
        // 0 and e1 are joined only through a detour of length 11 over a crossing row.
        let g = LatticeBox::centered(2, 21).unwrap();
        let mut pairs: Vec<(Vec<i64>, Vec<i64>)> = (-10..10).map(|x| (vec![x, 5], vec![x + 1, 5])).collect();
        for x in [0, 1] {
            pairs.extend((0..5).map(|y| (vec![x, y], vec![x, y + 1])));
        }
        let config = EdgeConfiguration::from_open_pairs(g.clone(), &pairs).unwrap();
        let mut engines = vec![RenormEngine::new(&g, RenormScheme::new(1, 5.0, 1.0).unwrap())];
        let s = agreement_replicate(&config, &mut engines, &mut Bfs::new(), &[1, 0]).unwrap().unwrap();
        assert_eq!(s.star, 11);
        assert_eq!(s.renormalized[0], 5.0);
        assert!(s.disagrees(0));
    }

    #[test]
    fn trivial_efron_stein_extremes() {
        for p in [0.0, 1.0] {
            let mut pl = ExperimentPlan::new(ExperimentKind::EfronStein, p, 30, 5);
            pl.ns = vec![6];
            pl.resamples = 2;
            let r = efron_stein_experiment(&pl).unwrap();
            assert_eq!(r.payload["var_s"].as_f64().unwrap(), 0.0, "p = {p}");
            assert_eq!(r.payload["mean_v_minus"].as_f64().unwrap(), 0.0, "p = {p}");
            assert!(r.all_passed());
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let pl = agreement_plan(0.7, 8, vec![2, 4], 30);
        let a = renorm_agreement(&pl).unwrap();
        let b = renorm_agreement(&pl).unwrap();
        assert_eq!(a.reproducible_json(), b.reproducible_json());
    }
}
