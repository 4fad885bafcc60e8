//! Replicate orchestration and the quantitative checks: variance scaling,
//! fluctuation tails, mean gap, shape corridor, renormalization agreement,
//! Efron–Stein comparison, skeleton counts and exponential tail fits.
//!
//! Every experiment is a pure function of its [`ExperimentPlan`]; wall-clock
//! data lives only in the [`Provenance`] block of the report.

mod plan;
mod renorm_checks;
mod scaling;
mod shape;
mod skeletons;
mod synthetic;
mod tails;

use std::time::Instant;

use serde::Serialize;

use crate::error::Result;

pub use plan::{ExperimentKind, ExperimentPlan, NormSpec, SchemeSpec, Tolerances};
pub use renorm_checks::{agreement_replicate, efron_stein_experiment, renorm_agreement, AgreementSample};
pub use scaling::{
    direction_cells, gap_from_cells, mean_gap, tail_from_cells, tail_profile, variance_from_cells, variance_scaling,
    Cells,
};
pub use shape::{build_norm, corridor_profile, fit_corridor_constant, shape_corridor, Corridor, CorridorRow};
pub use skeletons::{skeleton_count, skeleton_samples, SkeletonSample};
pub use synthetic::Synthetic;
pub use tails::{calibrate_rho, cluster_tails, distance_tail, rho_calibration, RHO_MARGIN, RHO_QUANTILE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// The data cannot decide (e.g. the uncertainty swamps the effect).
    Inconclusive,
    /// The statistic is undefined (e.g. zero variance everywhere).
    Degenerate,
}

/// Outcome of one declared criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub tolerance: String,
    pub status: Status,
    pub statistic: Option<f64>,
    pub samples: usize,
    pub detail: String,
}

impl Verdict {
    pub fn new(
        criterion: &str,
        tolerance: impl Into<String>,
        status: Status,
        samples: usize,
        detail: impl Into<String>,
    ) -> Self {
        Verdict {
            criterion: criterion.into(),
            tolerance: tolerance.into(),
            status,
            statistic: None,
            samples,
            detail: detail.into(),
        }
    }

    pub fn check(
        criterion: &str,
        tolerance: impl Into<String>,
        ok: bool,
        samples: usize,
        detail: impl Into<String>,
    ) -> Self {
        Self::new(criterion, tolerance, if ok { Status::Pass } else { Status::Fail }, samples, detail)
    }

    pub fn with_statistic(mut self, v: f64) -> Self {
        self.statistic = Some(v);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// A figure-ready series, written as CSV by the command-line tool.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Run metadata kept apart from the reproducible payload.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub runtime_seconds: f64,
    pub started_unix: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub kind: ExperimentKind,
    pub plan: ExperimentPlan,
    pub payload: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub excluded: usize,
    /// SHA-256 digests of a few replicate configurations, for spot re-derivation.
    pub digests: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
    pub provenance: Provenance,
}

pub const REPORT_SCHEMA: &str = "percolab.report/1";

impl ExperimentReport {
    pub(crate) fn new(plan: &ExperimentPlan, payload: serde_json::Value, verdicts: Vec<Verdict>) -> Self {
        ExperimentReport {
            schema: REPORT_SCHEMA.into(),
            kind: plan.kind,
            plan: plan.clone(),
            payload,
            verdicts,
            excluded: 0,
            digests: Vec::new(),
            tables: Vec::new(),
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION").into(),
                seed: plan.seed,
                runtime_seconds: 0.0,
                started_unix: 0,
            },
        }
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn verdict(&self, criterion: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }

    /// Everything except the provenance block; identical for identical plans.
    pub fn reproducible_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("provenance");
        v
    }
}

/// Validate the plan, dispatch on its kind and stamp provenance.
pub fn run(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let started = Instant::now();
    let started_unix =
        std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut report = match plan.kind {
        ExperimentKind::Variance => variance_scaling(plan),
        ExperimentKind::Tail => tail_profile(plan),
        ExperimentKind::Gap => mean_gap(plan),
        ExperimentKind::Shape => shape_corridor(plan),
        ExperimentKind::Renorm => renorm_agreement(plan),
        ExperimentKind::EfronStein => efron_stein_experiment(plan),
        ExperimentKind::Skeleton => skeleton_count(plan),
        ExperimentKind::ClusterTails => cluster_tails(plan),
        ExperimentKind::DistanceTail => distance_tail(plan),
        ExperimentKind::Rho => rho_calibration(plan),
    }?;
    report.provenance.runtime_seconds = started.elapsed().as_secs_f64();
    report.provenance.started_unix = started_unix;
    Ok(report)
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v}")
}
