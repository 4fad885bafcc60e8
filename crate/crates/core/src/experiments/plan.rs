use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::RenormScheme;
use crate::subadd::{DirectionEstimate, MIN_REPLICATES};

use super::synthetic::Synthetic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Variance,
    Tail,
    Gap,
    Shape,
    Renorm,
    EfronStein,
    Skeleton,
    ClusterTails,
    DistanceTail,
    Rho,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::Variance,
        ExperimentKind::Tail,
        ExperimentKind::Gap,
        ExperimentKind::Shape,
        ExperimentKind::Renorm,
        ExperimentKind::EfronStein,
        ExperimentKind::Skeleton,
        ExperimentKind::ClusterTails,
        ExperimentKind::DistanceTail,
        ExperimentKind::Rho,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Variance => "variance",
            ExperimentKind::Tail => "tail",
            ExperimentKind::Gap => "gap",
            ExperimentKind::Shape => "shape",
            ExperimentKind::Renorm => "renorm",
            ExperimentKind::EfronStein => "efron-stein",
            ExperimentKind::Skeleton => "skeleton",
            ExperimentKind::ClusterTails => "cluster-tails",
            ExperimentKind::DistanceTail => "distance-tail",
            ExperimentKind::Rho => "rho",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Mesoscopic scheme parameters; `k` defaults to `4ρ + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    #[serde(default = "default_t")]
    pub t: u32,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

fn default_t() -> u32 {
    4
}

fn default_rho() -> f64 {
    4.0
}

impl Default for SchemeSpec {
    fn default() -> Self {
        SchemeSpec { t: default_t(), k: None, rho: default_rho() }
    }
}

impl SchemeSpec {
    pub fn k_value(&self) -> f64 {
        self.k.unwrap_or(4.0 * self.rho + 1.0)
    }

    pub fn at(&self, t: u32) -> Result<RenormScheme<f64>> {
        RenormScheme::new(t, self.k_value(), self.rho)
    }
}

/// Where the norm comes from: given estimates, or fitted along `directions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    #[serde(default = "default_norm_directions")]
    pub directions: Vec<Vec<i64>>,
    #[serde(default = "default_norm_ns")]
    pub ns: Vec<u64>,
    #[serde(default = "default_norm_replicates")]
    pub replicates: usize,
    /// Given estimates take precedence over fitting.
    #[serde(default)]
    pub estimates: Option<Vec<DirectionEstimate<f64>>>,
    /// Apply every signed permutation of each direction.
    #[serde(default = "yes")]
    pub lattice_symmetric: bool,
}

fn default_norm_directions() -> Vec<Vec<i64>> {
    vec![vec![1, 0], vec![1, 1], vec![2, 1]]
}

fn default_norm_ns() -> Vec<u64> {
    vec![16, 32, 64, 128]
}

fn default_norm_replicates() -> usize {
    60
}

fn yes() -> bool {
    true
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec {
            directions: default_norm_directions(),
            ns: default_norm_ns(),
            replicates: default_norm_replicates(),
            estimates: None,
            lattice_symmetric: true,
        }
    }
}

/// Declared acceptance levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Upper bound for the variance exponent's 95% CI.
    pub exponent_max: f64,
    pub r_squared_min: f64,
    pub shape_violation_max: f64,
    pub skeleton_exceed_max: f64,
    /// Slack, in combined stderr, for monotone agreement frequencies.
    pub agreement_sigmas: f64,
    /// Slack, in combined stderr, for the Efron–Stein inequality.
    pub efron_stein_sigmas: f64,
    pub cluster_r_squared_min: f64,
    pub indeterminate_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exponent_max: 2.0,
            r_squared_min: 0.8,
            shape_violation_max: 0.01,
            skeleton_exceed_max: 0.05,
            agreement_sigmas: 2.0,
            efron_stein_sigmas: 3.0,
            cluster_r_squared_min: 0.9,
            indeterminate_max: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub p: f64,
    /// Defaults to `e₁`.
    #[serde(default)]
    pub direction: Vec<i64>,
    /// Multiples of `direction` (the `n` schedule).
    #[serde(default)]
    pub ns: Vec<u64>,
    /// Radii (shape corridor) or mesoscopic scales (agreement).
    #[serde(default)]
    pub ts: Vec<u64>,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Resamples per cell (Efron–Stein).
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub scheme: SchemeSpec,
    /// Box side for single-configuration and cluster-tail runs.
    #[serde(default)]
    pub side: Option<usize>,
    #[serde(default)]
    pub norm: NormSpec,
    /// Approximation constant `C`; fitted when absent.
    #[serde(default)]
    pub constant: Option<f64>,
    #[serde(default = "default_classification")]
    pub classification_factor: f64,
    /// GAP threshold `M` on `‖x‖₁`.
    #[serde(default = "default_threshold")]
    pub threshold: u64,
    /// Replicates for the ball table of `h`.
    #[serde(default = "default_table_replicates")]
    pub table_replicates: usize,
    /// Moderate-deviation window `[lower, upper]` in units of `√n`;
    /// defaults to `[1 + log n, √n]`.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Replace sampled distances by a known law.
    #[serde(default)]
    pub synthetic: Option<Synthetic>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub csv_dir: Option<String>,
}

fn default_dim() -> usize {
    2
}

fn default_resamples() -> usize {
    10
}

fn default_bootstrap() -> usize {
    400
}

fn default_classification() -> f64 {
    crate::subadd::CLASSIFICATION_FACTOR
}

fn default_threshold() -> u64 {
    8
}

fn default_table_replicates() -> usize {
    100
}

pub const DEFAULT_SHAPE_SIDE: usize = 1024;
pub const DEFAULT_TAIL_SIDE: usize = 64;
pub const MIN_TAIL_PROFILE_REPLICATES: usize = 2000;
pub const MIN_EFRON_STEIN_REPLICATES: usize = 300;
pub const MIN_EFRON_STEIN_RESAMPLES: usize = 10;

impl ExperimentPlan {
    /// Minimal plan; every other field takes its default.
    pub fn new(kind: ExperimentKind, p: f64, replicates: usize, seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({
            "kind": kind, "p": p, "replicates": replicates, "seed": seed,
        }))
        .expect("minimal plan deserializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(s).map_err(|e| Error::Domain(format!("plan: {e}")))?;
        Ok(plan.resolved())
    }

    /// Copy with every default materialized.
    pub fn resolved(&self) -> Self {
        let mut p = self.clone();
        if p.direction.is_empty() {
            p.direction = vec![0; p.dim];
            if let Some(first) = p.direction.first_mut() {
                *first = 1;
            }
        }
        if p.scheme.k.is_none() {
            p.scheme.k = Some(p.scheme.k_value());
        }
        if p.side.is_none() {
            match p.kind {
                ExperimentKind::Shape => p.side = Some(DEFAULT_SHAPE_SIDE),
                ExperimentKind::ClusterTails => p.side = Some(DEFAULT_TAIL_SIDE),
                _ => {}
            }
        }
        if p.window.is_none() && p.kind == ExperimentKind::Tail {
            if let Some(&n) = p.ns.first() {
                let nf = n as f64 * crate::lattice::LatticeBox::l1(&p.direction, &vec![0; p.dim]) as f64;
                p.window = Some([1.0 + nf.ln(), nf.sqrt()]);
            }
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        if self.dim < 2 || self.dim > crate::lattice::MAX_DIM {
            return bad(format!("dimension {} unsupported", self.dim));
        }
        if !self.direction.is_empty() && self.direction.len() != self.dim {
            return bad("direction length differs from dim".into());
        }
        if !self.direction.is_empty() && self.direction.iter().all(|&c| c == 0) {
            return bad("zero direction".into());
        }
        for (name, s) in [("ns", &self.ns), ("ts", &self.ts)] {
            if s.windows(2).any(|w| w[0] >= w[1]) || s.first() == Some(&0) {
                return bad(format!("{name} must be positive and strictly increasing"));
            }
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Insufficient(format!("{} replicates per cell, need {MIN_REPLICATES}", self.replicates)));
        }
        let need = |ok: bool, m: &str| if ok { Ok(()) } else { Err(Error::Domain(m.into())) };
        let insufficient = |ok: bool, m: String| if ok { Ok(()) } else { Err(Error::Insufficient(m)) };
        match self.kind {
            ExperimentKind::Variance | ExperimentKind::Gap => {
                insufficient(self.ns.len() >= 4, format!("{} n-cells, need 4", self.ns.len()))
            }
            ExperimentKind::Tail => {
                need(self.ns.len() == 1, "tail profile takes a single n")?;
                insufficient(
                    self.replicates >= MIN_TAIL_PROFILE_REPLICATES,
                    format!("{} replicates, need {MIN_TAIL_PROFILE_REPLICATES}", self.replicates),
                )
            }
            ExperimentKind::Shape => need(!self.ts.is_empty(), "shape corridor needs radii ts"),
            ExperimentKind::Renorm => {
                need(self.ns.len() == 1, "agreement takes a single n")?;
                need(!self.ts.is_empty(), "agreement needs scales ts")?;
                self.scheme.at(self.ts[0] as u32).map(|_| ())
            }
            ExperimentKind::EfronStein => {
                need(self.ns.len() == 1, "Efron–Stein takes a single n")?;
                self.scheme.at(self.scheme.t).map(|_| ())?;
                insufficient(
                    self.replicates >= MIN_EFRON_STEIN_REPLICATES && self.resamples >= MIN_EFRON_STEIN_RESAMPLES,
                    format!(
                        "{} replicates x {} resamples, need {MIN_EFRON_STEIN_REPLICATES} x {MIN_EFRON_STEIN_RESAMPLES}",
                        self.replicates, self.resamples
                    ),
                )
            }
            ExperimentKind::Skeleton => need(!self.ns.is_empty(), "skeleton count needs an n schedule"),
            ExperimentKind::ClusterTails => insufficient(
                self.replicates >= crate::clusters::MIN_TAIL_REPLICATES,
                format!("{} replicates, need {}", self.replicates, crate::clusters::MIN_TAIL_REPLICATES),
            ),
            ExperimentKind::DistanceTail | ExperimentKind::Rho => need(self.ns.len() == 1, "takes a single n"),
        }
    }

    /// The direction, with `e₁` filled in.
    pub fn y(&self) -> Vec<i64> {
        self.resolved().direction
    }
}
