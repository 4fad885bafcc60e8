//! Table of estimated `h(y) = E[D*(0, y)]`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, Point};
use crate::scalar::Scalar;
use crate::stats::moments;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HEntry<T: Scalar> {
    pub mean: T,
    pub stderr: T,
    pub count: usize,
}

/// Source of `h` values for `Q_x` membership; `None` when `h(y)` is unknown.
pub trait HFunction<T: Scalar> {
    fn h(&self, y: &[i64]) -> Option<T>;
}

impl<T: Scalar, F: Fn(&[i64]) -> Option<T>> HFunction<T> for F {
    fn h(&self, y: &[i64]) -> Option<T> {
        self(y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HTable<T: Scalar> {
    entries: BTreeMap<Point, HEntry<T>>,
    /// Replicates dropped because the giant proxy was unusable.
    pub excluded: usize,
    pub attempted: usize,
}

impl<T: Scalar> Default for HTable<T> {
    fn default() -> Self {
        HTable { entries: BTreeMap::new(), excluded: 0, attempted: 0 }
    }
}

impl<T: Scalar> HFunction<T> for HTable<T> {
    fn h(&self, y: &[i64]) -> Option<T> {
        if y.iter().all(|&c| c == 0) {
            return Some(T::zero());
        }
        self.entries.get(y).map(|e| e.mean)
    }
}

impl<T: Scalar> HTable<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, y: Point, entry: HEntry<T>) {
        self.entries.insert(y, entry);
    }

    /// Insert the sample mean and its standard error.
    pub fn insert_samples(&mut self, y: Point, samples: &[f64]) {
        let xs: Vec<T> = samples.iter().map(|&s| T::lit(s)).collect();
        let m = moments(&xs);
        self.insert(y, HEntry { mean: m.mean, stderr: m.stderr, count: m.n });
    }

    pub fn get(&self, y: &[i64]) -> Option<&HEntry<T>> {
        self.entries.get(y)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, &HEntry<T>)> {
        self.entries.iter()
    }

    pub fn exclusion_fraction(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.excluded as f64 / self.attempted as f64
        }
    }

    /// Entries whose mean is below `‖y‖₁` (impossible for a chemical distance).
    pub fn below_l1(&self) -> Vec<Point> {
        self.entries
            .iter()
            .filter(|(y, e)| e.mean < T::lit(LatticeBox::l1(y, &vec![0; y.len()]) as f64))
            .map(|(y, _)| y.clone())
            .collect()
    }

    /// Stored pairs `(x, y)` with `x + y` also stored and
    /// `h(x+y) > h(x) + h(y) + sigmas · (combined stderr)`.
    pub fn subadditivity_violations(&self, sigmas: T) -> Vec<(Point, Point)> {
        let mut out = Vec::new();
        for (x, ex) in &self.entries {
            for (y, ey) in self.entries.range(x.clone()..) {
                let s: Point = x.iter().zip(y).map(|(a, b)| a + b).collect();
                let Some(es) = self.entries.get(&s) else { continue };
                let se = (ex.stderr.powi(2) + ey.stderr.powi(2) + es.stderr.powi(2)).sqrt();
                if es.mean > ex.mean + ey.mean + sigmas * se + T::tolerance() * es.mean.max(T::one()) {
                    out.push((x.clone(), y.clone()));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "percolab.htable/1",
            "excluded": self.excluded,
            "attempted": self.attempted,
            "rows": self.entries.iter().map(|(y, e)| serde_json::json!({
                "y": y,
                "mean": e.mean.to_string(),
                "stderr": e.stderr.to_string(),
                "count": e.count,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::Domain(format!("h-table JSON: {m}"));
        if v["schema"] != "percolab.htable/1" {
            return Err(bad("unknown schema"));
        }
        let num = |x: &serde_json::Value| -> Result<T> {
            x.as_str().and_then(|s| s.parse::<f64>().ok()).map(T::lit).ok_or_else(|| bad("expected a decimal string"))
        };
        let mut t = HTable::new();
        t.excluded = v["excluded"].as_u64().unwrap_or(0) as usize;
        t.attempted = v["attempted"].as_u64().unwrap_or(0) as usize;
        for r in v["rows"].as_array().ok_or_else(|| bad("rows"))? {
            let y: Point = serde_json::from_value(r["y"].clone()).map_err(|_| bad("y"))?;
            let count = r["count"].as_u64().ok_or_else(|| bad("count"))? as usize;
            t.insert(y, HEntry { mean: num(&r["mean"])?, stderr: num(&r["stderr"])?, count });
        }
        Ok(t)
    }
}
