//! Open-cluster labeling, the crossing-cluster proxy for the infinite cluster,
//! nearest-point projection onto it and the finite-cluster / hole tail statistics.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::rng::derive_seed;
use crate::lattice::{EdgeConfiguration, LatticeBox, Point};
use crate::stats::{fit_counts, RateFit};

/// Union-find with union by size and path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        assert!(n <= u32::MAX as usize, "too many elements for u32 labels");
        UnionFind { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    #[inline]
    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    #[inline]
    pub fn union(&mut self, a: u32, b: u32) -> u32 {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        ra
    }

    pub fn size_of_root(&self, r: u32) -> u32 {
        self.size[r as usize]
    }
}

#[derive(Clone, Debug)]
pub struct ClusterLabeling {
    root: Vec<u32>,
    size: Vec<u32>,
    giant: Option<u32>,
    valid: bool,
}

impl ClusterLabeling {
    #[inline]
    pub fn root(&self, v: usize) -> u32 {
        self.root[v]
    }

    /// Vertex count of the cluster containing `v`.
    pub fn cluster_size(&self, v: usize) -> usize {
        self.size[self.root[v] as usize] as usize
    }

    pub fn giant(&self) -> Option<u32> {
        self.giant
    }

    /// The giant proxy crosses the box along axis 0.
    pub fn is_valid(&self) -> bool {
        self.valid
    }

    #[inline]
    pub fn in_giant(&self, v: usize) -> bool {
        Some(self.root[v]) == self.giant
    }

    #[inline]
    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.root[a] == self.root[b]
    }

    pub fn giant_size(&self) -> usize {
        self.giant.map_or(0, |g| self.size[g as usize] as usize)
    }

    /// Distinct roots with their sizes, ascending by root.
    pub fn clusters(&self) -> Vec<(u32, usize)> {
        (0..self.root.len()).filter(|&v| self.root[v] == v as u32).map(|v| (v as u32, self.size[v] as usize)).collect()
    }
}

/// Label open clusters. The giant proxy is the largest cluster meeting both
/// faces of axis 0; without a crossing cluster it is the largest cluster and
/// the labeling is flagged invalid.
pub fn label_clusters(config: &EdgeConfiguration) -> ClusterLabeling {
    let g = config.geometry();
    let n = g.vertex_count();
    let mut uf = UnionFind::new(n);
    let strides = g.strides();
    for v in 0..n {
        let mut flags = config.forward_flags(v);
        while flags != 0 {
            let a = flags.trailing_zeros() as usize;
            flags &= flags - 1;
            uf.union(v as u32, (v + strides[a]) as u32);
        }
    }
    let root: Vec<u32> = (0..n as u32).map(|v| uf.find(v)).collect();
    let size = uf.size;

    let face = strides[0];
    let last = n - face;
    let mut on_min_face = vec![false; n];
    for &r in &root[..face] {
        on_min_face[r as usize] = true;
    }
    let better = |a: u32, b: Option<u32>| match b {
        None => true,
        Some(b) => size[a as usize] > size[b as usize] || (size[a as usize] == size[b as usize] && a < b),
    };
    let mut crossing: Option<u32> = None;
    for &r in &root[last..] {
        if on_min_face[r as usize] && better(r, crossing) {
            crossing = Some(r);
        }
    }
    let (giant, valid) = match crossing {
        Some(c) => (Some(c), true),
        None => {
            let mut largest = None;
            for v in 0..n as u32 {
                if root[v as usize] == v && better(v, largest) {
                    largest = Some(v);
                }
            }
            (largest, false)
        }
    };
    ClusterLabeling { root, size, giant, valid }
}

/// Linear index of `x*`: the giant vertex nearest to `x` in ℓ1, ties to the
/// lexicographically smallest.
pub fn nearest_giant_index(labeling: &ClusterLabeling, g: &LatticeBox, x: usize) -> Result<usize> {
    let giant = labeling.giant.ok_or_else(|| Error::Unavailable("no giant cluster".into()))?;
    if !labeling.valid {
        return Err(Error::Unavailable("giant proxy does not cross the box".into()));
    }
    if labeling.root[x] == giant {
        return Ok(x);
    }
    let center = g.point_of(x);
    let max_r: u64 = g
        .sides()
        .iter()
        .zip(&center)
        .zip(g.origin())
        .map(|((&s, &c), &o)| (c - o).max(o + s as i64 - 1 - c) as u64)
        .sum();
    let mut offset = vec![0i64; g.dim()];
    for r in 1..=max_r {
        let mut best: Option<usize> = None;
        sphere_points(&center, r as i64, 0, &mut offset, &mut |p| {
            if let Ok(v) = g.index_of(p) {
                if labeling.root[v] == giant && best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
        });
        if let Some(b) = best {
            return Ok(b);
        }
    }
    Err(Error::Unavailable("giant cluster unreachable".into()))
}

/// Points at ℓ1 distance exactly `r` from `center`.
fn sphere_points(center: &[i64], r: i64, axis: usize, offset: &mut Vec<i64>, f: &mut impl FnMut(&[i64])) {
    let d = center.len();
    if axis == d - 1 {
        let mut emit = |o: i64| {
            offset[axis] = o;
            let p: Vec<i64> = center.iter().zip(offset.iter()).map(|(c, o)| c + o).collect();
            f(&p);
        };
        emit(-r);
        if r != 0 {
            emit(r);
        }
        return;
    }
    for o in -r..=r {
        offset[axis] = o;
        sphere_points(center, r - o.abs(), axis + 1, offset, f);
    }
}

/// `x*` in global coordinates.
pub fn nearest_giant_point(labeling: &ClusterLabeling, g: &LatticeBox, x: &[i64]) -> Result<Point> {
    let v = g.index_of(x)?;
    Ok(g.point_of(nearest_giant_index(labeling, g, v)?))
}

/// Smallest `r` with `C(x) ⊆ x + [-r, r]^d`, when `x` is outside the giant proxy.
pub fn finite_cluster_radius(config: &EdgeConfiguration, labeling: &ClusterLabeling, x: &[i64]) -> Result<Option<u64>> {
    let g = config.geometry();
    let s = g.index_of(x)?;
    if labeling.in_giant(s) {
        return Ok(None);
    }
    let mut seen = vec![false; g.vertex_count()];
    let mut stack = vec![s];
    seen[s] = true;
    let mut radius = 0u64;
    while let Some(v) = stack.pop() {
        let p = g.point_of(v);
        let linf = p.iter().zip(x).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0);
        radius = radius.max(linf);
        config.for_each_open_neighbor(v, |u, _| {
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        });
    }
    Ok(Some(radius))
}

/// Smallest `r` such that the giant proxy meets `x + [-r, r]^d`.
pub fn hole_radius(labeling: &ClusterLabeling, g: &LatticeBox, x: &[i64]) -> Result<u64> {
    let v = g.index_of(x)?;
    let giant = labeling.giant.ok_or_else(|| Error::Unavailable("no giant cluster".into()))?;
    if labeling.root[v] == giant {
        return Ok(0);
    }
    (0..g.vertex_count())
        .filter(|&u| labeling.root[u] == giant)
        .map(|u| g.point_of(u).iter().zip(x).map(|(a, b)| a.abs_diff(*b)).max().unwrap_or(0))
        .min()
        .ok_or_else(|| Error::Unavailable("empty giant".into()))
}

/// Exceedance histogram `#{R > r}` with an exponential rate fit.
#[derive(Clone, Debug, Serialize)]
pub struct TailHistogram {
    pub thresholds: Vec<u64>,
    pub exceed: Vec<usize>,
    pub n_samples: usize,
    /// Replicates where the quantity was defined (e.g. the origin sat in a finite cluster).
    pub n_events: usize,
    pub fit: Option<RateFit<f64>>,
    /// Why no fit is available, if so.
    pub note: Option<String>,
}

/// Bins need this many exceedances to enter the rate fit.
pub const TAIL_MIN_COUNT: usize = 10;
/// A tail fit needs at least this many bins.
pub const TAIL_MIN_BINS: usize = 3;

impl TailHistogram {
    /// Build from per-replicate observations (`None`: event did not occur).
    pub fn from_observations(obs: &[Option<u64>]) -> Self {
        let n_samples = obs.len();
        let values: Vec<u64> = obs.iter().flatten().copied().collect();
        let max = values.iter().copied().max();
        let thresholds: Vec<u64> = match max {
            Some(m) => (0..=m).collect(),
            None => Vec::new(),
        };
        let exceed: Vec<usize> = thresholds.iter().map(|&r| values.iter().filter(|&&v| v > r).count()).collect();
        let points: Vec<(f64, usize)> = thresholds
            .iter()
            .zip(&exceed)
            .filter(|(_, &c)| c >= TAIL_MIN_COUNT)
            .map(|(&r, &c)| (r as f64, c))
            .collect();
        let (fit, note) = if values.is_empty() {
            (None, Some("no events".to_string()))
        } else {
            match fit_counts(points, n_samples, TAIL_MIN_BINS) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            }
        };
        TailHistogram { thresholds, exceed, n_samples, n_events: values.len(), fit, note }
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "r,exceed_count,n_samples")?;
        for (r, c) in self.thresholds.iter().zip(&self.exceed) {
            writeln!(w, "{r},{c},{}", self.n_samples)?;
        }
        Ok(())
    }

    /// JSON sidecar: fitted rate, its standard error and R².
    pub fn sidecar(&self) -> serde_json::Value {
        match &self.fit {
            Some(f) => serde_json::json!({
                "rate": f.rate, "stderr": f.stderr, "r_squared": f.r_squared,
                "n_samples": self.n_samples, "n_events": self.n_events,
            }),
            None => serde_json::json!({
                "rate": null, "stderr": null, "r_squared": null,
                "n_samples": self.n_samples, "n_events": self.n_events,
                "note": self.note,
            }),
        }
    }
}

pub const MIN_TAIL_REPLICATES: usize = 100;

/// Per-replicate `(finite cluster radius, hole radius)` at the box center 0.
pub fn origin_radii(geometry: &LatticeBox, p: f64, seed: u64, replicates: usize) -> Result<Vec<(Option<u64>, u64)>> {
    if replicates < MIN_TAIL_REPLICATES {
        return Err(Error::Insufficient(format!("{replicates} replicates, need {MIN_TAIL_REPLICATES}")));
    }
    let origin = vec![0i64; geometry.dim()];
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = EdgeConfiguration::sample(geometry.clone(), p, derive_seed(seed, 0xC1, i))?;
            let lab = label_clusters(&cfg);
            Ok((finite_cluster_radius(&cfg, &lab, &origin)?, hole_radius(&lab, geometry, &origin)?))
        })
        .collect()
}

pub fn finite_radius_tail(geometry: &LatticeBox, p: f64, seed: u64, replicates: usize) -> Result<TailHistogram> {
    let radii = origin_radii(geometry, p, seed, replicates)?;
    Ok(TailHistogram::from_observations(&radii.iter().map(|r| r.0).collect::<Vec<_>>()))
}

pub fn hole_tail(geometry: &LatticeBox, p: f64, seed: u64, replicates: usize) -> Result<TailHistogram> {
    let radii = origin_radii(geometry, p, seed, replicates)?;
    Ok(TailHistogram::from_observations(&radii.iter().map(|r| Some(r.1)).collect::<Vec<_>>()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dfs_components(cfg: &EdgeConfiguration) -> Vec<usize> {
        let g = cfg.geometry();
        let mut comp = vec![usize::MAX; g.vertex_count()];
        for s in 0..g.vertex_count() {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = s;
            while let Some(v) = stack.pop() {
                for e in g.edges() {
                    if !cfg.is_open_ref(e) {
                        continue;
                    }
                    let w = e.lower + g.strides()[e.axis as usize];
                    let other = if e.lower == v {
                        w
                    } else if w == v {
                        e.lower
                    } else {
                        continue;
                    };
                    if comp[other] == usize::MAX {
                        comp[other] = s;
                        stack.push(other);
                    }
                }
            }
        }
        comp
    }

    #[test]
    fn labeling_matches_dfs_on_small_boxes() {
        let g = LatticeBox::new(vec![4, 4], vec![0, 0]).unwrap();
        for seed in 0..200u64 {
            let p = [0.3, 0.5, 0.7][seed as usize % 3];
            let cfg = EdgeConfiguration::sample(g.clone(), p, seed).unwrap();
            let lab = label_clusters(&cfg);
            let comp = dfs_components(&cfg);
            for a in 0..16 {
                for b in 0..16 {
                    assert_eq!(lab.connected(a, b), comp[a] == comp[b]);
                }
            }
            let total: usize = lab.clusters().iter().map(|c| c.1).sum();
            assert_eq!(total, 16);
            let crosses = |c: usize| (0..4).any(|j| comp[j] == c) && (12..16).any(|j| comp[j] == c);
            let eligible: Vec<usize> = (0..16).filter(|&v| !lab.is_valid() || crosses(comp[v])).collect();
            let max = eligible.iter().map(|&v| lab.cluster_size(v)).max().unwrap();
            assert_eq!(lab.giant_size(), max);
            assert_eq!(lab.is_valid(), (0..16).any(|v| crosses(comp[v])));
        }
    }

    #[test]
    fn full_and_empty_configurations() {
        let g = LatticeBox::new(vec![5, 5], vec![-2, -2]).unwrap();
        let full = label_clusters(&EdgeConfiguration::sample(g.clone(), 1.0, 0).unwrap());
        assert!(full.is_valid());
        assert_eq!(full.giant_size(), 25);
        let empty = label_clusters(&EdgeConfiguration::sample(g, 0.0, 0).unwrap());
        assert!(!empty.is_valid());
        assert_eq!(empty.clusters().len(), 25);
        assert!(empty.clusters().iter().all(|c| c.1 == 1));
    }

    #[test]
    fn left_column_cluster() {
        let g = LatticeBox::new(vec![3, 3], vec![0, 0]).unwrap();
        let cfg = EdgeConfiguration::from_open_pairs(g.clone(), &[(vec![0, 0], vec![0, 1]), (vec![0, 1], vec![0, 2])])
            .unwrap();
        let lab = label_clusters(&cfg);
        let v = g.index_of(&[0, 1]).unwrap();
        assert_eq!(lab.cluster_size(v), 3);
        assert_eq!(lab.clusters().len(), 7);
        assert_eq!(dfs_components(&cfg).iter().filter(|&&c| c == dfs_components(&cfg)[v]).count(), 3);
    }

    /// Giant = the full row y = 1 (crosses axis 0) plus the column x = 1.
    fn cross_config() -> (LatticeBox, EdgeConfiguration) {
        let g = LatticeBox::new(vec![5, 5], vec![-2, -2]).unwrap();
        let mut pairs = Vec::new();
        for x in -2..2 {
            pairs.push((vec![x, 1], vec![x + 1, 1]));
        }
        for y in -2..2 {
            pairs.push((vec![1, y], vec![1, y + 1]));
        }
        (g.clone(), EdgeConfiguration::from_open_pairs(g, &pairs).unwrap())
    }

    #[test]
    fn projection_tie_is_lexicographic() {
        // giant vertices (0,1) and (1,0) are both at l1 distance 1 from the origin
        let (g, cfg) = cross_config();
        let lab = label_clusters(&cfg);
        assert!(lab.is_valid());
        assert_eq!(nearest_giant_point(&lab, &g, &[0, 0]).unwrap(), vec![0, 1]);
        assert_eq!(nearest_giant_point(&lab, &g, &[1, 1]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn projection_is_nearest_and_idempotent() {
        let g = LatticeBox::new(vec![9, 9], vec![-4, -4]).unwrap();
        for seed in 0..40 {
            let cfg = EdgeConfiguration::sample(g.clone(), 0.65, seed).unwrap();
            let lab = label_clusters(&cfg);
            if !lab.is_valid() {
                continue;
            }
            for v in 0..g.vertex_count() {
                let x = g.point_of(v);
                let s = nearest_giant_index(&lab, &g, v).unwrap();
                assert!(lab.in_giant(s));
                let xs = g.point_of(s);
                let dist = LatticeBox::l1(&x, &xs);
                for z in (0..g.vertex_count()).filter(|&z| lab.in_giant(z)) {
                    let dz = LatticeBox::l1(&x, &g.point_of(z));
                    assert!(dist < dz || (dist == dz && s <= z));
                }
                assert_eq!(nearest_giant_index(&lab, &g, s).unwrap(), s);
            }
        }
    }

    #[test]
    fn projection_requires_valid_giant() {
        let g = LatticeBox::new(vec![4, 4], vec![0, 0]).unwrap();
        let lab = label_clusters(&EdgeConfiguration::sample(g.clone(), 0.0, 0).unwrap());
        assert!(matches!(nearest_giant_point(&lab, &g, &[1, 1]), Err(Error::Unavailable(_))));
    }

    #[test]
    fn tails_at_extreme_p() {
        let g = LatticeBox::centered(2, 16).unwrap();
        let full = finite_radius_tail(&g, 1.0, 3, 100).unwrap();
        assert_eq!(full.n_events, 0);
        assert!(full.fit.is_none() && full.thresholds.is_empty());
        let holes = hole_tail(&g, 1.0, 3, 100).unwrap();
        assert!(holes.exceed.iter().all(|&c| c == 0));
        let empty = finite_radius_tail(&g, 0.0, 3, 100).unwrap();
        assert_eq!(empty.n_events, 100);
        assert_eq!(empty.exceed, vec![0]);
        assert!(matches!(finite_radius_tail(&g, 0.5, 3, 10), Err(Error::Insufficient(_))));
    }

    #[test]
    fn histogram_counts_non_increasing_and_csv() {
        let obs: Vec<Option<u64>> = (0..500u64).map(|i| if i % 3 == 0 { None } else { Some(i % 7) }).collect();
        let h = TailHistogram::from_observations(&obs);
        assert!(h.exceed.windows(2).all(|w| w[0] >= w[1]));
        let mut out = Vec::new();
        h.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("r,exceed_count,n_samples\n"));
        assert_eq!(text.lines().count(), h.thresholds.len() + 1);
        assert!(h.sidecar().get("rate").is_some());
    }
}
