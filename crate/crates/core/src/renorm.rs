//! Renormalized distance: open edges cost 1 and any two points of a common
//! mesoscopic cell are joined by a red edge of length `K·t`.
//!
//! Red cliques are never materialized. Each cell gets a hub node joined to
//! every point of the cell by a spoke of length `K·t/2`, so a red edge is a
//! spoke pair and Dijkstra stays near-linear in the box size.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::Serialize;

use crate::chemdist::Bfs;
use crate::clusters::ClusterLabeling;
use crate::error::{Error, Result};
use crate::lattice::rng::{keyed_uniform, mix64};
use crate::lattice::{EdgeConfiguration, EdgeRef, LatticeBox, MesoIndex, Point, RenormScheme};
use crate::scalar::Scalar;
use crate::stats::moments;

/// Length under the renormalized distance; always finite.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct WeightedLength<T: Scalar>(pub T);

impl<T: Scalar> WeightedLength<T> {
    pub fn value(self) -> T {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RenormStep {
    Open { edge: usize },
    Red { cell: MesoIndex },
}

/// Path for the renormalized distance: vertices and the kind of each step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenormPath<T: Scalar> {
    pub points: Vec<Point>,
    pub steps: Vec<RenormStep>,
    pub weight: T,
}

impl<T: Scalar> RenormPath<T> {
    pub fn red_steps(&self) -> usize {
        self.steps.iter().filter(|s| matches!(s, RenormStep::Red { .. })).count()
    }

    pub fn open_steps(&self) -> usize {
        self.steps.len() - self.red_steps()
    }

    /// `n_open + n_red · K · t`.
    pub fn recomputed_weight(&self, scheme: &RenormScheme<T>) -> T {
        T::from_count(self.open_steps()) + T::from_count(self.red_steps()) * scheme.red_length()
    }

    /// Open steps use open edges; red steps join two points of their cell.
    pub fn check(&self, config: &EdgeConfiguration, scheme: &RenormScheme<T>) -> Result<()> {
        let g = config.geometry();
        if self.points.len() != self.steps.len() + 1 {
            return Err(Error::Structural("step and point counts disagree".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            let (a, b) = (&self.points[i], &self.points[i + 1]);
            match step {
                RenormStep::Open { edge } => {
                    let (u, w, _) = g.edge_endpoints(*edge)?;
                    if !((&u == a && &w == b) || (&u == b && &w == a)) || !config.is_open(*edge)? {
                        return Err(Error::Structural(format!("open step {i} invalid")));
                    }
                }
                RenormStep::Red { cell } => {
                    for p in [a, b] {
                        let v = g.index_of(p)?;
                        if !scheme.cells_of_vertex(g, v).contains(cell) {
                            return Err(Error::Structural(format!("red step {i}: {p:?} not in cell {cell:?}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

const NO_HUB: u32 = u32::MAX;

/// Edge-to-cell assignment and cell point sets for one box and scale.
#[derive(Clone, Debug)]
pub struct CellIndex {
    t: u32,
    dim: usize,
    lo: Vec<i64>,
    dims: Vec<usize>,
    /// Hub of the edge `(v, v + e_a)` at position `v * d + a`.
    edge_hub: Vec<u32>,
    hub_offsets: Vec<u32>,
    hub_members: Vec<u32>,
}

impl CellIndex {
    pub fn new<T: Scalar>(g: &LatticeBox, scheme: &RenormScheme<T>) -> Self {
        let d = g.dim();
        let lo_pt = g.origin().to_vec();
        let hi_pt: Vec<i64> = (0..d).map(|a| g.origin()[a] + g.sides()[a] as i64 - 1).collect();
        let lo = scheme.cell_of_edge_at(&lo_pt, usize::MAX);
        let hi = scheme.cell_of_edge_at(&hi_pt, usize::MAX);
        let dims: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let hub_count: usize = dims.iter().product();
        assert!(hub_count < NO_HUB as usize && g.vertex_count() + hub_count < u32::MAX as usize);

        let mut edge_hub = vec![NO_HUB; g.vertex_count() * d];
        let mut counts = vec![0u32; hub_count + 1];
        let mut cell = vec![0i64; d];
        let mut p = g.point_of(0);
        for v in 0..g.vertex_count() {
            for a in 0..d {
                if !g.has_edge(v, a) {
                    continue;
                }
                for (b, c) in cell.iter_mut().enumerate() {
                    *c = scheme.cell_coord(2 * p[b] + i64::from(a == b));
                }
                let h = Self::linear(&lo, &dims, &cell);
                edge_hub[v * d + a] = h;
                counts[h as usize] += 2;
            }
            // advance the lexicographic coordinate odometer
            let mut i = d;
            while i > 0 {
                i -= 1;
                p[i] += 1;
                if p[i] <= hi_pt[i] {
                    break;
                }
                p[i] = lo_pt[i];
            }
        }
        let mut hub_offsets = vec![0u32; hub_count + 1];
        for h in 0..hub_count {
            hub_offsets[h + 1] = hub_offsets[h] + counts[h];
        }
        let mut fill = hub_offsets.clone();
        let mut hub_members = vec![0u32; hub_offsets[hub_count] as usize];
        for v in 0..g.vertex_count() {
            for a in 0..d {
                let h = edge_hub[v * d + a];
                if h == NO_HUB {
                    continue;
                }
                let w = v + g.strides()[a];
                for x in [v, w] {
                    hub_members[fill[h as usize] as usize] = x as u32;
                    fill[h as usize] += 1;
                }
            }
        }
        // sort and deduplicate each member list in place, then compact
        let mut compact_offsets = vec![0u32; hub_count + 1];
        let mut write = 0usize;
        for h in 0..hub_count {
            let (s, e) = (hub_offsets[h] as usize, hub_offsets[h + 1] as usize);
            let seg = &mut hub_members[s..e];
            seg.sort_unstable();
            let mut last = None;
            for i in s..e {
                let x = hub_members[i];
                if last != Some(x) {
                    hub_members[write] = x;
                    write += 1;
                    last = Some(x);
                }
            }
            compact_offsets[h + 1] = write as u32;
        }
        hub_members.truncate(write);
        CellIndex { t: scheme.t(), dim: d, lo, dims, edge_hub, hub_offsets: compact_offsets, hub_members }
    }

    fn linear(lo: &[i64], dims: &[usize], cell: &[i64]) -> u32 {
        let mut h = 0usize;
        for ((c, l), n) in cell.iter().zip(lo).zip(dims) {
            h = h * n + (c - l) as usize;
        }
        h as u32
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn hub_count(&self) -> usize {
        self.hub_offsets.len() - 1
    }

    pub fn hub_of(&self, cell: &[i64]) -> Option<u32> {
        if cell.len() != self.dim {
            return None;
        }
        let inside = cell.iter().zip(&self.lo).zip(&self.dims).all(|((c, l), n)| *c >= *l && *c < *l + *n as i64);
        inside.then(|| Self::linear(&self.lo, &self.dims, cell))
    }

    pub fn cell_of_hub(&self, h: u32) -> MesoIndex {
        let mut rest = h as usize;
        let mut out = vec![0i64; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = self.lo[a] + (rest % self.dims[a]) as i64;
            rest /= self.dims[a];
        }
        out
    }

    #[inline]
    pub fn hub_of_edge(&self, e: EdgeRef) -> u32 {
        self.edge_hub[e.lower * self.dim + e.axis as usize]
    }

    /// Points of the cell, ascending vertex index.
    pub fn members(&self, h: u32) -> &[u32] {
        &self.hub_members[self.hub_offsets[h as usize] as usize..self.hub_offsets[h as usize + 1] as usize]
    }

    /// Hubs of the cells containing `v`, ascending and deduplicated.
    pub fn hubs_of_vertex(&self, g: &LatticeBox, v: usize, out: &mut Vec<u32>) {
        out.clear();
        for a in 0..self.dim {
            let h = self.edge_hub[v * self.dim + a];
            if h != NO_HUB {
                out.push(h);
            }
            if let Some(u) = g.neighbor(v, a, false) {
                out.push(self.edge_hub[u * self.dim + a]);
            }
        }
        out.sort_unstable();
        out.dedup();
    }

    /// Edges of a cell as `(lower, axis)`.
    pub fn edges_of_hub(&self, g: &LatticeBox, h: u32) -> Vec<EdgeRef> {
        let mut out = Vec::new();
        for &v in self.members(h) {
            for a in 0..self.dim {
                if self.edge_hub[v as usize * self.dim + a] == h {
                    out.push(EdgeRef { lower: v as usize, axis: a as u8 });
                }
            }
        }
        debug_assert!(out.iter().all(|e| g.has_edge(e.lower, e.axis as usize)));
        out
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry<T> {
    dist: T,
    node: u32,
}

impl<T: PartialOrd> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: PartialOrd> Eq for Entry<T> {}

impl<T: PartialOrd> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: PartialOrd> Ord for Entry<T> {
    // reversed: BinaryHeap pops the smallest distance, then the smallest node
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.partial_cmp(&self.dist).unwrap_or(Ordering::Equal).then_with(|| other.node.cmp(&self.node))
    }
}

/// Dijkstra over vertices plus cell hubs; reusable across configurations of one box.
#[derive(Clone, Debug)]
pub struct RenormEngine<T: Scalar> {
    geometry: LatticeBox,
    scheme: RenormScheme<T>,
    cells: CellIndex,
    dist: Vec<T>,
    done: Vec<bool>,
    touched: Vec<u32>,
    heap: BinaryHeap<Entry<T>>,
    hubs: Vec<u32>,
}

impl<T: Scalar> RenormEngine<T> {
    pub fn new(geometry: &LatticeBox, scheme: RenormScheme<T>) -> Self {
        let cells = CellIndex::new(geometry, &scheme);
        let n = geometry.vertex_count() + cells.hub_count();
        RenormEngine {
            geometry: geometry.clone(),
            scheme,
            cells,
            dist: vec![T::infinity(); n],
            done: vec![false; n],
            touched: Vec::new(),
            heap: BinaryHeap::new(),
            hubs: Vec::new(),
        }
    }

    pub fn scheme(&self) -> &RenormScheme<T> {
        &self.scheme
    }

    pub fn cells(&self) -> &CellIndex {
        &self.cells
    }

    fn spoke(&self) -> T {
        self.scheme.red_length() / T::lit(2.0)
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v as usize] = T::infinity();
            self.done[v as usize] = false;
        }
        self.touched.clear();
        self.heap.clear();
    }

    #[inline]
    fn relax(&mut self, node: usize, d: T) {
        if d < self.dist[node] {
            if self.dist[node] == T::infinity() {
                self.touched.push(node as u32);
            }
            self.dist[node] = d;
            self.heap.push(Entry { dist: d, node: node as u32 });
        }
    }

    fn run(&mut self, config: &EdgeConfiguration, source: usize, target: Option<usize>) {
        assert_eq!(config.geometry(), &self.geometry, "configuration box differs from engine box");
        self.reset();
        let nv = self.geometry.vertex_count();
        let spoke = self.spoke();
        self.relax(source, T::zero());
        let mut hubs = std::mem::take(&mut self.hubs);
        while let Some(Entry { dist, node }) = self.heap.pop() {
            let node = node as usize;
            if self.done[node] {
                continue;
            }
            self.done[node] = true;
            if Some(node) == target {
                break;
            }
            if node < nv {
                let mut open = [0usize; 2 * crate::lattice::MAX_DIM];
                let mut k = 0;
                config.for_each_open_neighbor(node, |u, _| {
                    open[k] = u;
                    k += 1;
                });
                for &u in &open[..k] {
                    self.relax(u, dist + T::one());
                }
                self.cells.hubs_of_vertex(&self.geometry, node, &mut hubs);
                for &h in &hubs {
                    self.relax(nv + h as usize, dist + spoke);
                }
            } else {
                let h = (node - nv) as u32;
                let (s, e) =
                    (self.cells.hub_offsets[h as usize] as usize, self.cells.hub_offsets[h as usize + 1] as usize);
                for i in s..e {
                    let u = self.cells.hub_members[i] as usize;
                    self.relax(u, dist + spoke);
                }
            }
        }
        self.hubs = hubs;
    }

    pub fn distance(&mut self, config: &EdgeConfiguration, a: &[i64], b: &[i64]) -> Result<WeightedLength<T>> {
        let (s, t) = (self.geometry.index_of(a)?, self.geometry.index_of(b)?);
        Ok(self.distance_between(config, s, t))
    }

    pub fn distance_between(&mut self, config: &EdgeConfiguration, s: usize, t: usize) -> WeightedLength<T> {
        self.run(config, s, Some(t));
        WeightedLength(self.dist[t])
    }

    fn close(&self, a: T, b: T) -> bool {
        (a - b).abs() <= T::tolerance() * T::one().max(a.abs())
    }

    /// Shortest path; predecessors prefer open edges by smallest canonical
    /// index, then red edges by smallest hub and member.
    pub fn geodesic(&mut self, config: &EdgeConfiguration, a: &[i64], b: &[i64]) -> Result<RenormPath<T>> {
        let (s, t) = (self.geometry.index_of(a)?, self.geometry.index_of(b)?);
        Ok(self.geodesic_between(config, s, t))
    }

    pub fn geodesic_between(&mut self, config: &EdgeConfiguration, s: usize, t: usize) -> RenormPath<T> {
        self.run(config, s, Some(t));
        let g = self.geometry.clone();
        let nv = g.vertex_count();
        let spoke = self.spoke();
        let mut rev = vec![t];
        let mut rev_steps = Vec::new();
        let mut hubs = Vec::new();
        let mut w = t;
        while w != s {
            let dw = self.dist[w];
            let mut best: Option<(EdgeRef, usize)> = None;
            config.for_each_open_neighbor(w, |u, e| {
                if self.done[u] && self.close(self.dist[u] + T::one(), dw) && best.is_none_or(|(b, _)| e < b) {
                    best = Some((e, u));
                }
            });
            if let Some((e, u)) = best {
                rev_steps.push(RenormStep::Open { edge: g.edge_index(e).expect("edge in box") });
                rev.push(u);
                w = u;
                continue;
            }
            self.cells.hubs_of_vertex(&g, w, &mut hubs);
            let hub = hubs
                .iter()
                .copied()
                .find(|&h| self.done[nv + h as usize] && self.close(self.dist[nv + h as usize] + spoke, dw))
                .expect("Dijkstra predecessor exists");
            let dh = self.dist[nv + hub as usize];
            let u = self
                .cells
                .members(hub)
                .iter()
                .map(|&u| u as usize)
                .find(|&u| u != w && self.done[u] && self.close(self.dist[u] + spoke, dh))
                .expect("hub predecessor exists");
            rev_steps.push(RenormStep::Red { cell: self.cells.cell_of_hub(hub) });
            rev.push(u);
            w = u;
        }
        rev.reverse();
        rev_steps.reverse();
        RenormPath { points: rev.into_iter().map(|v| g.point_of(v)).collect(), steps: rev_steps, weight: self.dist[t] }
    }
}

pub fn renorm_distance<T: Scalar>(
    config: &EdgeConfiguration,
    scheme: &RenormScheme<T>,
    a: &[i64],
    b: &[i64],
) -> Result<WeightedLength<T>> {
    RenormEngine::new(config.geometry(), *scheme).distance(config, a, b)
}

pub fn renorm_geodesic<T: Scalar>(
    config: &EdgeConfiguration,
    scheme: &RenormScheme<T>,
    a: &[i64],
    b: &[i64],
) -> Result<RenormPath<T>> {
    RenormEngine::new(config.geometry(), *scheme).geodesic(config, a, b)
}

/// Cell of each step, consecutive duplicates merged; a site is red when one
/// of its merged steps is a red edge.
pub fn red_site_profile<T: Scalar>(
    path: &RenormPath<T>,
    scheme: &RenormScheme<T>,
    g: &LatticeBox,
) -> Result<Vec<(MesoIndex, bool)>> {
    let mut out: Vec<(MesoIndex, bool)> = Vec::new();
    for step in &path.steps {
        let (cell, red) = match step {
            RenormStep::Open { edge } => (scheme.cell_of_edge(g, *edge)?, false),
            RenormStep::Red { cell } => (cell.clone(), true),
        };
        match out.last_mut() {
            Some((c, r)) if *c == cell => *r |= red,
            _ => out.push((cell, red)),
        }
    }
    Ok(out)
}

/// `3^d (1 + weight / t)`: bound on the number of cells a path of this weight visits.
pub fn visit_bound<T: Scalar>(d: usize, weight: T, t: u32) -> T {
    T::lit(3f64.powi(d as i32)) * (T::one() + weight / T::from_count(t as usize))
}

/// Every pair of connected points `x` in cell `k` and `y` in `k` or a
/// *-adjacent cell is joined by an open path of length at most `4ρt`.
pub fn is_good_box<T: Scalar>(
    config: &EdgeConfiguration,
    labeling: &ClusterLabeling,
    scheme: &RenormScheme<T>,
    k: &[i64],
) -> Result<bool> {
    let g = config.geometry();
    let d = g.dim();
    if k.len() != d {
        return Err(Error::Domain("cell index dimension mismatch".into()));
    }
    let t = scheme.t() as i64;
    let reach = t / 2 + 2;
    for a in 0..d {
        let lo = t * (k[a] - 1) - reach;
        let hi = t * (k[a] + 1) + reach;
        if lo < g.origin()[a] || hi > g.origin()[a] + g.sides()[a] as i64 - 1 {
            return Err(Error::Unavailable(format!("neighborhood of cell {k:?} is clipped by the box")));
        }
    }
    let own = scheme.point_indices_of_cell(g, k)?;
    let mut targets = BTreeSet::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let cell: Vec<i64> = k
            .iter()
            .map(|&x| {
                let o = (c % 3) as i64 - 1;
                c /= 3;
                x + o
            })
            .collect();
        targets.extend(scheme.point_indices_of_cell(g, &cell)?);
    }
    let limit = (T::lit(4.0) * scheme.rho() * T::from_count(scheme.t() as usize)).floor().to_f64_lossy() as u32;
    let mut bfs = Bfs::new();
    for &x in &own {
        bfs.run(config, x, None, Some(limit));
        for &y in &targets {
            if labeling.connected(x, y) && !bfs.distance(y).is_finite() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// One replicate's Efron–Stein lower-variance term.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfronSteinSample<T: Scalar> {
    /// `S`: the renormalized distance on the original configuration.
    pub s: T,
    /// Estimate of `V₋ = Σ_i E[((S − S^(i))₋)² | U]`.
    pub v_minus: T,
    /// Cells crossed by the chosen geodesic; only these can raise `S` when resampled.
    pub visited_cells: usize,
    pub resamples: usize,
    /// `3^d K² t (S + t)`.
    pub cap: T,
}

/// Resample each cell crossed by the geodesic `resamples` times and average
/// `max(S^(i) − S, 0)²`. Cells off the geodesic leave it intact, so their
/// `S^(i) ≤ S` and they contribute exactly zero.
///
/// Cell `i` resample `r` redraws the cell's edges with seed
/// `mix64(seed ^ mix64(key_i) ^ mix64(r))`, `key_i` being [`RenormScheme::cell_key`].
pub fn efron_stein_v_minus<T: Scalar>(
    engine: &mut RenormEngine<T>,
    config: &EdgeConfiguration,
    a: &[i64],
    b: &[i64],
    resamples: usize,
    seed: u64,
) -> Result<EfronSteinSample<T>> {
    if resamples == 0 {
        return Err(Error::Domain("at least one resample per cell".into()));
    }
    let g = config.geometry().clone();
    let (s_idx, t_idx) = (g.index_of(a)?, g.index_of(b)?);
    let path = engine.geodesic_between(config, s_idx, t_idx);
    let s = path.weight;
    let mut visited: BTreeSet<u32> = BTreeSet::new();
    for step in &path.steps {
        match step {
            RenormStep::Open { edge } => {
                visited.insert(engine.cells().hub_of_edge(g.edge_ref(*edge)?));
            }
            RenormStep::Red { cell } => {
                visited.insert(engine.cells().hub_of(cell).expect("cell of a path step"));
            }
        }
    }
    let p = config.p();
    let mut view = config.clone();
    let mut v_minus = T::zero();
    for &h in &visited {
        let cell = engine.cells().cell_of_hub(h);
        let key = RenormScheme::<T>::cell_key(&cell);
        let edges: Vec<(EdgeRef, u64)> = engine
            .cells()
            .edges_of_hub(&g, h)
            .into_iter()
            .map(|e| (e, g.edge_index(e).expect("edge in box") as u64))
            .collect();
        let mut acc = T::zero();
        for r in 0..resamples as u64 {
            let sub_seed = mix64(seed ^ mix64(key) ^ mix64(r));
            for &(e, idx) in &edges {
                view.set_open_ref(e, keyed_uniform(sub_seed, idx) < p);
            }
            let s_i = engine.distance_between(&view, s_idx, t_idx).0;
            let up = (s_i - s).max(T::zero());
            acc = acc + up * up;
        }
        for &(e, _) in &edges {
            view.set_open_ref(e, config.is_open_ref(e));
        }
        v_minus = v_minus + acc / T::from_count(resamples);
    }
    let d = g.dim();
    let tt = T::from_count(engine.scheme().t() as usize);
    let k = engine.scheme().k();
    let cap = T::lit(3f64.powi(d as i32)) * k * k * tt * (s + tt);
    if v_minus > cap * (T::one() + T::tolerance()) {
        return Err(Error::LawViolation {
            law: format!("V- cap: {v_minus} > 3^d K^2 t (S + t) = {cap}"),
            digest: config.digest(),
        });
    }
    Ok(EfronSteinSample { s, v_minus, visited_cells: visited.len(), resamples, cap })
}

/// Aggregate over replicates: `Var(S)` against `E[V₋]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfronSteinEstimate<T: Scalar> {
    pub replicates: usize,
    pub resamples: usize,
    pub mean_v_minus: T,
    pub v_minus_stderr: T,
    pub var_s: T,
    pub var_s_stderr: T,
    pub s_values: Vec<T>,
}

impl<T: Scalar> EfronSteinEstimate<T> {
    pub fn from_samples(samples: &[EfronSteinSample<T>]) -> Self {
        let s_values: Vec<T> = samples.iter().map(|s| s.s).collect();
        let v: Vec<T> = samples.iter().map(|s| s.v_minus).collect();
        let ms = moments(&s_values);
        let mv = moments(&v);
        EfronSteinEstimate {
            replicates: samples.len(),
            resamples: samples.first().map_or(0, |s| s.resamples),
            mean_v_minus: mv.mean,
            v_minus_stderr: mv.stderr,
            var_s: ms.variance,
            var_s_stderr: ms.variance_stderr,
            s_values,
        }
    }

    pub fn combined_stderr(&self) -> T {
        (self.v_minus_stderr.powi(2) + self.var_s_stderr.powi(2)).sqrt()
    }

    /// `Var(S) ≤ E[V₋] + sigmas · combined stderr`.
    pub fn inequality_holds(&self, sigmas: T) -> bool {
        self.var_s <= self.mean_v_minus + sigmas * self.combined_stderr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusters::label_clusters;

    fn scheme(t: u32) -> RenormScheme<f64> {
        RenormScheme::new(t, 17.0, 4.0).unwrap()
    }

    /// Dijkstra on the graph with every red edge listed explicitly.
    fn clique_oracle(cfg: &EdgeConfiguration, sch: &RenormScheme<f64>, s: usize) -> Vec<f64> {
        let g = cfg.geometry();
        let n = g.vertex_count();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in g.edges() {
            if cfg.is_open_ref(e) {
                let w = e.lower + g.strides()[e.axis as usize];
                adj[e.lower].push((w, 1.0));
                adj[w].push((e.lower, 1.0));
            }
        }
        let mut cells = std::collections::BTreeMap::<Vec<i64>, BTreeSet<usize>>::new();
        for e in g.edges() {
            let c = sch.cell_of(g, e);
            let set = cells.entry(c).or_default();
            set.insert(e.lower);
            set.insert(e.lower + g.strides()[e.axis as usize]);
        }
        for pts in cells.values() {
            for &x in pts {
                for &y in pts {
                    if x != y {
                        adj[x].push((y, sch.red_length()));
                    }
                }
            }
        }
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[s] = 0.0;
        for _ in 0..n {
            let u = (0..n).filter(|&v| !done[v]).min_by(|&a, &b| dist[a].total_cmp(&dist[b])).unwrap();
            done[u] = true;
            for &(w, c) in &adj[u] {
                dist[w] = dist[w].min(dist[u] + c);
            }
        }
        dist
    }

    #[test]
    fn matches_materialized_cliques() {
        for seed in 0..30u64 {
            let g = LatticeBox::new(vec![6 + (seed % 3) as usize, 5], vec![-2, -2]).unwrap();
            let cfg = EdgeConfiguration::sample(g.clone(), [0.2, 0.5, 0.8][seed as usize % 3], seed).unwrap();
            let sch = RenormScheme::new(1 + (seed % 4) as u32, 4.5 + seed as f64 * 0.37, 1.0).unwrap();
            let mut eng = RenormEngine::new(&g, sch);
            let s = (seed as usize * 7) % g.vertex_count();
            let oracle = clique_oracle(&cfg, &sch, s);
            for t in 0..g.vertex_count() {
                let got = eng.distance_between(&cfg, s, t).0;
                assert!((got - oracle[t]).abs() < 1e-9, "seed {seed} target {t}: {got} vs {}", oracle[t]);
                let path = eng.geodesic_between(&cfg, s, t);
                path.check(&cfg, &sch).unwrap();
                assert!((path.recomputed_weight(&sch) - got).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_cell_all_closed_is_one_red_edge() {
        let g = LatticeBox::new(vec![5, 5], vec![-2, -2]).unwrap();
        let cfg = EdgeConfiguration::sample(g, 0.0, 0).unwrap();
        let sch = scheme(64);
        let d = renorm_distance(&cfg, &sch, &[-2, -2], &[2, 1]).unwrap();
        assert_eq!(d.value(), 17.0 * 64.0);
        let path = renorm_geodesic(&cfg, &sch, &[-2, -2], &[2, 1]).unwrap();
        assert_eq!(path.steps, vec![RenormStep::Red { cell: vec![0, 0] }]);
        let profile = red_site_profile(&path, &sch, cfg.geometry()).unwrap();
        assert_eq!(profile, vec![(vec![0, 0], true)]);
    }

    #[test]
    fn full_lattice_never_uses_red_edges() {
        let g = LatticeBox::centered(2, 21).unwrap();
        let cfg = EdgeConfiguration::sample(g, 1.0, 0).unwrap();
        let sch = scheme(4);
        assert_eq!(renorm_distance(&cfg, &sch, &[0, 0], &[6, 0]).unwrap().value(), 6.0);
        let path = renorm_geodesic(&cfg, &sch, &[0, 0], &[6, 0]).unwrap();
        assert_eq!(path.red_steps(), 0);
        let profile = red_site_profile(&path, &sch, cfg.geometry()).unwrap();
        assert!(profile.iter().all(|(_, red)| !red));
        assert!((profile.len() as f64) <= visit_bound(2, path.weight, 4));
    }

    #[test]
    fn generic_over_f32() {
        let g = LatticeBox::centered(2, 9).unwrap();
        let cfg = EdgeConfiguration::sample(g, 0.0, 0).unwrap();
        let sch = RenormScheme::<f32>::new(2, 9.0, 2.0).unwrap();
        let d = renorm_distance(&cfg, &sch, &[0, 0], &[3, 0]).unwrap().value();
        assert!(d > 0.0 && d <= 9.0 * (3.0 + 2.0));
    }

    #[test]
    fn good_box_extremes() {
        let g = LatticeBox::centered(2, 31).unwrap();
        let sch = scheme(3);
        for p in [0.0, 1.0] {
            let cfg = EdgeConfiguration::sample(g.clone(), p, 1).unwrap();
            let lab = label_clusters(&cfg);
            assert!(is_good_box(&cfg, &lab, &sch, &[0, 0]).unwrap());
        }
        let cfg = EdgeConfiguration::sample(g.clone(), 1.0, 1).unwrap();
        let lab = label_clusters(&cfg);
        assert!(matches!(is_good_box(&cfg, &lab, &sch, &[4, 0]), Err(Error::Unavailable(_))));
    }

    #[test]
    fn long_corridor_makes_box_bad() {
        // t = 2, rho = 1: limit 4 rho t = 8. Points (1,0) and (2,0) sit in
        // adjacent cells but are joined only by a 1-wide detour of length 13.
        let g = LatticeBox::centered(2, 31).unwrap();
        let sch = RenormScheme::new(2, 5.0, 1.0).unwrap();
        let mut pairs = Vec::new();
        let route: Vec<[i64; 2]> = vec![
            [1, 0],
            [1, 1],
            [1, 2],
            [1, 3],
            [1, 4],
            [1, 5],
            [1, 6],
            [2, 6],
            [2, 5],
            [2, 4],
            [2, 3],
            [2, 2],
            [2, 1],
            [2, 0],
        ];
        for w in route.windows(2) {
            pairs.push((w[0].to_vec(), w[1].to_vec()));
        }
        let cfg = EdgeConfiguration::from_open_pairs(g, &pairs).unwrap();
        let lab = label_clusters(&cfg);
        assert!(!is_good_box(&cfg, &lab, &sch, &[0, 0]).unwrap());
    }

    #[test]
    fn efron_stein_trivial_cases() {
        let g = LatticeBox::centered(2, 21).unwrap();
        let sch = scheme(4);
        for p in [0.0, 1.0] {
            let cfg = EdgeConfiguration::sample(g.clone(), p, 9).unwrap();
            let mut eng = RenormEngine::new(&g, sch);
            let es = efron_stein_v_minus(&mut eng, &cfg, &[0, 0], &[6, 0], 5, 3).unwrap();
            assert_eq!(es.v_minus, 0.0);
        }
    }

    #[test]
    fn efron_stein_respects_cap() {
        let g = LatticeBox::centered(2, 25).unwrap();
        let sch = scheme(4);
        let mut eng = RenormEngine::new(&g, sch);
        for seed in 0..20 {
            let cfg = EdgeConfiguration::sample(g.clone(), 0.6, seed).unwrap();
            let es = efron_stein_v_minus(&mut eng, &cfg, &[0, 0], &[8, 0], 4, seed).unwrap();
            assert!(es.v_minus >= 0.0 && es.v_minus <= es.cap);
            // the resampling view is private
            assert_eq!(cfg, EdgeConfiguration::sample(g.clone(), 0.6, seed).unwrap());
        }
    }
}
