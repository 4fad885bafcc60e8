//! Chemical distance in the open subgraph, distance fields, geodesics, the
//! modified distance between infinite-cluster projections and ordered
//! waypoint lengths.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::ops::Add;

use crate::clusters::{nearest_giant_index, ClusterLabeling};
use crate::error::{Error, Result};
use crate::lattice::{EdgeConfiguration, EdgeRef, LatticeBox, Point};

/// Path length in the open subgraph, with an absorbing infinity for disconnected endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ExtendedLength {
    Finite(u64),
    Infinite,
}

impl ExtendedLength {
    pub fn finite(self) -> Option<u64> {
        match self {
            ExtendedLength::Finite(v) => Some(v),
            ExtendedLength::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedLength::Finite(_))
    }
}

impl Add for ExtendedLength {
    type Output = ExtendedLength;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (ExtendedLength::Finite(a), ExtendedLength::Finite(b)) => ExtendedLength::Finite(a + b),
            _ => ExtendedLength::Infinite,
        }
    }
}

impl PartialOrd for ExtendedLength {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedLength {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedLength::Finite(a), ExtendedLength::Finite(b)) => a.cmp(b),
            (ExtendedLength::Finite(_), ExtendedLength::Infinite) => Ordering::Less,
            (ExtendedLength::Infinite, ExtendedLength::Finite(_)) => Ordering::Greater,
            (ExtendedLength::Infinite, ExtendedLength::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedLength::Finite(v) => write!(f, "{v}"),
            ExtendedLength::Infinite => f.write_str("inf"),
        }
    }
}

pub(crate) const UNREACHED: u32 = u32::MAX;

/// Reusable breadth-first search over open edges. One per worker.
#[derive(Clone, Debug, Default)]
pub struct Bfs {
    dist: Vec<u32>,
    touched: Vec<u32>,
    frontier: Vec<u32>,
    next: Vec<u32>,
}

impl Bfs {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, n: usize) {
        if self.dist.len() != n {
            self.dist.clear();
            self.dist.resize(n, UNREACHED);
        } else {
            for &v in &self.touched {
                self.dist[v as usize] = UNREACHED;
            }
        }
        self.touched.clear();
    }

    /// Run from `source`, stopping once `target` is settled or beyond depth `cutoff`.
    pub fn run(&mut self, config: &EdgeConfiguration, source: usize, target: Option<usize>, cutoff: Option<u32>) {
        let n = config.geometry().vertex_count();
        self.reset(n);
        self.dist[source] = 0;
        self.touched.push(source as u32);
        self.frontier.clear();
        self.frontier.push(source as u32);
        let mut depth = 0u32;
        if target == Some(source) {
            return;
        }
        while !self.frontier.is_empty() {
            if cutoff.is_some_and(|c| depth >= c) {
                break;
            }
            depth += 1;
            self.next.clear();
            let mut found = false;
            for &v in &self.frontier {
                config.for_each_open_neighbor(v as usize, |u, _| {
                    if self.dist[u] == UNREACHED {
                        self.dist[u] = depth;
                        self.touched.push(u as u32);
                        self.next.push(u as u32);
                        found |= Some(u) == target;
                    }
                });
            }
            std::mem::swap(&mut self.frontier, &mut self.next);
            if found {
                break;
            }
        }
    }

    #[inline]
    pub fn distance(&self, v: usize) -> ExtendedLength {
        match self.dist[v] {
            UNREACHED => ExtendedLength::Infinite,
            d => ExtendedLength::Finite(d as u64),
        }
    }

    pub fn raw(&self) -> &[u32] {
        &self.dist
    }

    /// Vertices reached by the last run, in discovery order.
    pub fn reached(&self) -> &[u32] {
        &self.touched
    }
}

fn index(config: &EdgeConfiguration, x: &[i64]) -> Result<usize> {
    config.geometry().index_of(x)
}

pub fn chemical_distance(config: &EdgeConfiguration, a: &[i64], b: &[i64]) -> Result<ExtendedLength> {
    let (s, t) = (index(config, a)?, index(config, b)?);
    let mut bfs = Bfs::new();
    bfs.run(config, s, Some(t), None);
    Ok(bfs.distance(t))
}

/// Single-source distances to every vertex of the box.
#[derive(Clone, Debug)]
pub struct DistanceField {
    geometry: LatticeBox,
    source: usize,
    dist: Vec<u32>,
}

impl DistanceField {
    pub fn get(&self, x: &[i64]) -> Result<ExtendedLength> {
        Ok(self.at(self.geometry.index_of(x)?))
    }

    #[inline]
    pub fn at(&self, v: usize) -> ExtendedLength {
        match self.dist[v] {
            UNREACHED => ExtendedLength::Infinite,
            d => ExtendedLength::Finite(d as u64),
        }
    }

    pub fn source(&self) -> Point {
        self.geometry.point_of(self.source)
    }

    pub fn geometry(&self) -> &LatticeBox {
        &self.geometry
    }

    pub fn raw(&self) -> &[u32] {
        &self.dist
    }

    /// CSV grid for two-dimensional boxes: one row per axis-0 coordinate, `inf` for unreachable.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        if self.geometry.dim() != 2 {
            return Err(Error::Domain("CSV grids are two-dimensional".into()));
        }
        let cols = self.geometry.sides()[1];
        let y0 = self.geometry.origin()[1];
        let header: Vec<String> = (0..cols).map(|j| format!("y={}", y0 + j as i64)).collect();
        writeln!(w, "x,{}", header.join(","))?;
        for i in 0..self.geometry.sides()[0] {
            let row: Vec<String> = (0..cols).map(|j| self.at(i * cols + j).to_string()).collect();
            writeln!(w, "{},{}", self.geometry.origin()[0] + i as i64, row.join(","))?;
        }
        Ok(())
    }
}

pub fn distance_field(config: &EdgeConfiguration, source: &[i64]) -> Result<DistanceField> {
    let s = index(config, source)?;
    Ok(distance_field_from(config, s))
}

pub fn distance_field_from(config: &EdgeConfiguration, source: usize) -> DistanceField {
    let mut bfs = Bfs::new();
    bfs.run(config, source, None, None);
    DistanceField { geometry: config.geometry().clone(), source, dist: bfs.dist }
}

/// Vertex sequence of an open path with the canonical indices of its edges.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePath {
    pub points: Vec<Point>,
    pub edges: Vec<usize>,
}

impl LatticePath {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn start(&self) -> &[i64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[i64] {
        self.points.last().expect("non-empty path")
    }

    /// Consecutive points are neighbors, every edge is open, and no vertex repeats.
    pub fn check(&self, config: &EdgeConfiguration) -> Result<()> {
        let g = config.geometry();
        if self.points.len() != self.edges.len() + 1 {
            return Err(Error::Structural("edge and point counts disagree".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &self.points {
            if !seen.insert(p.clone()) {
                return Err(Error::Structural(format!("vertex {p:?} repeated")));
            }
        }
        for (i, &e) in self.edges.iter().enumerate() {
            let (u, w, _) = g.edge_endpoints(e)?;
            let (a, b) = (&self.points[i], &self.points[i + 1]);
            if !((&u == a && &w == b) || (&u == b && &w == a)) {
                return Err(Error::Structural(format!("step {i} does not follow edge {e}")));
            }
            if !config.is_open(e)? {
                return Err(Error::Structural(format!("step {i} uses closed edge {e}")));
            }
        }
        Ok(())
    }
}

/// Shortest open path; each vertex's predecessor is reached through the smallest
/// canonical edge among its shortest-path parents.
pub fn geodesic(config: &EdgeConfiguration, a: &[i64], b: &[i64]) -> Result<LatticePath> {
    let (s, t) = (index(config, a)?, index(config, b)?);
    let mut bfs = Bfs::new();
    bfs.run(config, s, Some(t), None);
    geodesic_from_bfs(config, &bfs, s, t)
}

pub(crate) fn geodesic_from_bfs(config: &EdgeConfiguration, bfs: &Bfs, s: usize, t: usize) -> Result<LatticePath> {
    let g = config.geometry();
    if bfs.dist[t] == UNREACHED {
        return Err(Error::Unavailable(format!("{:?} and {:?} are not connected", g.point_of(s), g.point_of(t))));
    }
    let mut rev = vec![t];
    let mut rev_edges: Vec<EdgeRef> = Vec::new();
    let mut w = t;
    while w != s {
        let want = bfs.dist[w] - 1;
        let mut best: Option<(EdgeRef, usize)> = None;
        config.for_each_open_neighbor(w, |u, e| {
            if bfs.dist[u] == want && best.is_none_or(|(b, _)| e < b) {
                best = Some((e, u));
            }
        });
        let (e, u) = best.expect("BFS predecessor exists");
        rev_edges.push(e);
        rev.push(u);
        w = u;
    }
    rev.reverse();
    rev_edges.reverse();
    Ok(LatticePath {
        points: rev.into_iter().map(|v| g.point_of(v)).collect(),
        edges: rev_edges.into_iter().map(|e| g.edge_index(e).expect("edge in box")).collect(),
    })
}

/// `D(x*, y*)` with projections onto the giant proxy.
pub fn modified_distance(
    config: &EdgeConfiguration,
    labeling: &ClusterLabeling,
    x: &[i64],
    y: &[i64],
) -> Result<ExtendedLength> {
    let g = config.geometry();
    let xs = nearest_giant_index(labeling, g, g.index_of(x)?)?;
    let ys = nearest_giant_index(labeling, g, g.index_of(y)?)?;
    let mut bfs = Bfs::new();
    bfs.run(config, xs, Some(ys), None);
    Ok(bfs.distance(ys))
}

/// Length of the shortest open walk visiting the waypoints in order: the sum of consecutive distances.
pub fn ordered_waypoint_distance(config: &EdgeConfiguration, waypoints: &[Point]) -> Result<ExtendedLength> {
    if waypoints.len() < 2 {
        return Err(Error::Domain("need at least two waypoints".into()));
    }
    let mut bfs = Bfs::new();
    let mut total = ExtendedLength::Finite(0);
    for pair in waypoints.windows(2) {
        let (s, t) = (index(config, &pair[0])?, index(config, &pair[1])?);
        bfs.run(config, s, Some(t), None);
        total = total + bfs.distance(t);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusters::label_clusters;

    fn full(side: usize) -> EdgeConfiguration {
        EdgeConfiguration::sample(LatticeBox::centered(2, side).unwrap(), 1.0, 0).unwrap()
    }

    #[test]
    fn full_lattice_distance_is_l1() {
        let cfg = full(11);
        assert_eq!(chemical_distance(&cfg, &[0, 0], &[3, 4]).unwrap(), ExtendedLength::Finite(7));
        let field = distance_field(&cfg, &[1, -2]).unwrap();
        for v in 0..cfg.geometry().vertex_count() {
            let p = cfg.geometry().point_of(v);
            assert_eq!(field.at(v), ExtendedLength::Finite(LatticeBox::l1(&p, &[1, -2])));
        }
    }

    #[test]
    fn closed_lattice_is_disconnected() {
        let cfg = EdgeConfiguration::sample(LatticeBox::centered(2, 5).unwrap(), 0.0, 0).unwrap();
        assert_eq!(chemical_distance(&cfg, &[0, 0], &[1, 0]).unwrap(), ExtendedLength::Infinite);
        assert_eq!(chemical_distance(&cfg, &[0, 0], &[0, 0]).unwrap(), ExtendedLength::Finite(0));
        assert!(matches!(geodesic(&cfg, &[0, 0], &[1, 0]), Err(Error::Unavailable(_))));
    }

    #[test]
    fn three_edge_detour() {
        let g = LatticeBox::new(vec![3, 3], vec![0, 0]).unwrap();
        let cfg = EdgeConfiguration::from_open_pairs(
            g,
            &[(vec![0, 0], vec![1, 0]), (vec![1, 0], vec![1, 1]), (vec![1, 1], vec![0, 1])],
        )
        .unwrap();
        assert_eq!(chemical_distance(&cfg, &[0, 0], &[0, 1]).unwrap(), ExtendedLength::Finite(3));
        let path = geodesic(&cfg, &[0, 0], &[0, 1]).unwrap();
        assert_eq!(path.points, vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]]);
        path.check(&cfg).unwrap();
    }

    #[test]
    fn geodesic_on_full_lattice_is_deterministic() {
        let cfg = full(9);
        let a = geodesic(&cfg, &[0, 0], &[2, 2]).unwrap();
        let b = geodesic(&cfg, &[0, 0], &[2, 2]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        a.check(&cfg).unwrap();
        let single = geodesic(&cfg, &[1, 1], &[1, 1]).unwrap();
        assert_eq!(single.points, vec![vec![1, 1]]);
    }

    #[test]
    fn waypoints() {
        let cfg = full(9);
        let w = |v: &[[i64; 2]]| v.iter().map(|p| p.to_vec()).collect::<Vec<_>>();
        assert_eq!(ordered_waypoint_distance(&cfg, &w(&[[0, 0], [2, 0], [0, 0]])).unwrap(), ExtendedLength::Finite(4));
        assert_eq!(ordered_waypoint_distance(&cfg, &w(&[[1, 1], [1, 1], [1, 1]])).unwrap(), ExtendedLength::Finite(0));
        assert!(ordered_waypoint_distance(&cfg, &w(&[[0, 0]])).is_err());
    }

    #[test]
    fn modified_distance_inside_giant() {
        let cfg = full(9);
        let lab = label_clusters(&cfg);
        assert_eq!(modified_distance(&cfg, &lab, &[0, 0], &[2, 3]).unwrap(), ExtendedLength::Finite(5));
        assert_eq!(modified_distance(&cfg, &lab, &[1, 1], &[1, 1]).unwrap(), ExtendedLength::Finite(0));
    }

    #[test]
    fn out_of_box_is_range_error() {
        let cfg = full(5);
        assert!(matches!(chemical_distance(&cfg, &[0, 0], &[9, 0]), Err(Error::Range(_))));
    }

    #[test]
    fn extended_arithmetic() {
        use ExtendedLength::*;
        assert_eq!(Finite(2) + Finite(3), Finite(5));
        assert_eq!(Finite(2) + Infinite, Infinite);
        assert!(Finite(u64::MAX) < Infinite);
    }

    #[test]
    fn csv_grid() {
        let cfg = full(3);
        let field = distance_field(&cfg, &[0, 0]).unwrap();
        let mut out = Vec::new();
        field.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "x,y=-1,y=0,y=1");
        assert_eq!(text.lines().nth(2).unwrap(), "0,1,0,1");
    }
}
