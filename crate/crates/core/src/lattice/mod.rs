//! Finite boxes of Z^d, canonical edge numbering, Bernoulli edge configurations
//! and the mesoscopic box partition used by the renormalized distance.
//!
//! Vertices are numbered in lexicographic coordinate order (axis 0 most
//! significant). Canonical edge order visits vertices in that order and, for
//! each vertex, the edges towards `v + e_axis` with ascending axis, skipping
//! edges that leave the box. Comparing canonical indices is therefore the
//! same as comparing `(lower endpoint index, axis)` lexicographically.

mod config;
mod format;
mod meso;
pub mod rng;

pub use config::EdgeConfiguration;
pub use format::{digest, CONFIG_MAGIC, CONFIG_VERSION};
pub use meso::{star_adjacent, MesoIndex, RenormScheme};

use crate::error::{Error, Result};

/// Largest supported dimension; open edges are stored as one byte of flags per vertex.
pub const MAX_DIM: usize = 8;

/// Integer lattice point in global coordinates.
pub type Point = Vec<i64>;

/// An edge `(lower, lower + e_axis)` given by the linear index of its lower endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRef {
    pub lower: usize,
    pub axis: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    sides: Vec<usize>,
    origin: Vec<i64>,
    strides: Vec<usize>,
    vertex_count: usize,
}

impl LatticeBox {
    /// Box `origin + [0, sides)`.
    pub fn new(sides: Vec<usize>, origin: Vec<i64>) -> Result<Self> {
        let d = sides.len();
        if !(2..=MAX_DIM).contains(&d) {
            return Err(Error::Domain(format!("dimension {d} outside 2..={MAX_DIM}")));
        }
        if origin.len() != d {
            return Err(Error::Domain("origin dimension differs from sides".into()));
        }
        if let Some(s) = sides.iter().find(|&&s| s < 2) {
            return Err(Error::Domain(format!("side {s} < 2")));
        }
        let mut strides = vec![1usize; d];
        for i in (0..d - 1).rev() {
            strides[i] =
                strides[i + 1].checked_mul(sides[i + 1]).ok_or_else(|| Error::Domain("box too large".into()))?;
        }
        let vertex_count = strides[0]
            .checked_mul(sides[0])
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::Domain("box too large".into()))?;
        if sides.iter().zip(&origin).any(|(&s, &o)| o.checked_add(s as i64).is_none()) {
            return Err(Error::Domain("box corner overflows".into()));
        }
        Ok(LatticeBox { sides, origin, strides, vertex_count })
    }

    /// Cube of the given side with 0 at its center (lower-middle for even sides).
    pub fn centered(d: usize, side: usize) -> Result<Self> {
        Self::new(vec![side; d], vec![-((side / 2) as i64); d])
    }

    /// Box with per-axis extents `[lo_a, hi_a]` (inclusive).
    pub fn spanning(lo: &[i64], hi: &[i64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Domain("corner dimensions differ".into()));
        }
        let sides = lo.iter().zip(hi).map(|(&l, &h)| if h >= l { (h - l + 1) as usize } else { 0 }).collect();
        Self::new(sides, lo.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Σ_i (s_i − 1) Π_{j≠i} s_j
    pub fn edge_count(&self) -> usize {
        (0..self.dim()).map(|i| self.vertex_count / self.sides[i] * (self.sides[i] - 1)).sum()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.origin).zip(&self.sides).all(|((&c, &o), &s)| c >= o && c < o + s as i64)
    }

    pub fn index_of(&self, x: &[i64]) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!("point of dimension {} in a {}-dimensional box", x.len(), self.dim())));
        }
        if !self.contains(x) {
            return Err(Error::Range(format!("point {x:?} outside the box")));
        }
        Ok(x.iter().zip(&self.origin).zip(&self.strides).map(|((&c, &o), &st)| (c - o) as usize * st).sum())
    }

    pub fn point_of(&self, index: usize) -> Point {
        let mut rest = index;
        self.strides
            .iter()
            .zip(&self.origin)
            .map(|(&st, &o)| {
                let c = rest / st;
                rest %= st;
                o + c as i64
            })
            .collect()
    }

    /// Local (origin-relative) coordinate of `index` along `axis`.
    #[inline]
    pub fn local_coord(&self, index: usize, axis: usize) -> usize {
        (index / self.strides[axis]) % self.sides[axis]
    }

    #[inline]
    pub fn has_edge(&self, lower: usize, axis: usize) -> bool {
        self.local_coord(lower, axis) + 1 < self.sides[axis]
    }

    /// Neighbor across `axis` in direction `+1` or `-1`, if inside the box.
    #[inline]
    pub fn neighbor(&self, index: usize, axis: usize, forward: bool) -> Option<usize> {
        let c = self.local_coord(index, axis);
        if forward {
            (c + 1 < self.sides[axis]).then(|| index + self.strides[axis])
        } else {
            (c > 0).then(|| index - self.strides[axis])
        }
    }

    /// Number of edges whose canonical position precedes the edges of vertex `index`.
    fn edges_before(&self, index: usize) -> usize {
        let d = self.dim();
        let local: Vec<usize> = (0..d).map(|a| self.local_coord(index, a)).collect();
        let mut total = 0usize;
        for axis in 0..d {
            // count vertices w < index (lexicographic) with w_axis <= s_axis - 2
            for j in 0..d {
                let prefix_ok = (0..j).all(|i| i != axis || local[i] + 1 < self.sides[i]);
                if !prefix_ok {
                    continue;
                }
                let at_j = if j == axis { local[j].min(self.sides[j] - 1) } else { local[j] };
                let suffix: usize =
                    (j + 1..d).map(|i| if i == axis { self.sides[i] - 1 } else { self.sides[i] }).product();
                total += at_j * suffix;
            }
        }
        total
    }

    /// Canonical index of the edge `(lower, lower + e_axis)`.
    pub fn edge_index(&self, edge: EdgeRef) -> Result<usize> {
        let axis = edge.axis as usize;
        if edge.lower >= self.vertex_count || axis >= self.dim() || !self.has_edge(edge.lower, axis) {
            return Err(Error::Range(format!("edge {edge:?} not in the box")));
        }
        let before = self.edges_before(edge.lower);
        let within = (0..axis).filter(|&b| self.has_edge(edge.lower, b)).count();
        Ok(before + within)
    }

    pub fn edge_index_of(&self, vertex: &[i64], axis: usize) -> Result<usize> {
        let lower = self.index_of(vertex)?;
        if axis >= self.dim() {
            return Err(Error::Range(format!("axis {axis} >= dimension")));
        }
        self.edge_index(EdgeRef { lower, axis: axis as u8 })
    }

    /// Inverse of [`LatticeBox::edge_index`].
    pub fn edge_ref(&self, edge_index: usize) -> Result<EdgeRef> {
        if edge_index >= self.edge_count() {
            return Err(Error::Range(format!("edge index {edge_index} >= edge count {}", self.edge_count())));
        }
        // largest vertex whose first edge position is <= edge_index
        let (mut lo, mut hi) = (0usize, self.vertex_count);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.edges_before(mid) <= edge_index {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut offset = edge_index - self.edges_before(lo);
        for axis in 0..self.dim() {
            if self.has_edge(lo, axis) {
                if offset == 0 {
                    return Ok(EdgeRef { lower: lo, axis: axis as u8 });
                }
                offset -= 1;
            }
        }
        unreachable!("edge index resolved to a vertex without enough edges")
    }

    /// Endpoints `(v, v + e_axis)` and axis of a canonical edge.
    pub fn edge_endpoints(&self, edge_index: usize) -> Result<(Point, Point, usize)> {
        let e = self.edge_ref(edge_index)?;
        let v = self.point_of(e.lower);
        let mut w = v.clone();
        w[e.axis as usize] += 1;
        Ok((v, w, e.axis as usize))
    }

    /// All edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRef> + '_ {
        (0..self.vertex_count).flat_map(move |v| {
            (0..self.dim()).filter(move |&a| self.has_edge(v, a)).map(move |a| EdgeRef { lower: v, axis: a as u8 })
        })
    }

    pub fn l1(a: &[i64], b: &[i64]) -> u64 {
        a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exhaustive_edges(b: &LatticeBox) -> Vec<(Point, usize)> {
        let mut out = Vec::new();
        for v in 0..b.vertex_count() {
            let p = b.point_of(v);
            for a in 0..b.dim() {
                let mut q = p.clone();
                q[a] += 1;
                if b.contains(&q) {
                    out.push((p.clone(), a));
                }
            }
        }
        out
    }

    #[test]
    fn two_by_two_first_edge() {
        let b = LatticeBox::new(vec![2, 2], vec![0, 0]).unwrap();
        assert_eq!(b.edge_count(), 4);
        let (v, w, a) = b.edge_endpoints(0).unwrap();
        assert_eq!((v, w, a), (vec![0, 0], vec![1, 0], 0));
        assert!(matches!(b.edge_endpoints(4), Err(Error::Range(_))));
    }

    #[test]
    fn three_by_three_roundtrip() {
        let b = LatticeBox::new(vec![3, 3], vec![0, 0]).unwrap();
        assert_eq!(b.edge_count(), 12);
        let brute = exhaustive_edges(&b);
        assert_eq!(brute.len(), 12);
        for (e, (p, a)) in brute.iter().enumerate() {
            let (v, _, axis) = b.edge_endpoints(e).unwrap();
            assert_eq!((&v, axis), (p, *a));
            assert_eq!(b.edge_index_of(&v, axis).unwrap(), e);
        }
    }

    #[test]
    fn edge_count_matches_enumeration_small_boxes() {
        for d in 2..=3usize {
            let mut sides = vec![2usize; d];
            loop {
                let b = LatticeBox::new(sides.clone(), vec![-1; d]).unwrap();
                let brute = exhaustive_edges(&b);
                assert_eq!(b.edge_count(), brute.len(), "sides {sides:?}");
                for (e, (p, a)) in brute.iter().enumerate() {
                    assert_eq!(b.edge_index_of(p, *a).unwrap(), e);
                    assert_eq!(b.edge_ref(e).unwrap().lower, b.index_of(p).unwrap());
                }
                assert_eq!(b.edges().count(), brute.len());
                // odometer over sides in 2..=4
                let mut i = 0;
                while i < d && sides[i] == 4 {
                    sides[i] = 2;
                    i += 1;
                }
                if i == d {
                    break;
                }
                sides[i] += 1;
            }
        }
    }

    #[test]
    fn rejects_bad_boxes() {
        assert!(LatticeBox::new(vec![5], vec![0]).is_err());
        assert!(LatticeBox::new(vec![1, 5], vec![0, 0]).is_err());
        assert!(LatticeBox::new(vec![3, 3], vec![0]).is_err());
    }

    #[test]
    fn centered_contains_origin() {
        let b = LatticeBox::centered(2, 21).unwrap();
        assert!(b.contains(&[0, 0]));
        assert!(b.contains(&[-10, 10]));
        assert!(!b.contains(&[11, 0]));
        let i = b.index_of(&[3, -4]).unwrap();
        assert_eq!(b.point_of(i), vec![3, -4]);
    }
}
