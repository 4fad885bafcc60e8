//! Mesoscopic cells: each edge belongs to the cell `k` whose center `t·k` is
//! nearest (Euclidean) to the edge midpoint. Ties go to the lexicographically
//! smallest `k`; because the candidate set is a product over axes this is the
//! per-axis smaller choice.

use super::rng::mix64;
use super::{EdgeRef, LatticeBox, Point};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Integer label of a mesoscopic cell.
pub type MesoIndex = Vec<i64>;

/// Mesoscopic scale `t`, red-edge multiplier `K` and the calibrated constant `ρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormScheme<T: Scalar> {
    t: u32,
    k: T,
    rho: T,
}

impl<T: Scalar> RenormScheme<T> {
    pub fn new(t: u32, k: T, rho: T) -> Result<Self> {
        if t == 0 {
            return Err(Error::Domain("mesoscopic scale t must be positive".into()));
        }
        if !(rho >= T::one()) {
            return Err(Error::Domain(format!("rho = {rho} must be >= 1")));
        }
        if !(k > T::lit(4.0) * rho) {
            return Err(Error::Domain(format!("K = {k} must exceed 4 rho = {}", T::lit(4.0) * rho)));
        }
        Ok(RenormScheme { t, k, rho })
    }

    /// `ρ` given, `K = 4ρ + 1`.
    pub fn with_rho(t: u32, rho: T) -> Result<Self> {
        Self::new(t, T::lit(4.0) * rho + T::one(), rho)
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn rho(&self) -> T {
        self.rho
    }

    /// Length `K·t` of a red edge.
    pub fn red_length(&self) -> T {
        self.k * T::from_count(self.t as usize)
    }

    /// Cell coordinate along one axis for an edge whose doubled midpoint coordinate is `twice_mid`.
    #[inline]
    pub(crate) fn cell_coord(&self, twice_mid: i64) -> i64 {
        // nearest integer to twice_mid / (2t), halves rounded down
        let t = self.t as i64;
        (twice_mid - t).div_euclid(2 * t) + i64::from((twice_mid - t).rem_euclid(2 * t) != 0)
    }

    /// Cell of the edge `(v, v + e_axis)` given the global coordinates of `v`.
    pub fn cell_of_edge_at(&self, lower: &[i64], axis: usize) -> MesoIndex {
        lower.iter().enumerate().map(|(a, &c)| self.cell_coord(2 * c + i64::from(a == axis))).collect()
    }

    pub fn cell_of_edge(&self, geometry: &LatticeBox, edge_index: usize) -> Result<MesoIndex> {
        let e = geometry.edge_ref(edge_index)?;
        Ok(self.cell_of(geometry, e))
    }

    pub fn cell_of(&self, geometry: &LatticeBox, e: EdgeRef) -> MesoIndex {
        self.cell_of_edge_at(&geometry.point_of(e.lower), e.axis as usize)
    }

    /// Cells whose point sets contain `v`, i.e. the cells of its incident edges. Sorted, deduplicated.
    pub fn cells_of_vertex(&self, geometry: &LatticeBox, v: usize) -> Vec<MesoIndex> {
        let p = geometry.point_of(v);
        let mut cells = Vec::with_capacity(2 * p.len());
        for a in 0..p.len() {
            if geometry.has_edge(v, a) {
                cells.push(self.cell_of_edge_at(&p, a));
            }
            if let Some(u) = geometry.neighbor(v, a, false) {
                let mut q = p.clone();
                q[a] -= 1;
                debug_assert_eq!(geometry.index_of(&q).ok(), Some(u));
                cells.push(self.cell_of_edge_at(&q, a));
            }
        }
        cells.sort();
        cells.dedup();
        cells
    }

    /// Vertices (global coordinates, lexicographic order) that are an endpoint of some edge of cell `k`.
    pub fn points_of_cell(&self, geometry: &LatticeBox, k: &[i64]) -> Result<Vec<Point>> {
        Ok(self.point_indices_of_cell(geometry, k)?.into_iter().map(|v| geometry.point_of(v)).collect())
    }

    /// Linear indices of the point set of cell `k`, ascending.
    pub fn point_indices_of_cell(&self, geometry: &LatticeBox, k: &[i64]) -> Result<Vec<usize>> {
        let d = geometry.dim();
        if k.len() != d {
            return Err(Error::Domain("cell index dimension mismatch".into()));
        }
        let t = self.t as i64;
        let reach = t / 2 + 2;
        let lo: Vec<i64> = (0..d).map(|a| (t * k[a] - reach).max(geometry.origin()[a])).collect();
        let hi: Vec<i64> =
            (0..d).map(|a| (t * k[a] + reach).min(geometry.origin()[a] + geometry.sides()[a] as i64 - 1)).collect();
        let mut out = Vec::new();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Ok(out);
        }
        let mut p = lo.clone();
        loop {
            let v = geometry.index_of(&p)?;
            if self.cells_of_vertex(geometry, v).iter().any(|c| c.as_slice() == k) {
                out.push(v);
            }
            let mut i = d;
            loop {
                if i == 0 {
                    out.sort_unstable();
                    return Ok(out);
                }
                i -= 1;
                p[i] += 1;
                if p[i] <= hi[i] {
                    break;
                }
                p[i] = lo[i];
            }
        }
    }

    /// Stable 64-bit key of a cell, used to key its resampling stream.
    pub fn cell_key(k: &[i64]) -> u64 {
        k.iter().fold(0x5045_5243_4d45_534f_u64, |h, &c| mix64(h ^ c as u64))
    }
}

/// `‖k − l‖_∞ == 1`.
pub fn star_adjacent(k: &[i64], l: &[i64]) -> Result<bool> {
    if k.len() != l.len() {
        return Err(Error::Domain("cell index dimension mismatch".into()));
    }
    Ok(k.iter().zip(l).map(|(a, b)| a.abs_diff(*b)).max() == Some(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn scheme(t: u32) -> RenormScheme<f64> {
        RenormScheme::with_rho(t, 4.0).unwrap()
    }

    /// Candidate cells around the midpoint, minimizing squared distance with lexicographic ties.
    fn brute_cell(t: i64, lower: &[i64], axis: usize) -> Vec<i64> {
        let mid: Vec<f64> =
            lower.iter().enumerate().map(|(a, &c)| c as f64 + if a == axis { 0.5 } else { 0.0 }).collect();
        let base: Vec<i64> = mid.iter().map(|m| (m / t as f64).floor() as i64).collect();
        let mut best: Option<(f64, Vec<i64>)> = None;
        let d = lower.len();
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let k: Vec<i64> = base
                .iter()
                .map(|&b| {
                    let o = (c % 3) as i64 - 1;
                    c /= 3;
                    b + o
                })
                .collect();
            let dist: f64 = k.iter().zip(&mid).map(|(&ki, &m)| (m - (t * ki) as f64).powi(2)).sum();
            let better = match &best {
                None => true,
                Some((bd, bk)) => dist < *bd - 1e-12 || ((dist - bd).abs() <= 1e-12 && k < *bk),
            };
            if better {
                best = Some((dist, k));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn nearest_cell_examples() {
        assert_eq!(scheme(4).cell_of_edge_at(&[0, 0], 0), vec![0, 0]);
        // midpoint (1, 0.5) at t = 2 ties between k = (0,0) and (1,0)
        assert_eq!(scheme(2).cell_of_edge_at(&[1, 0], 1), vec![0, 0]);
    }

    #[test]
    fn cell_rule_matches_brute_force() {
        let g = LatticeBox::new(vec![9, 9], vec![-4, -4]).unwrap();
        for t in 1..=5u32 {
            let s = scheme(t);
            for e in g.edges() {
                let lower = g.point_of(e.lower);
                assert_eq!(s.cell_of(&g, e), brute_cell(t as i64, &lower, e.axis as usize));
            }
        }
        let g3 = LatticeBox::new(vec![4, 4, 4], vec![-2, -1, 0]).unwrap();
        for e in g3.edges() {
            let lower = g3.point_of(e.lower);
            assert_eq!(scheme(2).cell_of(&g3, e), brute_cell(2, &lower, e.axis as usize));
        }
    }

    #[test]
    fn cells_partition_edges_and_cover_points() {
        let g = LatticeBox::new(vec![7, 6], vec![-3, -2]).unwrap();
        let s = scheme(2);
        let mut by_cell: BTreeMap<MesoIndex, Vec<usize>> = BTreeMap::new();
        for (i, e) in g.edges().enumerate() {
            by_cell.entry(s.cell_of(&g, e)).or_default().push(i);
        }
        assert_eq!(by_cell.values().map(Vec::len).sum::<usize>(), g.edge_count());
        let mut covered = BTreeSet::new();
        for (k, edges) in &by_cell {
            let pts: BTreeSet<usize> = s.point_indices_of_cell(&g, k).unwrap().into_iter().collect();
            let expect: BTreeSet<usize> = edges
                .iter()
                .flat_map(|&e| {
                    let r = g.edge_ref(e).unwrap();
                    [r.lower, r.lower + g.strides()[r.axis as usize]]
                })
                .collect();
            assert_eq!(pts, expect);
            covered.extend(pts);
        }
        assert_eq!(covered.len(), g.vertex_count());
    }

    #[test]
    fn single_cell_when_t_is_large() {
        let g = LatticeBox::new(vec![5, 5], vec![-2, -2]).unwrap();
        let s = scheme(64);
        let pts = s.point_indices_of_cell(&g, &[0, 0]).unwrap();
        assert_eq!(pts.len(), g.vertex_count());
    }

    #[test]
    fn boundary_vertices_in_several_cells() {
        let g = LatticeBox::new(vec![5, 5], vec![0, 0]).unwrap();
        let s = scheme(2);
        let v = g.index_of(&[1, 1]).unwrap();
        assert!(s.cells_of_vertex(&g, v).len() >= 2);
        let multi = (0..g.vertex_count()).filter(|&v| s.cells_of_vertex(&g, v).len() >= 2).count();
        assert!(multi > 0);
    }

    #[test]
    fn star_adjacency() {
        assert!(star_adjacent(&[0, 0], &[1, 1]).unwrap());
        assert!(!star_adjacent(&[0, 0], &[0, 0]).unwrap());
        assert!(!star_adjacent(&[0, 0], &[2, 0]).unwrap());
        assert!(star_adjacent(&[0, 0], &[0]).is_err());
    }

    #[test]
    fn scheme_validation() {
        assert!(RenormScheme::new(4, 16.0, 4.0).is_err());
        assert!(RenormScheme::new(4, 17.0, 4.0).is_ok());
        assert!(RenormScheme::new(0, 17.0, 4.0).is_err());
        assert!(RenormScheme::new(4, 17.0f32, 0.5).is_err());
    }
}
