use super::rng::keyed_uniform;
use super::{EdgeRef, LatticeBox, Point};
use crate::error::{Error, Result};

/// Open/closed state of every edge of a [`LatticeBox`], with its sampling provenance.
///
/// Storage is one flag byte per vertex: bit `a` is set when the edge towards
/// `v + e_a` is open. Canonical bit order is recovered on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeConfiguration {
    geometry: LatticeBox,
    p: f64,
    seed: u64,
    forward_open: Vec<u8>,
}

impl EdgeConfiguration {
    /// Edge `e` (canonical index) is open iff `keyed_uniform(seed, e) < p`.
    pub fn sample(geometry: LatticeBox, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        let mut forward_open = vec![0u8; geometry.vertex_count()];
        let mut e = 0u64;
        for_each_edge(&geometry, |v, axis| {
            if keyed_uniform(seed, e) < p {
                forward_open[v] |= 1 << axis;
            }
            e += 1;
        });
        Ok(EdgeConfiguration { geometry, p, seed, forward_open })
    }

    /// Configuration with exactly the listed canonical edges open. Provenance is `p = 0, seed = 0`.
    pub fn from_open_edges(geometry: LatticeBox, open: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut cfg = EdgeConfiguration { forward_open: vec![0u8; geometry.vertex_count()], geometry, p: 0.0, seed: 0 };
        for e in open {
            cfg.set_open(e, true)?;
        }
        Ok(cfg)
    }

    /// Configuration from endpoint pairs of unit-length edges.
    pub fn from_open_pairs(geometry: LatticeBox, pairs: &[(Point, Point)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len());
        for (a, b) in pairs {
            let (lo, axis) = unit_step(a, b)?;
            edges.push(geometry.edge_index_of(lo, axis)?);
        }
        Self::from_open_edges(geometry, edges)
    }

    pub(crate) fn from_parts(geometry: LatticeBox, p: f64, seed: u64, bits: impl Iterator<Item = bool>) -> Self {
        let mut forward_open = vec![0u8; geometry.vertex_count()];
        let mut bits = bits;
        for_each_edge(&geometry, |v, axis| {
            if bits.next().unwrap_or(false) {
                forward_open[v] |= 1 << axis;
            }
        });
        EdgeConfiguration { geometry, p, seed, forward_open }
    }

    pub fn geometry(&self) -> &LatticeBox {
        &self.geometry
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn is_open_ref(&self, e: EdgeRef) -> bool {
        self.forward_open[e.lower] >> e.axis & 1 == 1
    }

    pub fn is_open(&self, edge_index: usize) -> Result<bool> {
        Ok(self.is_open_ref(self.geometry.edge_ref(edge_index)?))
    }

    /// Flag byte of forward-open edges at vertex `v`.
    #[inline]
    pub fn forward_flags(&self, v: usize) -> u8 {
        self.forward_open[v]
    }

    pub fn set_open(&mut self, edge_index: usize, open: bool) -> Result<()> {
        let e = self.geometry.edge_ref(edge_index)?;
        self.set_open_ref(e, open);
        Ok(())
    }

    #[inline]
    pub fn set_open_ref(&mut self, e: EdgeRef, open: bool) {
        if open {
            self.forward_open[e.lower] |= 1 << e.axis;
        } else {
            self.forward_open[e.lower] &= !(1 << e.axis);
        }
    }

    /// Open bits in canonical edge order.
    pub fn canonical_bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.geometry.edges().map(move |e| self.is_open_ref(e))
    }

    pub fn open_edge_count(&self) -> usize {
        self.forward_open.iter().map(|f| f.count_ones() as usize).sum()
    }

    /// Visit open neighbors of `v` as `(neighbor, edge)`, in ascending canonical edge order.
    #[inline]
    pub fn for_each_open_neighbor(&self, v: usize, mut f: impl FnMut(usize, EdgeRef)) {
        let g = &self.geometry;
        let d = g.dim();
        // edges (v - e_a, v) have lower endpoint < v, so they come first,
        // ordered by decreasing stride, i.e. increasing axis
        for a in 0..d {
            if let Some(u) = g.neighbor(v, a, false) {
                if self.forward_open[u] >> a & 1 == 1 {
                    f(u, EdgeRef { lower: u, axis: a as u8 });
                }
            }
        }
        let flags = self.forward_open[v];
        for a in 0..d {
            if flags >> a & 1 == 1 {
                f(v + g.strides()[a], EdgeRef { lower: v, axis: a as u8 });
            }
        }
    }
}

/// Lower endpoint and axis of a unit step between `a` and `b`.
pub(crate) fn unit_step<'a>(a: &'a [i64], b: &'a [i64]) -> Result<(&'a [i64], usize)> {
    if a.len() != b.len() {
        return Err(Error::Domain("endpoint dimensions differ".into()));
    }
    let diffs: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    match diffs.as_slice() {
        [i] if a[*i].abs_diff(b[*i]) == 1 => Ok(if a[*i] < b[*i] { (a, *i) } else { (b, *i) }),
        _ => Err(Error::Domain(format!("{a:?} and {b:?} are not lattice neighbors"))),
    }
}

/// Visit `(vertex, axis)` for every edge in canonical order without decoding coordinates.
pub(crate) fn for_each_edge(g: &LatticeBox, mut f: impl FnMut(usize, usize)) {
    let d = g.dim();
    let sides = g.sides();
    let mut local = vec![0usize; d];
    for v in 0..g.vertex_count() {
        for a in 0..d {
            if local[a] + 1 < sides[a] {
                f(v, a);
            }
        }
        let mut i = d;
        while i > 0 {
            i -= 1;
            local[i] += 1;
            if local[i] < sides[i] {
                break;
            }
            local[i] = 0;
        }
    }
}
