//! Replicate sampling of `D*(0, y)` along a direction and over an ℓ1 ball.

use rayon::prelude::*;
use serde::Serialize;

use crate::chemdist::Bfs;
use crate::clusters::{label_clusters, nearest_giant_index};
use crate::error::{Error, Result};
use crate::lattice::rng::derive_seed;
use crate::lattice::{EdgeConfiguration, LatticeBox, Point};
use crate::scalar::Scalar;

use super::htable::{HEntry, HTable};

pub const MIN_REPLICATES: usize = 30;
/// Largest tolerated fraction of replicates without a usable giant proxy.
pub const MAX_EXCLUSION: f64 = 0.10;

const STREAM_DIRECTION: u64 = 0x48;
const STREAM_BALL: u64 = 0x42;

/// Box sizing for `D*(0, y)` estimates: a centered cube whose side is three
/// times the ℓ1 reach plus four hole margins, so every target keeps at least
/// half its reach between itself and the nearest face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxPolicy {
    pub hole_margin: usize,
}

impl Default for BoxPolicy {
    fn default() -> Self {
        BoxPolicy { hole_margin: 4 }
    }
}

impl BoxPolicy {
    pub fn side(&self, reach: u64) -> usize {
        (3 * reach as usize + 4 * self.hole_margin).max(8)
    }

    pub fn geometry(&self, d: usize, reach: u64) -> Result<LatticeBox> {
        LatticeBox::centered(d, self.side(reach))
    }
}

/// Per-replicate values of `D*(0, n·y)` over a schedule of `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSamples {
    pub direction: Point,
    pub ns: Vec<u64>,
    /// One row per accepted replicate, one column per `n`.
    pub rows: Vec<Vec<f64>>,
    pub excluded: usize,
    pub attempted: usize,
    pub side: usize,
}

impl DirectionSamples {
    /// Regenerate the configuration of replicate `r` (sampled runs only).
    pub fn replicate_config(&self, p: f64, seed: u64, r: u64) -> Result<EdgeConfiguration> {
        EdgeConfiguration::sample(
            LatticeBox::centered(self.direction.len(), self.side)?,
            p,
            derive_seed(seed, STREAM_DIRECTION, r),
        )
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    pub fn table<T: Scalar>(&self) -> HTable<T> {
        let mut t = HTable::new();
        for (i, &n) in self.ns.iter().enumerate() {
            let y = self.direction.iter().map(|&c| c * n as i64).collect();
            t.insert_samples(y, &self.column(i));
        }
        t.excluded = self.excluded;
        t.attempted = self.attempted;
        t
    }
}

pub(crate) fn check_schedule(ns: &[u64]) -> Result<()> {
    if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(format!("schedule must be positive and strictly increasing: {ns:?}")));
    }
    Ok(())
}

pub(crate) fn check_exclusion(excluded: usize, attempted: usize) -> Result<()> {
    if excluded as f64 > MAX_EXCLUSION * attempted as f64 {
        return Err(Error::DataQuality(format!("{excluded} of {attempted} replicates had no usable giant cluster")));
    }
    Ok(())
}

/// `D*(0, ·)` at the given linear indices, or `None` when the giant proxy is unusable.
pub(crate) fn star_distances(config: &EdgeConfiguration, bfs: &mut Bfs, targets: &[usize]) -> Result<Option<Vec<u64>>> {
    let g = config.geometry();
    let lab = label_clusters(config);
    if !lab.is_valid() {
        return Ok(None);
    }
    let src = nearest_giant_index(&lab, g, g.index_of(&vec![0; g.dim()])?)?;
    bfs.run(config, src, None, None);
    targets
        .iter()
        .map(|&v| {
            let t = nearest_giant_index(&lab, g, v)?;
            bfs.distance(t)
                .finite()
                .ok_or_else(|| Error::Structural("projections onto the giant proxy are disconnected".into()))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Independent replicates of `D*(0, n·y)` for every `n` of the schedule, all
/// read off one configuration per replicate.
pub fn sample_direction(
    y: &[i64],
    ns: &[u64],
    p: f64,
    replicates: usize,
    seed: u64,
    policy: BoxPolicy,
) -> Result<DirectionSamples> {
    check_schedule(ns)?;
    if y.iter().all(|&c| c == 0) {
        return Err(Error::Domain("zero direction".into()));
    }
    if replicates < MIN_REPLICATES {
        return Err(Error::Insufficient(format!("{replicates} replicates, need {MIN_REPLICATES}")));
    }
    let reach = ns[ns.len() - 1] * LatticeBox::l1(y, &vec![0; y.len()]);
    let g = policy.geometry(y.len(), reach)?;
    let targets: Vec<usize> =
        ns.iter().map(|&n| g.index_of(&y.iter().map(|&c| c * n as i64).collect::<Vec<_>>())).collect::<Result<_>>()?;
    let results: Vec<Option<Vec<u64>>> = (0..replicates as u64)
        .into_par_iter()
        .map_init(Bfs::new, |bfs, r| {
            let config = EdgeConfiguration::sample(g.clone(), p, derive_seed(seed, STREAM_DIRECTION, r))?;
            star_distances(&config, bfs, &targets)
        })
        .collect::<Result<_>>()?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    check_exclusion(excluded, replicates)?;
    Ok(DirectionSamples {
        direction: y.to_vec(),
        ns: ns.to_vec(),
        rows: results.into_iter().flatten().map(|r| r.into_iter().map(|v| v as f64).collect()).collect(),
        excluded,
        attempted: replicates,
        side: g.sides()[0],
    })
}

/// Table of `h(n·y)` for the schedule.
pub fn estimate_h<T: Scalar>(
    y: &[i64],
    ns: &[u64],
    p: f64,
    replicates: usize,
    seed: u64,
    policy: BoxPolicy,
) -> Result<HTable<T>> {
    Ok(sample_direction(y, ns, p, replicates, seed, policy)?.table())
}

/// Nonzero `y` with `‖y‖₁ ≤ radius`, in lexicographic order.
pub fn l1_ball(d: usize, radius: u64) -> Vec<Point> {
    let r = radius as i64;
    let mut out = Vec::new();
    let mut y = vec![-r; d];
    loop {
        let norm: i64 = y.iter().map(|c| c.abs()).sum();
        if norm <= r && norm > 0 {
            out.push(y.clone());
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if y[axis] < r {
                y[axis] += 1;
                break;
            }
            y[axis] = -r;
        }
    }
}

/// Table of `h(y)` for every `y` in the ℓ1 ball, from one breadth-first search per replicate.
pub fn estimate_h_ball<T: Scalar>(
    d: usize,
    radius: u64,
    p: f64,
    replicates: usize,
    seed: u64,
    policy: BoxPolicy,
) -> Result<HTable<T>> {
    if replicates < MIN_REPLICATES {
        return Err(Error::Insufficient(format!("{replicates} replicates, need {MIN_REPLICATES}")));
    }
    let g = policy.geometry(d, radius)?;
    let ball = l1_ball(d, radius);
    let targets: Vec<usize> = ball.iter().map(|y| g.index_of(y)).collect::<Result<_>>()?;
    let results: Vec<Option<Vec<u64>>> = (0..replicates as u64)
        .into_par_iter()
        .map_init(Bfs::new, |bfs, r| {
            let config = EdgeConfiguration::sample(g.clone(), p, derive_seed(seed, STREAM_BALL, r))?;
            star_distances(&config, bfs, &targets)
        })
        .collect::<Result<_>>()?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    check_exclusion(excluded, replicates)?;
    let rows: Vec<Vec<u64>> = results.into_iter().flatten().collect();
    let n = rows.len();
    let mut table = HTable::new();
    for (i, y) in ball.into_iter().enumerate() {
        let (mut s, mut s2) = (0f64, 0f64);
        for r in &rows {
            let v = r[i] as f64;
            s += v;
            s2 += v * v;
        }
        let mean = s / n as f64;
        let var = if n > 1 { ((s2 - n as f64 * mean * mean) / (n - 1) as f64).max(0.0) } else { 0.0 };
        table.insert(y, HEntry { mean: T::lit(mean), stderr: T::lit((var / n as f64).sqrt()), count: n });
    }
    table.excluded = excluded;
    table.attempted = replicates;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subadd::HFunction;

    #[test]
    fn full_percolation_gives_l1() {
        let t: HTable<f64> = estimate_h(&[2, 1], &[1, 2, 5], 1.0, 30, 9, BoxPolicy::default()).unwrap();
        for (y, e) in t.iter() {
            assert_eq!(e.mean, (y[0].abs() + y[1].abs()) as f64);
            assert_eq!(e.stderr, 0.0);
        }
        assert_eq!(t.h(&[0, 0]), Some(0.0));
        assert_eq!(t.excluded, 0);
    }

    #[test]
    fn validation() {
        let pol = BoxPolicy::default();
        assert!(matches!(sample_direction(&[1, 0], &[1, 2], 0.7, 29, 0, pol), Err(Error::Insufficient(_))));
        assert!(matches!(sample_direction(&[1, 0], &[2, 2], 0.7, 30, 0, pol), Err(Error::Domain(_))));
        assert!(matches!(sample_direction(&[0, 0], &[2], 0.7, 30, 0, pol), Err(Error::Domain(_))));
        // Subcritical: the crossing cluster rarely exists.
        assert!(matches!(sample_direction(&[1, 0], &[4], 0.3, 30, 0, pol), Err(Error::DataQuality(_))));
    }

    #[test]
    fn ball_enumeration() {
        let b = l1_ball(2, 2);
        assert_eq!(b.len(), 12);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(l1_ball(3, 1).len(), 6);
    }

    #[test]
    fn ball_table_bounds_and_determinism() {
        let a: HTable<f64> = estimate_h_ball(2, 4, 0.7, 30, 3, BoxPolicy::default()).unwrap();
        let b: HTable<f64> = estimate_h_ball(2, 4, 0.7, 30, 3, BoxPolicy::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.below_l1().is_empty());
        let full: HTable<f64> = estimate_h_ball(2, 4, 1.0, 30, 3, BoxPolicy::default()).unwrap();
        assert!(full.iter().all(|(y, e)| e.mean == (y[0].abs() + y[1].abs()) as f64));
    }

    #[test]
    fn mean_at_moderate_scale_is_bracketed() {
        let s = sample_direction(&[1, 0], &[32], 0.7, 100, 17, BoxPolicy::default()).unwrap();
        let t: HTable<f64> = s.table();
        let e = t.get(&[32, 0]).unwrap();
        assert!(e.mean >= 32.0 && e.mean < 2.0 * 32.0, "{e:?}");
        assert!(e.stderr > 0.0);
    }
}
