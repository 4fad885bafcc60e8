//! Greedy `Q_x`-skeletons of lattice paths.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Point;
use crate::scalar::Scalar;

use super::qx::{Membership, QxSet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Skeleton {
    /// Positions `u_i` along the path.
    pub indices: Vec<usize>,
    pub points: Vec<Point>,
    /// Membership queries that could not be decided (treated as outside).
    pub indeterminate: usize,
}

fn diff(a: &[i64], b: &[i64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `u_0 = 0`; each `u_{i+1}` is the last index before the increment from
/// `γ(u_i)` first leaves the set (or the path end).
pub fn extract_skeleton(path: &[Point], mut member: impl FnMut(&[i64]) -> Membership) -> Result<Skeleton> {
    if path.is_empty() {
        return Err(Error::Domain("empty path".into()));
    }
    let n = path.len() - 1;
    let mut indices = vec![0];
    let mut indeterminate = 0;
    let mut ask = |y: &[i64]| {
        let m = member(y);
        if m == Membership::Indeterminate {
            indeterminate += 1;
        }
        m.is_member()
    };
    let mut u = 0;
    while u < n {
        if !ask(&diff(&path[u + 1], &path[u])) {
            return Err(Error::Structural(format!("step {u}→{} leaves the set", u + 1)));
        }
        let mut j = u + 1;
        while j < n && ask(&diff(&path[j + 1], &path[u])) {
            j += 1;
        }
        indices.push(j);
        u = j;
    }
    Ok(Skeleton { points: indices.iter().map(|&i| path[i].clone()).collect(), indices, indeterminate })
}

impl Skeleton {
    pub fn vertex_count(&self) -> usize {
        self.indices.len()
    }

    pub fn increments(&self) -> Vec<Point> {
        self.points.windows(2).map(|w| diff(&w[1], &w[0])).collect()
    }

    /// Verify both defining clauses against `path`.
    pub fn check(&self, path: &[Point], mut member: impl FnMut(&[i64]) -> Membership) -> Result<()> {
        let fail = |m: String| Err(Error::Structural(m));
        let n = path.len().saturating_sub(1);
        if self.indices.first() != Some(&0) || self.indices.last() != Some(&n) {
            return fail(format!("skeleton must run from 0 to {n}"));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return fail("indices not increasing".into());
        }
        for (i, &u) in self.indices.iter().enumerate() {
            if self.points[i] != path[u] {
                return fail(format!("point {i} is not γ({u})"));
            }
        }
        for w in self.indices.windows(2) {
            let (u, v) = (w[0], w[1]);
            for j in u + 1..=v {
                if !member(&diff(&path[j], &path[u])).is_member() {
                    return fail(format!("γ({j}) − γ({u}) outside the set"));
                }
            }
            if v < n && member(&diff(&path[v + 1], &path[u])).is_member() {
                return fail(format!("γ({}) − γ({u}) is still inside the set", v + 1));
            }
        }
        Ok(())
    }

    /// Length of the `Q_x`-path `start, skeleton…, end`: the skeleton plus
    /// each endpoint that differs from the nearest skeleton vertex.
    pub fn path_count(&self, start: &[i64], end: &[i64]) -> usize {
        let first = self.points.first().map(|p| p.as_slice());
        let last = self.points.last().map(|p| p.as_slice());
        self.vertex_count() + usize::from(first != Some(start)) + usize::from(last != Some(end))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub short: usize,
    pub long: usize,
    /// One flag per increment, `true` for long.
    pub long_flags: Vec<bool>,
}

/// Split skeleton increments into long (adjacent to `{μ_x > μ̂(x)}`) and short.
pub fn classify_increments<T: Scalar>(q: &QxSet<'_, T>, skeleton: &Skeleton) -> Classification {
    let long_flags: Vec<bool> = skeleton.increments().iter().map(|y| q.is_long(y)).collect();
    let long = long_flags.iter().filter(|&&b| b).count();
    Classification { short: long_flags.len() - long, long, long_flags }
}
