//! Polytope norm built from direction estimates, and its supporting linear forms.
//!
//! The unit ball is the convex hull of the symmetric cloud `{±y/μ̂(y)}`. Each
//! facet is stored as the vector `a` with `⟨a, v⟩ = 1` on the facet, so the
//! gauge is `μ̂(z) = max_a ⟨a, z⟩`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `μ̂(y)` for one lattice direction with a confidence interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate<T: Scalar> {
    pub direction: Vec<i64>,
    pub mu: T,
    pub ci: (T, T),
}

impl<T: Scalar> DirectionEstimate<T> {
    pub fn exact(direction: Vec<i64>, mu: T) -> Self {
        DirectionEstimate { direction, mu, ci: (mu, mu) }
    }

    pub fn half_width(&self) -> T {
        (self.ci.1 - self.ci.0) / T::lit(2.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate<T: Scalar> {
    dim: usize,
    directions: Vec<DirectionEstimate<T>>,
    vertices: Vec<Vec<T>>,
    facets: Vec<Vec<T>>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn to_real<T: Scalar>(y: &[i64]) -> Vec<T> {
    y.iter().map(|&c| T::lit(c as f64)).collect()
}

/// Solve `m x = rhs` by Gaussian elimination with partial pivoting; `None` when singular.
fn solve<T: Scalar>(mut m: Vec<Vec<T>>, mut rhs: Vec<T>) -> Option<Vec<T>> {
    let n = rhs.len();
    let scale = m.iter().flatten().fold(T::zero(), |a, &b| a.max(b.abs()));
    let eps = T::tolerance() * scale.max(T::one());
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() <= eps {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                let v = m[col][k];
                m[row][k] = m[row][k] - f * v;
            }
            rhs[row] = rhs[row] - f * rhs[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s: T = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    Some(x)
}

fn rank<T: Scalar>(rows: &[Vec<T>], d: usize) -> usize {
    let mut m: Vec<Vec<T>> = rows.to_vec();
    let scale = m.iter().flatten().fold(T::zero(), |a, &b| a.max(b.abs()));
    let eps = T::tolerance() * scale.max(T::one());
    let mut r = 0;
    for col in 0..d {
        let Some(piv) = (r..m.len()).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()) else {
            break;
        };
        if m[piv][col].abs() <= eps {
            continue;
        }
        m.swap(r, piv);
        for row in r + 1..m.len() {
            let f = m[row][col] / m[r][col];
            for k in col..d {
                let v = m[r][k];
                m[row][k] = m[row][k] - f * v;
            }
        }
        r += 1;
    }
    r
}

/// All signed permutations of `y` (the symmetries of Z^d), deduplicated.
pub fn lattice_images(y: &[i64]) -> Vec<Vec<i64>> {
    let d = y.len();
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..d {
        perms = perms
            .into_iter()
            .flat_map(|p| {
                (0..d)
                    .filter(|i| !p.contains(i))
                    .map(|i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    let mut out: Vec<Vec<i64>> = Vec::new();
    for p in &perms {
        for signs in 0..(1u32 << d) {
            let img: Vec<i64> = (0..d).map(|i| if signs >> i & 1 == 1 { -y[p[i]] } else { y[p[i]] }).collect();
            out.push(img);
        }
    }
    out.sort();
    out.dedup();
    out
}

impl<T: Scalar> NormEstimate<T> {
    /// Hull of `±y/μ̂(y)`. With `lattice_symmetric`, each estimate is also
    /// applied to every signed permutation of its direction.
    pub fn build(estimates: &[DirectionEstimate<T>], lattice_symmetric: bool) -> Result<Self> {
        let Some(first) = estimates.first() else {
            return Err(Error::Domain("no direction estimates".into()));
        };
        let dim = first.direction.len();
        if estimates.iter().any(|e| e.direction.len() != dim) {
            return Err(Error::Domain("directions differ in dimension".into()));
        }
        if let Some(bad) = estimates.iter().find(|e| !(e.mu > T::zero()) || e.direction.iter().all(|&c| c == 0)) {
            return Err(Error::Domain(format!("invalid estimate for {:?}: mu = {}", bad.direction, bad.mu)));
        }
        let mut expanded: Vec<DirectionEstimate<T>> = Vec::new();
        for e in estimates {
            let images = if lattice_symmetric { lattice_images(&e.direction) } else { vec![e.direction.clone()] };
            for y in images {
                let neg: Vec<i64> = y.iter().map(|c| -c).collect();
                for dir in [y, neg] {
                    if !expanded.iter().any(|x| x.direction == dir) {
                        expanded.push(DirectionEstimate { direction: dir, mu: e.mu, ci: e.ci });
                    }
                }
            }
        }
        let vertices: Vec<Vec<T>> =
            expanded.iter().map(|e| to_real::<T>(&e.direction).into_iter().map(|c| c / e.mu).collect()).collect();
        if rank(&vertices, dim) < dim {
            return Err(Error::Domain("directions do not span the space".into()));
        }
        let facets = facets_of(&vertices, dim);
        if facets.is_empty() {
            return Err(Error::Domain("degenerate hull".into()));
        }
        Ok(NormEstimate { dim, directions: estimates.to_vec(), vertices, facets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> &[DirectionEstimate<T>] {
        &self.directions
    }

    /// Facet vectors `a`, `⟨a, v⟩ = 1` on the facet.
    pub fn facets(&self) -> &[Vec<T>] {
        &self.facets
    }

    /// Points `±y/μ̂(y)` spanning the unit ball.
    pub fn hull_points(&self) -> &[Vec<T>] {
        &self.vertices
    }

    pub fn eval(&self, z: &[T]) -> T {
        self.facets.iter().map(|a| dot(a, z)).fold(T::zero(), |m, v| m.max(v))
    }

    pub fn eval_lattice(&self, z: &[i64]) -> T {
        self.eval(&to_real::<T>(z))
    }

    /// Largest relative half-width among the direction estimates.
    pub fn relative_uncertainty(&self) -> T {
        self.directions.iter().map(|e| e.half_width() / e.mu).fold(T::zero(), |m, v| m.max(v))
    }

    /// Supporting linear form at `x`: a facet through `x/μ̂(x)`; among several,
    /// the lexicographically greatest facet vector.
    pub fn support_functional(&self, x: &[T]) -> Result<SupportFunctional<T>> {
        let mu = self.eval(x);
        if !(mu > T::zero()) {
            return Err(Error::Domain("supporting functional at the origin".into()));
        }
        let tol = T::lit(1e3) * T::tolerance() * mu;
        let best = self
            .facets
            .iter()
            .filter(|a| dot(a, x) >= mu - tol)
            .max_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal))
            .expect("the maximizing facet contains x/mu(x)");
        let scale = mu / dot(best, x);
        Ok(SupportFunctional { normal: best.clone(), scale, at: x.to_vec(), norm_at: mu })
    }

    pub fn support_functional_lattice(&self, x: &[i64]) -> Result<SupportFunctional<T>> {
        self.support_functional(&to_real::<T>(x))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "percolab.norm/1",
            "dim": self.dim,
            "directions": self.directions.iter().map(|e| serde_json::json!({
                "y": e.direction,
                "mu": e.mu.to_string(),
                "ci": [e.ci.0.to_string(), e.ci.1.to_string()],
            })).collect::<Vec<_>>(),
            "facets": self.facets.iter().map(|a| a.iter().map(|c| c.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "lattice_symmetric": self.vertices.len() > 2 * self.directions.len(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::Domain(format!("norm JSON: {m}"));
        if v["schema"] != "percolab.norm/1" {
            return Err(bad("unknown schema"));
        }
        let num = |x: &serde_json::Value| -> Result<T> {
            x.as_str().and_then(|s| s.parse::<f64>().ok()).map(T::lit).ok_or_else(|| bad("expected a decimal string"))
        };
        let mut est = Vec::new();
        for e in v["directions"].as_array().ok_or_else(|| bad("directions"))? {
            let y: Vec<i64> = serde_json::from_value(e["y"].clone()).map_err(|_| bad("y"))?;
            est.push(DirectionEstimate {
                direction: y,
                mu: num(&e["mu"])?,
                ci: (num(&e["ci"][0])?, num(&e["ci"][1])?),
            });
        }
        Self::build(&est, v["lattice_symmetric"].as_bool().unwrap_or(false))
    }
}

fn facets_of<T: Scalar>(points: &[Vec<T>], d: usize) -> Vec<Vec<T>> {
    let n = points.len();
    let tol = T::lit(1e3) * T::tolerance();
    let mut facets: Vec<Vec<T>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    if n < d {
        return facets;
    }
    loop {
        let m: Vec<Vec<T>> = idx.iter().map(|&i| points[i].clone()).collect();
        if let Some(a) = solve(m, vec![T::one(); d]) {
            let supporting = points.iter().all(|p| dot(&a, p) <= T::one() + tol);
            if supporting && !facets.iter().any(|f| f.iter().zip(&a).all(|(x, y)| (*x - *y).abs() <= tol)) {
                facets.push(a);
            }
        }
        // next combination
        let mut i = d;
        loop {
            if i == 0 {
                facets.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                return facets;
            }
            i -= 1;
            if idx[i] < n - d + i {
                idx[i] += 1;
                for j in i + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Linear form `y ↦ scale · ⟨normal, y⟩` supporting the ball of radius `μ̂(x)` at `x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportFunctional<T: Scalar> {
    pub normal: Vec<T>,
    pub scale: T,
    pub at: Vec<T>,
    /// `μ̂(x)`.
    pub norm_at: T,
}

impl<T: Scalar> SupportFunctional<T> {
    pub fn eval(&self, y: &[T]) -> T {
        self.scale * dot(&self.normal, y)
    }

    pub fn eval_lattice(&self, y: &[i64]) -> T {
        self.eval(&to_real::<T>(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::rng::SplitMix;

    fn l1_norm(d: usize) -> NormEstimate<f64> {
        let est: Vec<_> = (0..d)
            .map(|i| {
                let mut y = vec![0; d];
                y[i] = 1;
                DirectionEstimate::exact(y, 1.0)
            })
            .collect();
        NormEstimate::build(&est, false).unwrap()
    }

    fn sample_norm() -> NormEstimate<f64> {
        let est = vec![
            DirectionEstimate::exact(vec![1, 0], 1.12),
            DirectionEstimate::exact(vec![1, 1], 2.05),
            DirectionEstimate::exact(vec![2, 1], 3.2),
        ];
        NormEstimate::build(&est, true).unwrap()
    }

    #[test]
    fn cross_polytope_recovers_l1() {
        for d in [2, 3] {
            let n = l1_norm(d);
            assert_eq!(n.facets().len(), 1 << d);
            let mut rng = SplitMix::new(d as u64);
            for _ in 0..200 {
                let z: Vec<i64> = (0..d).map(|_| rng.below(21) as i64 - 10).collect();
                let l1: i64 = z.iter().map(|c| c.abs()).sum();
                assert!((n.eval_lattice(&z) - l1 as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn norm_axioms() {
        let n = sample_norm();
        let mut rng = SplitMix::new(7);
        let r = |rng: &mut SplitMix| (0..2).map(|_| rng.next_f64() * 20.0 - 10.0).collect::<Vec<f64>>();
        for _ in 0..1000 {
            let (a, b) = (r(&mut rng), r(&mut rng));
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            assert!(n.eval(&sum) <= n.eval(&a) + n.eval(&b) + 1e-9);
            let neg: Vec<f64> = a.iter().map(|x| -x).collect();
            assert_eq!(n.eval(&neg), n.eval(&a));
            let tri: Vec<f64> = a.iter().map(|x| 3.0 * x).collect();
            assert!((n.eval(&tri) - 3.0 * n.eval(&a)).abs() <= 1e-9 * n.eval(&tri).max(1.0));
            assert!(n.eval(&a) > 0.0);
        }
        assert!((n.eval_lattice(&[2, 0]) - 2.24).abs() < 1e-9);
        assert!((n.eval_lattice(&[0, -1]) - 1.12).abs() < 1e-9);
    }

    #[test]
    fn support_functional_at_l1_vertex() {
        let n = l1_norm(2);
        let f = n.support_functional(&[1.0, 0.0]).unwrap();
        assert_eq!(f.normal, vec![1.0, 1.0]);
        assert_eq!(f.eval(&[1.0, 0.0]), 1.0);
        assert_eq!(f.eval_lattice(&[3, 1]), 4.0);
        assert!(n.support_functional(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn support_functional_laws() {
        let n = sample_norm();
        let mut rng = SplitMix::new(11);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.below(41) as f64 - 20.0).collect();
            if x.iter().all(|&c| c == 0.0) {
                continue;
            }
            let f = n.support_functional(&x).unwrap();
            let mx = n.eval(&x);
            assert!((f.eval(&x) - mx).abs() <= 1e-9 * mx);
            for v in n.hull_points() {
                let scaled: Vec<f64> = v.iter().map(|c| c * mx).collect();
                assert!(f.eval(&scaled) <= mx + 1e-9 * mx);
            }
            for _ in 0..10 {
                let y: Vec<f64> = (0..2).map(|_| rng.next_f64() * 40.0 - 20.0).collect();
                assert!(f.eval(&y).abs() <= n.eval(&y) + 1e-9 * n.eval(&y).max(1.0));
            }
        }
    }

    #[test]
    fn degenerate_inputs() {
        let est = vec![DirectionEstimate::exact(vec![1, 1], 2.0), DirectionEstimate::exact(vec![2, 2], 4.0)];
        assert!(matches!(NormEstimate::build(&est, false), Err(Error::Domain(_))));
        assert!(NormEstimate::<f64>::build(&[], false).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let n = sample_norm();
        let back = NormEstimate::<f64>::from_json(&n.to_json()).unwrap();
        for z in [[3i64, -2], [0, 5], [7, 7]] {
            assert!((back.eval_lattice(&z) - n.eval_lattice(&z)).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_instantiation() {
        let est = vec![DirectionEstimate::exact(vec![1, 0], 1.0f32), DirectionEstimate::exact(vec![0, 1], 1.0)];
        let n = NormEstimate::build(&est, false).unwrap();
        assert!((n.eval(&[2.0, -3.0]) - 5.0).abs() < 1e-5);
    }

    #[test]
    fn lattice_images_of_axis_and_diagonal() {
        assert_eq!(lattice_images(&[1, 0]).len(), 4);
        assert_eq!(lattice_images(&[1, 1]).len(), 4);
        assert_eq!(lattice_images(&[2, 1]).len(), 8);
        assert_eq!(lattice_images(&[1, 0, 0]).len(), 6);
    }
}
