//! Empirical GAP certificate: `μ̂(x) ≤ ĥ(x) ≤ μ̂(x) + C‖x‖₁^{1/2} log‖x‖₁` for `‖x‖₁ ≥ M`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::rng::SplitMix;
use crate::lattice::{LatticeBox, Point};
use crate::scalar::Scalar;
use crate::stats::quantile;

use super::htable::HTable;
use super::norm::NormEstimate;
use super::qx::gap_allowance;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow<T: Scalar> {
    pub x: Point,
    pub h: T,
    pub mu: T,
    /// Half-width combining the norm uncertainty and the stderr of `ĥ`.
    pub ci: T,
    pub below: bool,
    pub above: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport<T: Scalar> {
    pub threshold: u64,
    pub constant: T,
    pub rows: Vec<GapRow<T>>,
    /// Smallest `C ≥ 0` clearing every upper check.
    pub minimal_constant: T,
    pub minimal_constant_ci: Option<(T, T)>,
    pub passes: bool,
}

impl<T: Scalar> GapReport<T> {
    pub fn violations(&self) -> impl Iterator<Item = &GapRow<T>> {
        self.rows.iter().filter(|r| r.below || r.above)
    }
}

struct Eligible<T: Scalar> {
    x: Point,
    h: T,
    se: T,
    mu: T,
    ci: T,
    unit: T,
}

fn eligible<T: Scalar>(norm: &NormEstimate<T>, table: &HTable<T>, threshold: u64) -> Result<Vec<Eligible<T>>> {
    let rel = norm.relative_uncertainty();
    let z = T::lit(1.96);
    let rows: Vec<Eligible<T>> = table
        .iter()
        .filter_map(|(x, e)| {
            let l1 = LatticeBox::l1(x, &vec![0; x.len()]);
            (l1 >= threshold.max(2)).then(|| {
                let mu = norm.eval_lattice(x);
                Eligible {
                    x: x.clone(),
                    h: e.mean,
                    se: e.stderr,
                    mu,
                    ci: rel * mu + z * e.stderr,
                    unit: gap_allowance(T::one(), l1),
                }
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::Insufficient(format!("no stored vector with ‖x‖₁ ≥ {threshold}")));
    }
    Ok(rows)
}

fn minimal<T: Scalar>(rows: &[Eligible<T>], h: impl Fn(usize) -> T) -> T {
    rows.iter().enumerate().map(|(i, r)| (h(i) - r.mu - r.ci) / r.unit).fold(T::zero(), |m, v| m.max(v))
}

/// Check every stored `x` with `‖x‖₁ ≥ threshold` at constant `c`.
pub fn gap_check<T: Scalar>(norm: &NormEstimate<T>, table: &HTable<T>, threshold: u64, c: T) -> Result<GapReport<T>> {
    let rows = eligible(norm, table, threshold)?;
    let minimal_constant = minimal(&rows, |i| rows[i].h);
    let out: Vec<GapRow<T>> = rows
        .iter()
        .map(|r| {
            let slack = T::tolerance() * r.mu.max(T::one());
            GapRow {
                x: r.x.clone(),
                h: r.h,
                mu: r.mu,
                ci: r.ci,
                below: r.h < r.mu - r.ci - slack,
                above: r.h > r.mu + c * r.unit + r.ci + slack,
            }
        })
        .collect();
    let passes = out.iter().all(|r| !r.below && !r.above);
    Ok(GapReport { threshold, constant: c, rows: out, minimal_constant, minimal_constant_ci: None, passes })
}

/// [`gap_check`] plus a parametric bootstrap interval for the minimal constant,
/// redrawing each `ĥ(x)` from a normal law with its stderr.
pub fn gap_check_with_ci<T: Scalar>(
    norm: &NormEstimate<T>,
    table: &HTable<T>,
    threshold: u64,
    c: T,
    resamples: usize,
    seed: u64,
) -> Result<GapReport<T>> {
    let mut report = gap_check(norm, table, threshold, c)?;
    let rows = eligible(norm, table, threshold)?;
    let mut rng = SplitMix::new(seed);
    let mut normal = || {
        let u1 = rng.next_f64().max(f64::MIN_POSITIVE);
        let u2 = rng.next_f64();
        T::lit((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
    };
    let draws: Vec<T> = (0..resamples)
        .map(|_| {
            let hs: Vec<T> = rows.iter().map(|r| r.h + r.se * normal()).collect();
            minimal(&rows, |i| hs[i])
        })
        .collect();
    if !draws.is_empty() {
        report.minimal_constant_ci = Some((quantile(&draws, 0.025), quantile(&draws, 0.975)));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subadd::htable::HEntry;
    use crate::subadd::norm::DirectionEstimate;

    fn setup(excess: f64) -> (NormEstimate<f64>, HTable<f64>) {
        let norm = NormEstimate::build(
            &[DirectionEstimate::exact(vec![1, 0], 1.2), DirectionEstimate::exact(vec![1, 1], 2.1)],
            true,
        )
        .unwrap();
        let mut t = HTable::new();
        for x in [[8i64, 0], [12, 5], [-9, 9], [30, 2], [3, 1]] {
            let l1 = (x[0].abs() + x[1].abs()) as u64;
            let h = norm.eval_lattice(&x) + excess * gap_allowance(1.0, l1);
            t.insert(x.to_vec(), HEntry { mean: h, stderr: 0.0, count: 100 });
        }
        (norm, t)
    }

    #[test]
    fn exact_norm_passes_everywhere() {
        let (n, t) = setup(0.0);
        for c in [1e-6, 0.1, 5.0] {
            let r = gap_check(&n, &t, 8, c).unwrap();
            assert!(r.passes);
            assert_eq!(r.rows.len(), 4);
        }
        assert_eq!(gap_check(&n, &t, 8, 0.1).unwrap().minimal_constant, 0.0);
    }

    #[test]
    fn doubled_excess_fails_at_c_passes_at_2c() {
        let c = 0.3;
        let (n, t) = setup(2.0 * c);
        assert!(!gap_check(&n, &t, 8, c).unwrap().passes);
        let r = gap_check(&n, &t, 8, 2.0 * c).unwrap();
        assert!(r.passes);
        assert!((r.minimal_constant - 2.0 * c).abs() < 1e-9);
    }

    #[test]
    fn below_norm_is_flagged() {
        let (n, t) = setup(-0.5);
        let r = gap_check(&n, &t, 8, 10.0).unwrap();
        assert!(!r.passes);
        assert!(r.violations().all(|v| v.below));
    }

    #[test]
    fn empty_eligible_set() {
        let (n, t) = setup(0.0);
        assert!(matches!(gap_check(&n, &t, 1000, 1.0), Err(Error::Insufficient(_))));
    }

    #[test]
    fn bootstrap_interval_brackets() {
        let (n, mut t) = setup(0.4);
        let rows: Vec<_> = t.iter().map(|(x, e)| (x.clone(), *e)).collect();
        for (x, e) in rows {
            t.insert(x, HEntry { stderr: 0.5, ..e });
        }
        let r = gap_check_with_ci(&n, &t, 8, 1.0, 300, 4).unwrap();
        let (lo, hi) = r.minimal_constant_ci.unwrap();
        assert!(lo <= hi);
        assert!(lo >= 0.0);
    }
}
