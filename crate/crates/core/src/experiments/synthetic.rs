//! Known laws injected in place of sampled distances, to calibrate the fitters.

use serde::{Deserialize, Serialize};

use crate::lattice::LatticeBox;
use crate::subadd::DirectionSamples;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Synthetic {
    /// Sample variance exactly `m·log(1+m)` around `μ·m`, `m = n‖y‖₁`.
    VarianceCurve { mu: f64 },
    /// `|X − μm|/√m` exponential with the given rate, symmetric signs.
    Laplace { rate: f64 },
    /// Means exactly `μ·m + c·√m·log(1+m)`, with ±1 noise.
    MeanCurve { mu: f64, c: f64 },
}

impl Synthetic {
    pub fn samples(&self, y: &[i64], ns: &[u64], replicates: usize) -> DirectionSamples {
        let y_l1 = LatticeBox::l1(y, &vec![0; y.len()]);
        let columns: Vec<Vec<f64>> = ns.iter().map(|&n| self.column((n * y_l1) as f64, replicates)).collect();
        let rows = (0..replicates).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
        DirectionSamples { direction: y.to_vec(), ns: ns.to_vec(), rows, excluded: 0, attempted: replicates, side: 0 }
    }

    fn column(&self, m: f64, r: usize) -> Vec<f64> {
        match *self {
            Synthetic::VarianceCurve { mu } => {
                let pairs = r / 2;
                let v = m * (1.0 + m).ln();
                let a = (v * (r as f64 - 1.0) / (2 * pairs) as f64).sqrt();
                (0..r)
                    .map(|i| {
                        if i >= 2 * pairs {
                            mu * m
                        } else if i % 2 == 0 {
                            mu * m + a
                        } else {
                            mu * m - a
                        }
                    })
                    .collect()
            }
            Synthetic::Laplace { rate } => {
                let pos = r.div_ceil(2);
                let neg = r / 2;
                (0..r)
                    .map(|i| {
                        let (k, count, sign) = if i % 2 == 0 { (i / 2, pos, 1.0) } else { (i / 2, neg, -1.0) };
                        let u = (k as f64 + 0.5) / count as f64;
                        m + sign * m.sqrt() * (-(1.0 - u).ln() / rate)
                    })
                    .collect()
            }
            Synthetic::MeanCurve { mu, c } => {
                let h = mu * m + c * m.sqrt() * (1.0 + m).ln();
                (0..r).map(|i| if i % 2 == 0 { h + 1.0 } else { h - 1.0 }).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::moments;

    #[test]
    fn variance_curve_is_exact() {
        for r in [30, 31, 500] {
            let s = Synthetic::VarianceCurve { mu: 1.3 }.samples(&[1, 0], &[16, 256], r);
            for (i, &n) in s.ns.iter().enumerate() {
                let m = moments(&s.column(i));
                let want = n as f64 * (1.0 + n as f64).ln();
                assert!((m.variance - want).abs() < 1e-9 * want, "{r} {n}");
                assert!((m.mean - 1.3 * n as f64).abs() < 1e-9 * n as f64);
            }
        }
    }

    #[test]
    fn mean_curve_is_exact() {
        let s = Synthetic::MeanCurve { mu: 1.2, c: 1.0 }.samples(&[1, 0], &[4, 9], 40);
        let m = moments(&s.column(1));
        assert!((m.mean - (1.2 * 9.0 + 3.0 * 10f64.ln())).abs() < 1e-12);
    }
}
