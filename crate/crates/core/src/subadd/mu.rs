//! Extrapolation of `μ̂(y)` from `h(n·y)/n` under the correction model
//! `h(ny)/n = μ + c·√(n‖y‖₁)·log(1+n‖y‖₁)/n`, `c ≥ 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::rng::SplitMix;
use crate::lattice::{LatticeBox, Point};
use crate::scalar::Scalar;
use crate::stats::{quantile, weighted_linear_fit};

use super::norm::DirectionEstimate;
use super::sampling::{check_schedule, sample_direction, BoxPolicy, DirectionSamples};

pub const MIN_SCHEDULE: usize = 4;
pub const DEFAULT_BOOTSTRAP: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuRow<T: Scalar> {
    pub n: u64,
    /// `ĥ(ny)/n`.
    pub ratio: T,
    pub stderr: T,
    pub residual: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuEstimate<T: Scalar> {
    pub direction: Point,
    pub mu: T,
    pub ci: (T, T),
    /// Coefficient of the correction term.
    pub correction: T,
    pub rows: Vec<MuRow<T>>,
    pub replicates: usize,
    pub excluded: usize,
    pub warning: Option<String>,
}

impl<T: Scalar> MuEstimate<T> {
    pub fn direction_estimate(&self) -> DirectionEstimate<T> {
        DirectionEstimate { direction: self.direction.clone(), mu: self.mu, ci: self.ci }
    }

    pub fn half_width(&self) -> T {
        (self.ci.1 - self.ci.0) / T::lit(2.0)
    }
}

/// Correction regressor `√m·log(1+m)/n` with `m = n‖y‖₁`.
pub fn correction_term<T: Scalar>(n: u64, y_l1: u64) -> T {
    let m = T::lit((n * y_l1) as f64);
    m.sqrt() * (T::one() + m).ln() / T::lit(n as f64)
}

/// Weighted fit of ratios against the correction regressor; returns `(μ, c)`.
/// A negative slope is clamped to zero and `μ` becomes the weighted mean. An
/// intercept below `floor` (the ℓ1 length, a hard lower bound) is raised to
/// it and `c` refitted through that point.
pub fn fit_mu<T: Scalar>(regressor: &[T], ratios: &[T], weights: &[T], floor: T) -> Result<(T, T)> {
    let fit = weighted_linear_fit(regressor, ratios, weights)?;
    let (mu, c) = if fit.slope >= T::zero() && fit.slope.is_finite() {
        (fit.intercept, fit.slope)
    } else {
        let wsum: T = weights.iter().copied().sum();
        (ratios.iter().zip(weights).map(|(&r, &w)| r * w).sum::<T>() / wsum, T::zero())
    };
    if mu >= floor {
        return Ok((mu, c));
    }
    let num: T = regressor.iter().zip(ratios).zip(weights).map(|((&x, &r), &w)| w * x * (r - floor)).sum();
    let den: T = regressor.iter().zip(weights).map(|(&x, &w)| w * x * x).sum();
    Ok((floor, (num / den).max(T::zero())))
}

fn column_means<T: Scalar>(rows: &[&Vec<f64>], k: usize) -> Vec<T> {
    let n = T::from_count(rows.len());
    (0..k).map(|i| rows.iter().map(|r| T::lit(r[i])).sum::<T>() / n).collect()
}

/// Fit `μ̂(y)` from replicate samples; the CI is a percentile bootstrap over replicates.
pub fn estimate_mu_from<T: Scalar>(samples: &DirectionSamples, resamples: usize, seed: u64) -> Result<MuEstimate<T>> {
    check_schedule(&samples.ns)?;
    if samples.ns.len() < MIN_SCHEDULE {
        return Err(Error::Domain(format!("schedule of {} values, need {MIN_SCHEDULE}", samples.ns.len())));
    }
    if samples.rows.len() < 2 {
        return Err(Error::Insufficient("fewer than two accepted replicates".into()));
    }
    let k = samples.ns.len();
    let y_l1 = LatticeBox::l1(&samples.direction, &vec![0; samples.direction.len()]);
    let x: Vec<T> = samples.ns.iter().map(|&n| correction_term(n, y_l1)).collect();
    let all: Vec<&Vec<f64>> = samples.rows.iter().collect();
    let nf = |n: u64| T::lit(n as f64);
    let means = column_means::<T>(&all, k);
    let ratios: Vec<T> = means.iter().zip(&samples.ns).map(|(&m, &n)| m / nf(n)).collect();
    let r = T::from_count(all.len());
    let stderrs: Vec<T> = (0..k)
        .map(|i| {
            let var = all.iter().map(|row| (T::lit(row[i]) - means[i]).powi(2)).sum::<T>() / (r - T::one());
            (var / r).sqrt() / nf(samples.ns[i])
        })
        .collect();
    let weights: Vec<T> = if stderrs.iter().all(|&s| s > T::zero()) {
        stderrs.iter().map(|&s| T::one() / (s * s)).collect()
    } else {
        vec![T::one(); k]
    };
    let floor = T::lit(y_l1 as f64);
    let (mu, c) = fit_mu(&x, &ratios, &weights, floor)?;

    let mut rng = SplitMix::new(seed);
    let mut draws = Vec::with_capacity(resamples);
    let mut pick: Vec<&Vec<f64>> = Vec::with_capacity(all.len());
    for _ in 0..resamples {
        pick.clear();
        pick.extend((0..all.len()).map(|_| all[rng.below(all.len() as u64) as usize]));
        let m = column_means::<T>(&pick, k);
        let rr: Vec<T> = m.iter().zip(&samples.ns).map(|(&m, &n)| m / nf(n)).collect();
        draws.push(fit_mu(&x, &rr, &weights, floor)?.0);
    }
    let ci =
        if draws.is_empty() { (mu, mu) } else { (quantile(&draws, 0.025).min(mu), quantile(&draws, 0.975).max(mu)) };

    let rows: Vec<MuRow<T>> = (0..k)
        .map(|i| MuRow {
            n: samples.ns[i],
            ratio: ratios[i],
            stderr: stderrs[i],
            residual: ratios[i] - (mu + c * x[i]),
        })
        .collect();
    let bad: Vec<u64> =
        rows.iter().filter(|r| r.residual.abs() > T::lit(3.0) * r.stderr + T::tolerance()).map(|r| r.n).collect();
    let mut notes = Vec::new();
    if !bad.is_empty() {
        notes.push(format!("fit residuals beyond 3 stderr at n = {bad:?}"));
    }
    if mu <= floor && ratios.iter().any(|&r| r > floor) {
        notes.push("extrapolated intercept fell below the l1 bound and was raised to it".to_string());
    }
    let warning = (!notes.is_empty()).then(|| notes.join("; "));
    Ok(MuEstimate {
        direction: samples.direction.clone(),
        mu,
        ci,
        correction: c,
        rows,
        replicates: samples.rows.len(),
        excluded: samples.excluded,
        warning,
    })
}

/// Sample and fit `μ̂(y)` in one step.
pub fn estimate_mu<T: Scalar>(y: &[i64], ns: &[u64], p: f64, replicates: usize, seed: u64) -> Result<MuEstimate<T>> {
    let samples = sample_direction(y, ns, p, replicates, seed, BoxPolicy::default())?;
    estimate_mu_from(&samples, DEFAULT_BOOTSTRAP, crate::lattice::rng::mix64(seed ^ 0x4d55))
}
