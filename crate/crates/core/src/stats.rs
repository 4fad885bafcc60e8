//! Moments, least-squares fits, exponential tail-rate fitting and bootstrap intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::lattice::rng::SplitMix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments<T: Scalar> {
    pub n: usize,
    pub mean: T,
    /// Unbiased sample variance.
    pub variance: T,
    /// Standard error of the mean.
    pub stderr: T,
    /// Standard error of the variance estimate (fourth-moment formula).
    pub variance_stderr: T,
}

pub fn moments<T: Scalar>(xs: &[T]) -> Moments<T> {
    let n = xs.len();
    if n == 0 {
        let nan = T::nan();
        return Moments { n, mean: nan, variance: nan, stderr: nan, variance_stderr: nan };
    }
    let nf = T::from_count(n);
    let mean = xs.iter().copied().sum::<T>() / nf;
    if n == 1 {
        return Moments { n, mean, variance: T::zero(), stderr: T::zero(), variance_stderr: T::zero() };
    }
    let m2 = xs.iter().map(|&x| (x - mean).powi(2)).sum::<T>() / nf;
    let m4 = xs.iter().map(|&x| (x - mean).powi(4)).sum::<T>() / nf;
    let variance = m2 * nf / (nf - T::one());
    let stderr = (variance / nf).sqrt();
    let variance_stderr = ((m4 - m2 * m2).max(T::zero()) / nf).sqrt();
    Moments { n, mean, variance, stderr, variance_stderr }
}

/// Two-sided 95% Student-t critical value.
pub fn t95(df: usize) -> f64 {
    if df == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, df as f64).map(|t| t.inverse_cdf(0.975)).unwrap_or(1.96)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit<T: Scalar> {
    pub slope: T,
    pub intercept: T,
    pub slope_stderr: T,
    pub intercept_stderr: T,
    pub r_squared: T,
    pub n: usize,
}

impl<T: Scalar> LinearFit<T> {
    /// 95% confidence interval of the slope.
    pub fn slope_ci95(&self) -> (T, T) {
        let half = self.slope_stderr * T::lit(t95(self.n.saturating_sub(2)));
        (self.slope - half, self.slope + half)
    }

    pub fn predict(&self, x: T) -> T {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y = a + b x`.
pub fn linear_fit<T: Scalar>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    let w = vec![T::one(); x.len()];
    weighted_linear_fit(x, y, &w)
}

/// Weighted least squares `y = a + b x` with weights `w` (inverse variances).
/// Standard errors use the residual scatter, so they are meaningful for unit weights too.
pub fn weighted_linear_fit<T: Scalar>(x: &[T], y: &[T], w: &[T]) -> Result<LinearFit<T>> {
    let n = x.len();
    if n != y.len() || n != w.len() {
        return Err(Error::Domain("fit inputs differ in length".into()));
    }
    if n < 2 {
        return Err(Error::Insufficient(format!("{n} points for a line fit")));
    }
    let sw: T = w.iter().copied().sum();
    let xm = x.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let ym = y.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / sw;
    let sxx: T = x.iter().zip(w).map(|(&a, &b)| b * (a - xm).powi(2)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::Domain("abscissae are all equal".into()));
    }
    let sxy: T = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let syy: T = (0..n).map(|i| w[i] * (y[i] - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: T = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let r_squared = if syy > T::zero() { T::one() - sse / syy } else { T::one() };
    let (slope_stderr, intercept_stderr) = if n > 2 {
        // scale weights so that sum(w) = n, then sigma^2 = sse / (n - 2)
        let scale = T::from_count(n) / sw;
        let sigma2 = sse * scale / T::from_count(n - 2);
        let sxx_n = sxx * scale;
        let se_b = (sigma2 / sxx_n).sqrt();
        let se_a = (sigma2 * (T::one() / T::from_count(n) + xm * xm / sxx_n)).sqrt();
        (se_b, se_a)
    } else {
        (T::zero(), T::zero())
    };
    Ok(LinearFit { slope, intercept, slope_stderr, intercept_stderr, r_squared, n })
}

/// Exponential decay rate fitted on a log-survival curve.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit<T: Scalar> {
    /// `-slope` of `log S(r)` against `r`; positive for a decaying tail.
    pub rate: T,
    pub stderr: T,
    pub r_squared: T,
    /// `(threshold, exceedances)` pairs used in the fit.
    pub points: Vec<(T, usize)>,
    pub n_samples: usize,
    /// Set when the samples carry no tail information (constant, or no positive counts).
    pub degenerate: bool,
}

impl<T: Scalar> RateFit<T> {
    fn degenerate(n_samples: usize) -> Self {
        RateFit {
            rate: T::nan(),
            stderr: T::nan(),
            r_squared: T::nan(),
            points: Vec::new(),
            n_samples,
            degenerate: true,
        }
    }
}

/// Least squares of `log(#{x > r} / n)` on `r` over thresholds with at least
/// `min_exceed` exceedances; at least `min_points` such thresholds are required.
pub fn tail_rate_fit_with<T: Scalar>(
    samples: &[T],
    thresholds: &[T],
    min_exceed: usize,
    min_points: usize,
) -> Result<RateFit<T>> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::Insufficient("no samples".into()));
    }
    let first = samples[0];
    if samples.iter().all(|&s| s == first) {
        return Ok(RateFit::degenerate(n));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
    let exceed = |r: T| n - sorted.partition_point(|&s| s <= r);
    let points: Vec<(T, usize)> =
        thresholds.iter().map(|&r| (r, exceed(r))).filter(|&(_, c)| c >= min_exceed).collect();
    fit_counts(points, n, min_points)
}

/// Shared fitter: at least 5 thresholds with at least 10 exceedances each.
pub fn tail_rate_fit<T: Scalar>(samples: &[T], thresholds: &[T]) -> Result<RateFit<T>> {
    tail_rate_fit_with(samples, thresholds, 10, 5)
}

/// Fit from already-histogrammed exceedance counts.
pub fn fit_counts<T: Scalar>(points: Vec<(T, usize)>, n_samples: usize, min_points: usize) -> Result<RateFit<T>> {
    if points.len() < min_points.max(2) {
        return Err(Error::Insufficient(format!("{} usable thresholds, need {}", points.len(), min_points.max(2))));
    }
    let x: Vec<T> = points.iter().map(|p| p.0).collect();
    let nf = T::from_count(n_samples);
    let y: Vec<T> = points.iter().map(|p| (T::from_count(p.1) / nf).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(RateFit {
        rate: -fit.slope,
        stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        points,
        n_samples,
        degenerate: false,
    })
}

/// Linear-interpolated quantile, `q` in [0, 1].
pub fn quantile<T: Scalar>(xs: &[T], q: f64) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    s[lo] + (s[hi] - s[lo]) * frac
}

/// Percentile bootstrap interval of `stat` over resamples of `data`.
pub fn bootstrap_interval<T, D, F>(data: &[D], resamples: usize, seed: u64, level: f64, stat: F) -> (T, T)
where
    T: Scalar,
    D: Clone,
    F: Fn(&[D]) -> T,
{
    if data.is_empty() || resamples == 0 {
        return (T::nan(), T::nan());
    }
    let mut rng = SplitMix::new(seed);
    let mut buf = Vec::with_capacity(data.len());
    let values: Vec<T> = (0..resamples)
        .map(|_| {
            buf.clear();
            buf.extend((0..data.len()).map(|_| data[rng.below(data.len() as u64) as usize].clone()));
            stat(&buf)
        })
        .collect();
    let alpha = (1.0 - level) / 2.0;
    (quantile(&values, alpha), quantile(&values, 1.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_known_data() {
        let m = moments(&[1.0f64, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-12);
        let c = moments(&[7.0f32; 10]);
        assert_eq!(c.variance, 0.0);
    }

    #[test]
    fn exact_line() {
        let x = [0.0f64, 1.0, 2.0, 3.0];
        let y = [1.0f64, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-9);
    }

    #[test]
    fn regression_stderr_matches_textbook() {
        // scipy.stats.linregress on these points: slope 0.7, stderr 0.25166114784
        let x = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0f64, 3.0, 2.0, 4.0, 4.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
        assert!((f.slope_stderr - 0.251_661_147_842).abs() < 1e-9);
        assert!((f.intercept_stderr - 0.834_665_601_703).abs() < 1e-9);
    }

    #[test]
    fn geometric_tail_rate() {
        let q: f64 = 0.3;
        let n = 20_000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                ((1.0 - u).ln() / (1.0 - q).ln()).floor()
            })
            .collect();
        let thresholds: Vec<f64> = (0..12).map(f64::from).collect();
        let fit = tail_rate_fit(&samples, &thresholds).unwrap();
        let expect = -(1.0 - q).ln();
        assert!((fit.rate - expect).abs() / expect < 0.1, "rate {} vs {}", fit.rate, expect);
        assert!(fit.r_squared > 0.99);
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let fit = tail_rate_fit(&[3.0; 100], &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn too_few_exceedances() {
        let samples: Vec<f64> = (0..50).map(f64::from).collect();
        let thresholds = [10.0, 20.0, 30.0, 40.0, 45.0];
        assert!(matches!(tail_rate_fit(&samples, &thresholds), Err(Error::Insufficient(_))));
    }

    #[test]
    fn quantiles_and_bootstrap() {
        let xs: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(quantile(&xs, 0.5), 50.0);
        assert_eq!(quantile(&xs, 0.999), 99.9);
        let (lo, hi) = bootstrap_interval(&xs, 400, 1, 0.95, |s: &[f64]| moments(s).mean);
        assert!(lo < 50.0 && hi > 50.0 && hi - lo < 20.0);
    }

    #[test]
    fn t_critical_values() {
        assert!((t95(3) - 3.182_446_305).abs() < 1e-6);
        assert!((t95(1000) - 1.962_339).abs() < 1e-4);
    }
}
