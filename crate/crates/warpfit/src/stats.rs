//! Confidence intervals for campaign statistics: Wilson score intervals for
//! proportions and exact (chi-square) intervals for Poisson counts.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid bounds: k={k} n={n}")]
    InvalidCounts { k: u64, n: u64 },
    #[error("confidence level {level} must be in (0, 1)")]
    InvalidLevel { level: f64 },
}

fn z_for(level: f64) -> Result<f64, StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel { level });
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Wilson score interval for a binomial proportion: `lo <= k/n <= hi`.
pub fn wilson_interval(k: u64, n: u64, level: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 || k > n {
        return Err(StatsError::InvalidCounts { k, n });
    }
    let z = z_for(level)?;
    let nf = n as f64;
    let p_hat = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p_hat + z2 / (2.0 * nf);
    let radius = z * (p_hat * (1.0 - p_hat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = ((center - radius) / denom).clamp(0.0, 1.0);
    let hi = ((center + radius) / denom).clamp(0.0, 1.0);
    // Guard against rounding residue at the boundaries.
    let lo = if k == 0 { 0.0 } else { lo };
    let hi = if k == n { 1.0 } else { hi };
    Ok((lo, hi))
}

/// Exact Poisson interval for an observed event count, via chi-square
/// quantiles: `lo = chi2(alpha/2, 2k)/2`, `hi = chi2(1-alpha/2, 2k+2)/2`.
pub fn poisson_interval(k: u64, level: f64) -> Result<(f64, f64), StatsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::InvalidLevel { level });
    }
    let alpha = 1.0 - level;
    let lo = if k == 0 {
        0.0
    } else {
        ChiSquared::new(2.0 * k as f64).unwrap().inverse_cdf(alpha / 2.0) / 2.0
    };
    // chi2 with 2 degrees of freedom is exponential; use the closed form for
    // the zero-count upper bound rather than the iterative quantile solver.
    let hi = if k == 0 {
        -(alpha / 2.0).ln()
    } else {
        ChiSquared::new(2.0 * (k + 1) as f64).unwrap().inverse_cdf(1.0 - alpha / 2.0) / 2.0
    };
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RngStream;

    #[test]
    fn wilson_contains_the_point_estimate() {
        for (k, n) in [(0u64, 100u64), (1, 10), (5, 10), (99, 100), (100, 100)] {
            let (lo, hi) = wilson_interval(k, n, 0.95).unwrap();
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "k={k} n={n} [{lo},{hi}]");
        }
    }

    #[test]
    fn wilson_boundaries() {
        let (lo, hi) = wilson_interval(0, 100, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0);
        let (lo, hi) = wilson_interval(100, 100, 0.95).unwrap();
        assert!(lo < 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn wilson_shrinks_with_n() {
        let (lo1, hi1) = wilson_interval(20, 100, 0.95).unwrap();
        let (lo2, hi2) = wilson_interval(200, 1000, 0.95).unwrap();
        assert!(hi2 - lo2 < hi1 - lo1);
    }

    #[test]
    fn wilson_rejects_bad_inputs() {
        assert!(wilson_interval(1, 0, 0.95).is_err());
        assert!(wilson_interval(5, 4, 0.95).is_err());
        assert!(wilson_interval(1, 10, 1.5).is_err());
    }

    #[test]
    fn poisson_zero_events_has_positive_upper_bound() {
        let (lo, hi) = poisson_interval(0, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        // Exact value for k=0 upper bound: -ln(alpha/2).
        assert!((hi - (-(0.025f64).ln())).abs() < 1e-9, "hi={hi}");
    }

    #[test]
    fn poisson_interval_brackets_k() {
        for k in [1u64, 5, 100] {
            let (lo, hi) = poisson_interval(k, 0.95).unwrap();
            let kf = k as f64;
            assert!(lo < kf && kf < hi, "k={k} [{lo},{hi}]");
        }
    }

    /// Monte Carlo coverage: Wilson at nominal 95% must cover the true
    /// proportion in at least 93% of simulated campaigns (p=0.2, n=500).
    #[test]
    fn wilson_coverage_at_least_93_percent() {
        let mut rng = RngStream::new(2024);
        let trials = 1000;
        let n = 500u64;
        let p = 0.2;
        let mut covered = 0u32;
        for _ in 0..trials {
            let mut k = 0u64;
            for _ in 0..n {
                if rng.f64() < p {
                    k += 1;
                }
            }
            let (lo, hi) = wilson_interval(k, n, 0.95).unwrap();
            if lo <= p && p <= hi {
                covered += 1;
            }
        }
        let coverage = covered as f64 / trials as f64;
        assert!(coverage >= 0.93, "coverage {coverage}");
    }
}
