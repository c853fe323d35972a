//! Heavy-tailed waiting times between momentum measurements.
//!
//! The waiting-time density is uniform below 1 and decays as `t^-(alpha+1)`
//! above it, normalized by `alpha / (1 + alpha)`. Continuous draws come from
//! the exact inverse CDF; the integer interval is obtained by flooring (the
//! default), flooring with a minimum of one, or rounding up.

use crate::error::{Error, Result};
use crate::rng::UniformStream;
use serde::{Deserialize, Serialize};

/// How a continuous waiting time is turned into an integer kick count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FloorPolicy {
    /// Truncate toward zero; intervals of zero kicks are kept.
    #[default]
    FloorAllowZero,
    /// Truncate toward zero but never below one.
    FloorMinOne,
    /// Round up.
    Ceil,
}

/// Tail exponent and integer-conversion policy for the waiting-time law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyParams {
    alpha: f64,
    pub floor_policy: FloorPolicy,
}

impl LevyParams {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_policy(alpha, FloorPolicy::default())
    }

    pub fn with_policy(alpha: f64, floor_policy: FloorPolicy) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::domain(format!(
                "alpha must lie in (0, 2], got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            floor_policy,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Waiting-time density. Zero for negative `t`.
    pub fn density(&self, t: f64) -> f64 {
        let a = self.alpha;
        let norm = a / (1.0 + a);
        if t < 0.0 {
            0.0
        } else if t < 1.0 {
            norm
        } else {
            norm * t.powf(-(a + 1.0))
        }
    }

    /// Cumulative distribution of the continuous waiting time.
    pub fn cdf(&self, t: f64) -> f64 {
        let a = self.alpha;
        if t <= 0.0 {
            0.0
        } else if t < 1.0 {
            a / (1.0 + a) * t
        } else {
            1.0 - t.powf(-a) / (1.0 + a)
        }
    }

    /// Exact inverse of [`Self::cdf`]; continuous at the breakpoint `t = 1`.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::domain(format!("uniform deviate must lie in [0, 1), got {u}")));
        }
        let a = self.alpha;
        let breakpoint = a / (1.0 + a);
        Ok(if u < breakpoint {
            u * (1.0 + a) / a
        } else {
            let y = (1.0 + a) * (1.0 - u);
            // y^(-1/a); the common exponents avoid powf in the hot loop.
            if a == 1.0 {
                1.0 / y
            } else if a == 2.0 {
                1.0 / y.sqrt()
            } else if a == 0.5 {
                1.0 / (y * y)
            } else {
                y.powf(-1.0 / a)
            }
        })
    }

    /// Integer interval: inverse CDF followed by the floor policy. Values
    /// beyond the u64 range saturate (they always overshoot any horizon).
    pub fn sample_interval(&self, u: f64) -> Result<u64> {
        let t = self.inverse_cdf(u)?;
        Ok(match self.floor_policy {
            FloorPolicy::FloorAllowZero => t as u64,
            FloorPolicy::FloorMinOne => (t as u64).max(1),
            FloorPolicy::Ceil => t.ceil() as u64,
        })
    }

    /// Horizon-censored moment `int_0^t s^beta rho(s) ds` (not renormalized).
    ///
    /// For `beta != alpha` this is
    /// `alpha/(alpha+1) * [1/(beta+1) + (t^(beta-alpha) - 1)/(beta-alpha)]`,
    /// with the logarithmic form at `beta == alpha`. The generic branch is
    /// evaluated through `expm1`, which stays accurate arbitrarily close to
    /// the logarithmic line.
    pub fn censored_moment(&self, beta: f64, horizon: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::domain(format!("moment order must be positive, got {beta}")));
        }
        if !(horizon >= 1.0) {
            return Err(Error::domain(format!(
                "censored_moment horizon must be >= 1, got {horizon}"
            )));
        }
        let a = self.alpha;
        let tail = if beta == a {
            horizon.ln()
        } else {
            f64::exp_m1((beta - a) * horizon.ln()) / (beta - a)
        };
        Ok(a / (a + 1.0) * (1.0 / (beta + 1.0) + tail))
    }
}

/// A realized sequence of integer waiting times with its target horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementSchedule {
    intervals: Vec<u64>,
    horizon: u64,
}

impl MeasurementSchedule {
    /// Wraps explicit intervals; the realized time must reach the horizon.
    pub fn from_intervals(intervals: Vec<u64>, horizon: u64) -> Result<Self> {
        let realized: u128 = intervals.iter().map(|&t| t as u128).sum();
        if realized < horizon as u128 {
            return Err(Error::config(format!(
                "schedule covers {realized} steps but the horizon is {horizon}"
            )));
        }
        Ok(Self { intervals, horizon })
    }

    /// Draws intervals until the cumulative clock reaches `horizon`. The final
    /// interval may overshoot and is kept.
    pub fn sample_until_horizon(
        params: &LevyParams,
        horizon: u64,
        stream: &mut UniformStream,
    ) -> Result<Self> {
        let mut intervals = Vec::new();
        let mut clock: u128 = 0;
        while clock < horizon as u128 {
            let t = params.sample_interval(stream.next_f64())?;
            intervals.push(t);
            clock += t as u128;
        }
        Ok(Self { intervals, horizon })
    }

    /// Draws exactly `count` intervals; the horizon is the realized time.
    pub fn sample_count(
        params: &LevyParams,
        count: usize,
        stream: &mut UniformStream,
    ) -> Result<Self> {
        let mut intervals = Vec::with_capacity(count);
        for _ in 0..count {
            intervals.push(params.sample_interval(stream.next_f64())?);
        }
        let horizon = intervals
            .iter()
            .map(|&t| t as u128)
            .sum::<u128>()
            .min(u64::MAX as u128) as u64;
        Ok(Self { intervals, horizon })
    }

    pub fn intervals(&self) -> &[u64] {
        &self.intervals
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn realized_time(&self) -> u128 {
        self.intervals.iter().map(|&t| t as u128).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Composite-Simpson quadrature oracle on [lo, hi].
    fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
        let h = (hi - lo) / panels as f64;
        let mut sum = f(lo) + f(hi);
        for i in 1..panels {
            let x = lo + i as f64 * h;
            sum += if i % 2 == 0 { 2.0 } else { 4.0 } * f(x);
        }
        sum * h / 3.0
    }

    #[test]
    fn density_values() {
        let p = LevyParams::new(1.0).unwrap();
        assert_eq!(p.density(0.5), 0.5);
        assert_eq!(p.density(2.0), 0.125);
        assert_eq!(p.density(-1.0), 0.0);
    }

    #[test]
    fn density_integrates_to_one() {
        for &alpha in &[0.5, 1.0, 1.5, 2.0] {
            let p = LevyParams::new(alpha).unwrap();
            // Split at the kink: flat part directly, tail in log coordinates
            // (substituting t = e^y keeps the integrand smooth), analytic
            // remainder beyond 1e6.
            let flat = simpson(|t| p.density(t), 0.0, 1.0, 2_000);
            let log_hi = 1e6_f64.ln();
            let tail = simpson(|y| y.exp() * p.density(y.exp()), 0.0, log_hi, 200_000);
            let remainder = 1e6_f64.powf(-alpha) / (1.0 + alpha);
            assert_abs_diff_eq!(flat + tail + remainder, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn inverse_cdf_values() {
        let p = LevyParams::new(1.0).unwrap();
        assert_eq!(p.inverse_cdf(0.0).unwrap(), 0.0);
        assert_relative_eq!(p.inverse_cdf(0.5).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(p.inverse_cdf(0.75).unwrap(), 2.0, max_relative = 1e-14);
        assert!(p.inverse_cdf(1.0).is_err());
        assert!(p.inverse_cdf(-0.1).is_err());
    }

    #[test]
    fn inverse_cdf_round_trip() {
        for &alpha in &[0.5, 1.0, 1.3, 2.0] {
            let p = LevyParams::new(alpha).unwrap();
            for i in 0..999 {
                let u = i as f64 / 999.0;
                let t = p.inverse_cdf(u).unwrap();
                assert_abs_diff_eq!(p.cdf(t), u, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sample_interval_policies() {
        let p = LevyParams::new(1.5).unwrap();
        assert_eq!(p.sample_interval(0.1).unwrap(), 0);
        let p1 = LevyParams::with_policy(1.5, FloorPolicy::FloorMinOne).unwrap();
        assert_eq!(p1.sample_interval(0.1).unwrap(), 1);
        let p = LevyParams::new(1.0).unwrap();
        assert_eq!(p.sample_interval(0.75).unwrap(), 2);
    }

    #[test]
    fn censored_moment_closed_forms() {
        // alpha = beta = 1 at t = e^2: (1/2)(1/2 + 2).
        let p = LevyParams::new(1.0).unwrap();
        let e2 = std::f64::consts::E * std::f64::consts::E;
        assert_relative_eq!(p.censored_moment(1.0, e2).unwrap(), 1.25, max_relative = 1e-14);

        // alpha = beta = 2 at t = 10: (2/3)(1/3 + ln 10).
        let p = LevyParams::new(2.0).unwrap();
        let want = 2.0 / 3.0 * (1.0 / 3.0 + 10.0_f64.ln());
        assert_relative_eq!(p.censored_moment(2.0, 10.0).unwrap(), want, max_relative = 1e-14);

        assert!(p.censored_moment(2.0, 0.5).is_err());
        assert!(p.censored_moment(-1.0, 10.0).is_err());
    }

    #[test]
    fn censored_moment_matches_quadrature() {
        let p = LevyParams::new(1.5).unwrap();
        let got = p.censored_moment(2.0, 100.0).unwrap();
        let want = simpson(|t| t * t * p.density(t), 0.0, 100.0, 400_000);
        assert_relative_eq!(got, want, max_relative = 1e-8);
    }

    #[test]
    fn censored_moment_growth_exponent() {
        // For alpha < beta the moment grows like t^(beta - alpha); least-squares
        // slope over [1e3, 1e6] on a log grid.
        for &(alpha, beta) in &[(0.5, 1.0), (1.0, 2.0), (1.5, 2.0)] {
            let p = LevyParams::new(alpha).unwrap();
            let pts: Vec<(f64, f64)> = (0..=30)
                .map(|i| {
                    let t = 10f64.powf(3.0 + i as f64 / 10.0);
                    (t.ln(), p.censored_moment(beta, t).unwrap().ln())
                })
                .collect();
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let slope = sxy / sxx;
            assert!(
                (slope - (beta - alpha)).abs() < 0.02,
                "slope {slope} vs {} for alpha={alpha} beta={beta}",
                beta - alpha
            );
        }
    }

    #[test]
    fn schedule_reaches_horizon() {
        let p = LevyParams::new(1.5).unwrap();
        let mut stream = UniformStream::from_seed(3);
        let s = MeasurementSchedule::sample_until_horizon(&p, 10_000, &mut stream).unwrap();
        assert!(s.realized_time() >= 10_000);
        assert!(MeasurementSchedule::from_intervals(vec![1, 2], 100).is_err());
    }
}
