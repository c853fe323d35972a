//! Closed-form exponent law, predicted variance curve, and power-law fitting.

use crate::engine::EnsembleResult;
use crate::error::{Error, Result};
use crate::levy::LevyParams;
use crate::rng::UniformStream;
use serde::{Deserialize, Serialize};

/// Asymptotic growth class of the averaged variance `t^{2c}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `c = 1`
    Ballistic,
    /// `1/2 < c < 1`
    SubBallistic,
    /// `c = 1/2`
    Diffusive,
    /// `c < 1/2`
    SubDiffusive,
}

/// Exponent `c` predicted for waiting-time tail `alpha` and single-interval
/// variance growth `T^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPrediction {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub regime: Regime,
}

/// The four-branch exponent law.
///
/// For `alpha <= beta`: `c = beta/2` when `alpha <= 1`, else
/// `c = (beta - alpha + 1)/2`. For `beta <= alpha`: `c = alpha/2` when
/// `alpha <= 1`, else `c = 1/2`. Both expressions agree on the boundary lines
/// `alpha = 1` and `alpha = beta`, so the law is continuous. The kicked-rotor
/// kernel has `beta = 2`, which reduces to `c = 1` for `alpha <= 1` and
/// `c = (3 - alpha)/2` for `1 <= alpha <= 2`.
pub fn theoretical_exponent(alpha: f64, beta: f64) -> Result<ExponentPrediction> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::domain(format!("beta must lie in (0, 2], got {beta}")));
    }
    let c = if alpha <= beta {
        if alpha <= 1.0 {
            beta / 2.0
        } else {
            (beta - alpha + 1.0) / 2.0
        }
    } else if alpha <= 1.0 {
        alpha / 2.0
    } else {
        0.5
    };
    let regime = if c >= 1.0 {
        Regime::Ballistic
    } else if c > 0.5 {
        Regime::SubBallistic
    } else if c == 0.5 {
        Regime::Diffusive
    } else {
        Regime::SubDiffusive
    };
    Ok(ExponentPrediction {
        alpha,
        beta,
        c,
        regime,
    })
}

/// Predicted averaged variance at finite time,
/// `(kappa^2 / 2) * t * <T^2>_t / <T>_t` with horizon-censored moments.
pub fn predicted_variance(alpha: f64, kappa: f64, t: f64) -> Result<f64> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    if !(t >= 1.0) {
        return Err(Error::domain(format!("time must be >= 1, got {t}")));
    }
    let levy = LevyParams::new(alpha)?;
    let m2 = levy.censored_moment(2.0, t)?;
    let m1 = levy.censored_moment(1.0, t)?;
    Ok(kappa * kappa / 2.0 * t * m2 / m1)
}

/// Ordinary least-squares power-law fit on `(ln t, ln sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Estimate of the exponent `2c`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// First and last sample time actually used.
    pub fit_window: (u64, u64),
    /// Largest absolute log-residual inside the window.
    pub residual_max: f64,
    /// OLS standard error of the slope.
    pub slope_stderr: f64,
}

/// Fits `ln v = intercept + slope * ln t` over points with `t >= t_min`.
///
/// Requires at least eight points in the window and strictly positive
/// variance everywhere in it.
pub fn fit_power_law(
    times: &[u64],
    variance: &[f64],
    t_min: u64,
) -> Result<PowerLawFit> {
    let mut pts = Vec::new();
    let mut window = (u64::MAX, 0u64);
    for (&t, &v) in times.iter().zip(variance) {
        if t < t_min {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::numerical(format!(
                "non-positive variance {v} at t = {t} inside the fit window"
            )));
        }
        window.0 = window.0.min(t);
        window.1 = window.1.max(t);
        pts.push(((t as f64).ln(), v.ln()));
    }
    if pts.len() < 8 {
        return Err(Error::config(format!(
            "need at least 8 sample points with t >= {t_min}, found {}",
            pts.len()
        )));
    }

    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let mut ss_res = 0.0;
    let mut residual_max: f64 = 0.0;
    for &(x, y) in &pts {
        let r = y - (intercept + slope * x);
        ss_res += r * r;
        residual_max = residual_max.max(r.abs());
    }
    // A constant series has zero total variation; the flat fit is exact.
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_stderr = (ss_res / (n - 2.0) / sxx).sqrt();

    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
        fit_window: window,
        residual_max,
        slope_stderr,
    })
}

/// Percentile bootstrap band for the fitted slope, resampling whole
/// trajectories with replacement. Points on one ensemble curve are strongly
/// correlated, so resampling trajectories (not points) is the honest unit.
pub fn bootstrap_slope_band(
    result: &EnsembleResult,
    t_min: u64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if resamples < 8 {
        return Err(Error::config("bootstrap needs at least 8 resamples"));
    }
    let n = result.trajectories.len();
    let m = result.series.times.len();
    let mut slopes = Vec::with_capacity(resamples);
    let mut stream = UniformStream::from_seed(seed);
    let mut variance = vec![0.0_f64; m];
    for _ in 0..resamples {
        let mut s1 = vec![0i128; m];
        let mut s2 = vec![0i128; m];
        for _ in 0..n {
            let pick = &result.trajectories[stream.next_index(n)];
            for j in 0..m {
                let x = pick[j] as i128;
                s1[j] += x;
                s2[j] += x * x;
            }
        }
        let nf = n as f64;
        for j in 0..m {
            let m1 = s1[j] as f64 / nf;
            let m2 = s2[j] as f64 / nf;
            variance[j] = m2 - m1 * m1;
        }
        slopes.push(fit_power_law(&result.series.times, &variance, t_min)?.slope);
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    let lo = slopes[(0.025 * resamples as f64).floor() as usize];
    let hi = slopes[((0.975 * resamples as f64).ceil() as usize).min(resamples - 1)];
    Ok((lo, hi))
}
