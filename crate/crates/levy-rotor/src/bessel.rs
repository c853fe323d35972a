//! Integer-order cylindrical Bessel functions `J_n` and the transition kernel
//! `q_l(T) = J_l(kappa T)^2` describing one inter-measurement interval.
//!
//! The whole order range at fixed argument is produced by a single Miller-type
//! downward recurrence normalized with the identity `sum_n J_n(x)^2 = 1`, so a
//! range of width `N` costs `O(N)` and the normalization identity used by the
//! test suite holds by construction up to roundoff.

use crate::error::{Error, Result};

/// Evaluation limits for the Bessel routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEvalConfig {
    /// Largest |order| the evaluator will accept.
    pub max_order: u32,
    /// Target relative accuracy for values above the underflow floor.
    pub rel_tolerance: f64,
}

impl Default for BesselEvalConfig {
    fn default() -> Self {
        // 2^23 orders covers kappa*T for the largest horizons used here.
        Self {
            max_order: 1 << 23,
            rel_tolerance: 1e-12,
        }
    }
}

impl BesselEvalConfig {
    pub fn new(max_order: u32, rel_tolerance: f64) -> Result<Self> {
        if max_order < 1 {
            return Err(Error::config("max_order must be at least 1"));
        }
        if !(rel_tolerance > 0.0 && rel_tolerance < 1e-6) {
            return Err(Error::config("rel_tolerance must lie in (0, 1e-6)"));
        }
        Ok(Self {
            max_order,
            rel_tolerance,
        })
    }
}

/// Order at which the downward recurrence is seeded.
///
/// The turning point of `J_n(x)` sits near `n = x`; the extra cube-root term
/// covers the Airy transition zone so the recessive-solution contamination is
/// below 1e-16 by the time the sweep reaches the requested orders.
fn recurrence_start(x: f64, n_max: usize) -> usize {
    let base = n_max.max(x.ceil() as usize);
    base + 40 + (12.0 * x.cbrt()).ceil() as usize
}

/// `J_0(x) ..= J_{n_max}(x)` for `x >= 0`, one downward sweep.
pub fn bessel_j_sequence(x: f64, n_max: usize) -> Vec<f64> {
    assert!(
        x.is_finite() && x >= 0.0,
        "bessel_j_sequence requires a finite nonnegative argument"
    );
    let mut out = vec![0.0_f64; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }

    let start = recurrence_start(x, n_max);
    let mut above = 0.0_f64; // unnormalized J_{k+1}
    let mut cur = 1e-50_f64; // unnormalized J_k, seeded at k = start
    let mut norm = 0.0_f64; // accumulates J_0^2 + 2 sum_{k>=1} J_k^2

    let mut k = start;
    loop {
        norm += if k == 0 { cur * cur } else { 2.0 * cur * cur };
        if k <= n_max {
            out[k] = cur;
        }
        if k == 0 {
            break;
        }
        let below = (2.0 * k as f64 / x) * cur - above;
        above = cur;
        cur = below;
        k -= 1;

        // Rescale before squares can overflow; the discarded old norm mass is
        // smaller than the post-rescale contributions by >= 1e280.
        if cur.abs() > 1e140 {
            const SCALE: f64 = 1e-140;
            cur *= SCALE;
            above *= SCALE;
            norm *= SCALE * SCALE;
            for v in &mut out[k.min(n_max + 1)..] {
                *v *= SCALE;
            }
        }
    }

    let scale = 1.0 / norm.sqrt();
    for v in &mut out {
        *v *= scale;
    }
    out
}

/// `J_order(x)` for integer order (either sign) and `x >= 0`.
///
/// Negative orders use `J_{-n}(x) = (-1)^n J_n(x)`.
pub fn bessel_j(cfg: &BesselEvalConfig, order: i64, x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "bessel_j argument must be finite and nonnegative, got {x}"
        )));
    }
    let n = order.unsigned_abs();
    if n > cfg.max_order as u64 {
        return Err(Error::capability(format!(
            "bessel_j order {order} exceeds configured max_order {}",
            cfg.max_order
        )));
    }
    let n = n as usize;
    let value = bessel_j_sequence(x, n)[n];
    Ok(if order < 0 && n % 2 == 1 { -value } else { value })
}

/// Probability kernel over momentum displacements for one interval of `T`
/// kicks at strength `kappa`: `q_l(T) = J_l(kappa T)^2` on `[-L, L]`.
///
/// Weights are mirrored from the nonnegative orders (so the symmetry
/// `q_l = q_{-l}` is bit-exact), truncated where the tail mass drops below
/// `tail_tol`, and renormalized to total exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    half_width: usize,
    weights: Vec<f64>,
    kappa: f64,
    interval: u64,
}

impl TransitionKernel {
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn interval(&self) -> u64 {
        self.interval
    }

    /// Weights indexed by `l + half_width` for `l in [-L, L]`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `q_l`, zero outside the stored window.
    pub fn weight(&self, l: i64) -> f64 {
        let idx = l + self.half_width as i64;
        if idx < 0 || idx >= self.weights.len() as i64 {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    /// Total mass under the canonical summation order (mirrored pairs in
    /// ascending displacement, center last). Exactly 1 by construction.
    pub fn total(&self) -> f64 {
        Self::pair_total(&self.weights, self.half_width)
    }

    fn pair_total(weights: &[f64], hw: usize) -> f64 {
        let mut acc = 0.0;
        for k in 1..=hw {
            acc += weights[hw + k] + weights[hw - k];
        }
        acc + weights[hw]
    }

    /// First and second moments `(m1, m2)`.
    ///
    /// The first moment is exactly zero by the mirrored construction; it is
    /// reported as such rather than recomputed, so no floating-point drift can
    /// leak into the moment maps.
    pub fn moments(&self) -> (f64, f64) {
        let l = self.half_width;
        let mut m2 = 0.0;
        for k in 1..=l {
            m2 += (k * k) as f64 * (self.weights[l + k] + self.weights[l - k]);
        }
        (0.0, m2)
    }

    /// Builds a kernel directly from mirrored half-weights. `half[k]` is the
    /// weight at displacement `+-k`; `half[0]` the center. Internal helper for
    /// the synthetic kernels; weights are renormalized to total exactly 1.
    pub(crate) fn from_half_weights(
        half: Vec<f64>,
        kappa: f64,
        interval: u64,
    ) -> Result<TransitionKernel> {
        let hw = half.len() - 1;
        let mut total = half[0];
        for w in &half[1..] {
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::numerical("kernel weights must be finite and nonnegative"));
            }
            total += 2.0 * w;
        }
        if total <= 0.0 {
            return Err(Error::numerical("kernel weights sum to zero"));
        }
        let mut weights = vec![0.0; 2 * hw + 1];
        for (k, w) in half.iter().enumerate() {
            let w = w / total;
            weights[hw + k] = w;
            weights[hw - k] = w;
        }
        // Absorb residual rounding so the canonical total is exactly 1;
        // master propagation over ~1e6 steps must conserve probability
        // exactly. The correction goes into the center weight, or into the
        // heaviest mirrored pair when the center is too light to take it.
        for _ in 0..4 {
            let correction = 1.0 - Self::pair_total(&weights, hw);
            if correction == 0.0 {
                break;
            }
            if weights[hw] + correction >= 0.0 {
                weights[hw] += correction;
            } else {
                let k = (1..=hw)
                    .max_by(|a, b| weights[hw + a].total_cmp(&weights[hw + b]))
                    .expect("positive half-width");
                let half_corr = correction / 2.0;
                weights[hw + k] += half_corr;
                weights[hw - k] = weights[hw + k];
            }
        }
        if Self::pair_total(&weights, hw) != 1.0 {
            return Err(Error::numerical("kernel renormalization did not converge"));
        }
        Ok(TransitionKernel {
            half_width: hw,
            weights,
            kappa,
            interval,
        })
    }
}

/// Builds the Bessel transition kernel for an interval of `T` kicks.
///
/// `T = 0` yields the delta kernel at `l = 0`.
pub fn build_kernel(kappa: f64, interval: u64, tail_tol: f64) -> Result<TransitionKernel> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(Error::domain(format!(
            "tail_tol must lie in (0, 1e-6], got {tail_tol}"
        )));
    }
    if interval == 0 {
        return TransitionKernel::from_half_weights(vec![1.0], kappa, 0);
    }
    let x = kappa * interval as f64;
    if !x.is_finite() {
        return Err(Error::domain("kappa * T overflows f64"));
    }

    // Starting guess: turning point plus Airy zone; extend if the truncated
    // tail has not dropped below tail_tol (it always has in practice).
    let mut guess = x.ceil() as usize + 40.max((12.0 * x.cbrt()).ceil() as usize);
    loop {
        let seq = bessel_j_sequence(x, guess);
        let mut mass = seq[0] * seq[0];
        let mut cut = if (1.0 - mass).max(0.0) < tail_tol {
            Some(0)
        } else {
            None
        };
        if cut.is_none() {
            for l in 1..=guess {
                mass += 2.0 * seq[l] * seq[l];
                if (1.0 - mass).max(0.0) < tail_tol {
                    cut = Some(l);
                    break;
                }
            }
        }
        match cut {
            Some(hw) => {
                let half: Vec<f64> = seq[..=hw].iter().map(|j| j * j).collect();
                return TransitionKernel::from_half_weights(half, kappa, interval);
            }
            None => {
                guess = guess * 3 / 2 + 16;
                if guess > usize::MAX / 4 {
                    return Err(Error::numerical("kernel truncation failed to converge"));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Ascending power series for J_n, independent of the recurrence path.
    fn series_j(n: usize, x: f64, terms: usize) -> f64 {
        let half = x / 2.0;
        let mut prefactor = 1.0;
        for k in 1..=n {
            prefactor *= half / k as f64;
        }
        let mut term = prefactor;
        let mut sum = term;
        for k in 1..terms {
            term *= -(half * half) / (k as f64 * (k + n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn zero_argument() {
        let cfg = BesselEvalConfig::default();
        assert_eq!(bessel_j(&cfg, 0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(&cfg, 5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_power_series_oracle() {
        let cfg = BesselEvalConfig::default();
        let got = bessel_j(&cfg, 0, 1.0).unwrap();
        let want = series_j(0, 1.0, 40);
        assert_relative_eq!(got, want, max_relative = 1e-12);

        for n in 0..=8 {
            for &x in &[0.25, 1.0, 2.0, 5.0] {
                let got = bessel_j(&cfg, n, x).unwrap();
                let want = series_j(n as usize, x, 60);
                assert_abs_diff_eq!(got, want, epsilon = 1e-12 * want.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn negative_order_parity() {
        let cfg = BesselEvalConfig::default();
        for n in 1..6 {
            let plus = bessel_j(&cfg, n, 2.5).unwrap();
            let minus = bessel_j(&cfg, -n, 2.5).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(minus, sign * plus);
        }
    }

    #[test]
    fn order_beyond_capability_errors() {
        let cfg = BesselEvalConfig::new(16, 1e-12).unwrap();
        let err = bessel_j(&cfg, 17, 1.0).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn negative_argument_errors() {
        let cfg = BesselEvalConfig::default();
        let err = bessel_j(&cfg, 0, -1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn normalization_identity() {
        // |sum J_n(x)^2 - 1| and the second-moment identity at the suite points.
        for &x in &[0.5f64, 1.0, 5.0, 20.0, 50.0] {
            let n = x.ceil() as usize + 40;
            let seq = bessel_j_sequence(x, n);
            let mut sum = seq[0] * seq[0];
            let mut m2 = 0.0;
            for k in 1..=n {
                sum += 2.0 * seq[k] * seq[k];
                m2 += 2.0 * (k * k) as f64 * seq[k] * seq[k];
            }
            assert!((sum - 1.0).abs() < 1e-9, "sum identity failed at x={x}");
            let want = x * x / 2.0;
            assert!(
                ((m2 - want) / want).abs() < 1e-9,
                "second-moment identity failed at x={x}"
            );
        }
    }

    #[test]
    fn delta_kernel_at_zero_interval() {
        let k = build_kernel(1.0, 0, 1e-10).unwrap();
        assert_eq!(k.half_width(), 0);
        assert_eq!(k.weight(0), 1.0);
        assert_eq!(k.moments(), (0.0, 0.0));
    }

    #[test]
    fn kernel_mass_before_normalization() {
        // Direct summation of J_l(10)^2 over the untruncated range.
        let x = 10.0;
        let n = x as usize + 60;
        let seq = bessel_j_sequence(x, n);
        let mut total = seq[0] * seq[0];
        for l in 1..=n {
            total += 2.0 * seq[l] * seq[l];
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_second_moment() {
        // (kappa T)^2 / 2, cross-checked by brute-force summation.
        let k = build_kernel(2.0, 5, 1e-10).unwrap();
        let (m1, m2) = k.moments();
        assert_eq!(m1, 0.0);
        assert_relative_eq!(m2, 50.0, max_relative = 1e-8);

        let k = build_kernel(1.0, 4, 1e-10).unwrap();
        assert_relative_eq!(k.moments().1, 8.0, max_relative = 1e-8);

        let k = build_kernel(0.5, 20, 1e-10).unwrap();
        assert_relative_eq!(k.moments().1, 50.0, max_relative = 1e-8);
    }

    #[test]
    fn kernel_normalized_exactly() {
        for &(kappa, t) in &[(1.0, 1), (1.0, 10), (2.0, 5), (0.5, 137), (1.0, 1000)] {
            let k = build_kernel(kappa, t, 1e-12).unwrap();
            assert_eq!(k.total(), 1.0, "kernel ({kappa}, {t}) total is not exact");
        }
    }

    #[test]
    fn kernel_symmetry_bit_exact() {
        let k = build_kernel(1.7, 23, 1e-10).unwrap();
        for l in 0..=k.half_width() as i64 {
            assert_eq!(k.weight(l).to_bits(), k.weight(-l).to_bits());
        }
    }

    #[test]
    fn second_moment_monotone_in_interval() {
        let mut prev = -1.0;
        for t in 0..40 {
            let m2 = build_kernel(1.0, t, 1e-10).unwrap().moments().1;
            assert!(m2 > prev, "m2 not increasing at T={t}");
            prev = m2;
        }
    }
}
