//! The two evolution engines and the deterministic master-equation
//! propagator.
//!
//! A trajectory alternates Levy-distributed waiting intervals with projective
//! momentum measurements. Between measurements the kernel engine draws the
//! momentum increment directly from the closed-form transition kernel
//! `q_l(T) = J_l(kappa T)^2` (valid at a principal resonance), while the
//! wavefunction engine evolves the full state kick by kick and measures it.
//! Both consume the per-trajectory deviate stream in the same order (one
//! deviate for the interval, one for the measurement), so ensembles with
//! shared seeds stay pairwise comparable across engines.
//!
//! Recorded trajectories are piecewise constant: the value reported at sample
//! time `s` is the collapsed momentum after the last measurement at or before
//! `s`. The wavefunction engine can optionally resolve the unitary spread in
//! the middle of an interval instead (a virtual, non-collapsing measurement
//! draw at each sample time).

use crate::bessel::{build_kernel, TransitionKernel};
use crate::error::{Error, Result};
use crate::evolution::{KickOperator, ResonanceParams, WaveFunction};
use crate::levy::{LevyParams, MeasurementSchedule};
use crate::rng::UniformStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, OnceLock};

/// Intervals at most this long get their sampling CDF cached and shared.
const KERNEL_CACHE_MAX_INTERVAL: u64 = 1024;

/// Tail tolerance used for kernels built inside the engines.
const ENGINE_TAIL_TOL: f64 = 1e-12;

/// Which evolution backend a trajectory uses between measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Increment drawn from the closed-form kernel. Requires a principal
    /// resonance for the Bessel kernel model.
    #[default]
    ClosedFormKernel,
    /// Full truncated-lattice evolution plus projective measurement.
    FullWavefunction,
}

/// Which family of transition kernels drives the kernel engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelModel {
    /// `q_l(T) = J_l(kappa T)^2`, variance `(kappa T)^2 / 2`.
    Bessel,
    /// Three-point kernel with variance exactly `T^beta`.
    SyntheticBeta { beta: f64 },
}

/// Everything needed to run one ensemble deterministically.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub horizon: u64,
    /// Strictly increasing sample times within `[1, horizon]`.
    pub sample_times: Vec<u64>,
    pub master_seed: u64,
    pub resonance: ResonanceParams,
    pub levy: LevyParams,
    pub engine: EngineKind,
    pub kernel_model: KernelModel,
    /// Wavefunction engine only: resolve sample times inside an interval with
    /// a virtual (non-collapsing) measurement draw instead of holding the
    /// last collapsed momentum.
    pub mid_interval_sampling: bool,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories < 2 {
            return Err(Error::config("an ensemble needs at least 2 trajectories"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be positive"));
        }
        if self.sample_times.is_empty() {
            return Err(Error::config("sample_times must not be empty"));
        }
        let mut prev = 0u64;
        for &t in &self.sample_times {
            if t <= prev && prev != 0 {
                return Err(Error::config("sample_times must be strictly increasing"));
            }
            if t < 1 || t > self.horizon {
                return Err(Error::config(format!(
                    "sample time {t} lies outside [1, horizon={}]",
                    self.horizon
                )));
            }
            prev = t;
        }
        if let KernelModel::SyntheticBeta { beta } = self.kernel_model {
            if !(beta > 0.0 && beta <= 2.0) {
                return Err(Error::config(format!(
                    "synthetic kernel exponent must lie in (0, 2], got {beta}"
                )));
            }
        }
        if self.engine == EngineKind::ClosedFormKernel
            && matches!(self.kernel_model, KernelModel::Bessel)
            && !self.resonance.is_principal()
        {
            return Err(Error::config(
                "the closed-form kernel engine requires a principal resonance (p/q integer)",
            ));
        }
        if self.mid_interval_sampling && self.engine != EngineKind::FullWavefunction {
            return Err(Error::config(
                "mid-interval sampling is only defined for the wavefunction engine",
            ));
        }
        Ok(())
    }
}

/// Ensemble variance versus time with jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSeries {
    pub times: Vec<u64>,
    pub variance: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_effective: usize,
}

/// A variance series together with the per-trajectory momentum samples that
/// produced it (trajectory-major), for resampling-based uncertainty bands.
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub series: VarianceSeries,
    pub trajectories: Vec<Vec<i64>>,
}

/// Probability distribution over the momentum lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDistribution {
    offset: i64,
    probabilities: Vec<f64>,
}

impl MomentumDistribution {
    pub fn delta(l: i64) -> Self {
        Self {
            offset: l,
            probabilities: vec![1.0],
        }
    }

    pub fn new(offset: i64, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::domain("distribution needs at least one site"));
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::domain("probabilities must be finite and nonnegative"));
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::numerical(format!(
                "distribution sums to {total}, expected 1"
            )));
        }
        Ok(Self {
            offset,
            probabilities,
        })
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, l: i64) -> f64 {
        let idx = l - self.offset;
        if idx < 0 || idx >= self.probabilities.len() as i64 {
            0.0
        } else {
            self.probabilities[idx as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| (self.offset + i as i64) as f64 * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = (self.offset + i as i64) as f64 - mean;
                d * d * p
            })
            .sum()
    }

    /// Convolution with a transition kernel; support grows by the kernel
    /// half-width on each side. The result is renormalized so that repeated
    /// propagation conserves probability exactly.
    pub fn convolve(&self, kernel: &TransitionKernel) -> Self {
        let hw = kernel.half_width();
        if hw == 0 {
            return self.clone();
        }
        let w = kernel.weights();
        let n = self.probabilities.len();
        let mut out = vec![0.0_f64; n + 2 * hw];
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (k, &wk) in w.iter().enumerate() {
                out[i + k] += p * wk;
            }
        }
        let total: f64 = out.iter().sum();
        let inv = 1.0 / total;
        for v in &mut out {
            *v *= inv;
        }
        Self {
            offset: self.offset - hw as i64,
            probabilities: out,
        }
    }
}

/// Three-point kernel with mean zero and variance exactly `T^beta`.
///
/// Mass `p/2` sits at `+-k` with `k = ceil(T^(beta/2))` and `p = T^beta / k^2`
/// (clamped to 1 against roundoff); the remainder stays at the origin.
/// `T = 0` is the delta kernel.
pub fn synthetic_kernel(beta: f64, interval: u64) -> Result<TransitionKernel> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::domain(format!(
            "synthetic kernel exponent must lie in (0, 2], got {beta}"
        )));
    }
    if interval == 0 {
        return TransitionKernel::from_half_weights(vec![1.0], 1.0, 0);
    }
    let (k, p) = synthetic_jump(beta, interval);
    let mut half = vec![0.0; k as usize + 1];
    half[0] = 1.0 - p;
    half[k as usize] = p / 2.0;
    TransitionKernel::from_half_weights(half, 1.0, interval)
}

/// Jump distance and total jump probability of the synthetic kernel.
fn synthetic_jump(beta: f64, interval: u64) -> (u64, f64) {
    let t = interval as f64;
    let k = t.powf(beta / 2.0).ceil();
    let p = (t.powf(beta) / (k * k)).min(1.0);
    (k as u64, p)
}

/// Shared, lock-free cache of sampling CDFs for the Bessel kernels.
///
/// Small intervals repeat constantly under a heavy-tailed waiting time, so
/// their cumulative kernels are built once (whichever thread gets there
/// first) and shared; rare long intervals are built on demand and dropped.
pub struct KernelCdfCache {
    kappa: f64,
    slots: Vec<OnceLock<KernelCdf>>,
}

struct KernelCdf {
    half_width: i64,
    /// Cumulative weights over `l = idx - half_width`; the last entry is 1.
    cumulative: Vec<f64>,
}

impl KernelCdf {
    fn from_kernel(kernel: &TransitionKernel) -> Self {
        let mut cumulative = Vec::with_capacity(kernel.weights().len());
        let mut acc = 0.0;
        for &w in kernel.weights() {
            acc += w;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Self {
            half_width: kernel.half_width() as i64,
            cumulative,
        }
    }

    /// Smallest `l` whose cumulative probability exceeds `u` (ascending scan).
    fn sample(&self, u: f64) -> i64 {
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as i64 - self.half_width
    }
}

impl KernelCdfCache {
    pub fn new(kappa: f64) -> Self {
        let slots = (0..=KERNEL_CACHE_MAX_INTERVAL as usize)
            .map(|_| OnceLock::new())
            .collect();
        Self { kappa, slots }
    }

    fn cdf(&self, interval: u64) -> Result<Arc<KernelCdf>> {
        let build = || -> Result<Arc<KernelCdf>> {
            let kernel = build_kernel(self.kappa, interval, ENGINE_TAIL_TOL)?;
            Ok(Arc::new(KernelCdf::from_kernel(&kernel)))
        };
        if interval <= KERNEL_CACHE_MAX_INTERVAL {
            let slot = &self.slots[interval as usize];
            if let Some(cdf) = slot.get() {
                return Ok(cdf.clone());
            }
            let cdf = build()?;
            Ok(slot.get_or_init(|| cdf).clone())
        } else {
            build()
        }
    }

    /// One momentum increment for an interval of `interval` kicks.
    pub fn sample(&self, interval: u64, u: f64) -> Result<i64> {
        if interval == 0 {
            return Ok(0);
        }
        Ok(self.cdf(interval)?.sample(u))
    }
}

enum IncrementSampler {
    Bessel(KernelCdfCache),
    Synthetic { beta: f64 },
}

impl IncrementSampler {
    fn for_config(cfg: &EnsembleConfig) -> Self {
        match cfg.kernel_model {
            KernelModel::Bessel => IncrementSampler::Bessel(KernelCdfCache::new(cfg.resonance.kappa())),
            KernelModel::SyntheticBeta { beta } => IncrementSampler::Synthetic { beta },
        }
    }

    fn sample(&self, interval: u64, u: f64) -> Result<i64> {
        match self {
            IncrementSampler::Bessel(cache) => cache.sample(interval, u),
            IncrementSampler::Synthetic { beta } => {
                if interval == 0 {
                    return Ok(0);
                }
                let (k, p) = synthetic_jump(*beta, interval);
                // Ascending-scan convention over {-k, 0, +k}.
                Ok(if u < p / 2.0 {
                    -(k as i64)
                } else if u < 1.0 - p / 2.0 {
                    0
                } else {
                    k as i64
                })
            }
        }
    }
}

/// Interval source for a trajectory; tests substitute fixed schedules.
enum IntervalSource<'a> {
    Levy(&'a LevyParams),
    Fixed(&'a [u64]),
}

impl IntervalSource<'_> {
    fn next(&self, epoch: usize, stream: &mut UniformStream) -> Result<Option<u64>> {
        match self {
            IntervalSource::Levy(params) => {
                Ok(Some(params.sample_interval(stream.next_f64())?))
            }
            IntervalSource::Fixed(intervals) => Ok(intervals.get(epoch).copied()),
        }
    }
}

fn kernel_trajectory(
    cfg: &EnsembleConfig,
    sampler: &IncrementSampler,
    source: &IntervalSource,
    stream_id: u64,
) -> Result<Vec<i64>> {
    let times = &cfg.sample_times;
    let mut stream = UniformStream::from_master(cfg.master_seed, stream_id);
    let mut out = Vec::with_capacity(times.len());
    let mut momentum: i64 = 0;
    let mut clock: u64 = 0;
    let mut idx = 0;
    let mut epoch = 0;
    while idx < times.len() {
        let Some(interval) = source.next(epoch, &mut stream)? else {
            break;
        };
        epoch += 1;
        let next = clock.saturating_add(interval);
        while idx < times.len() && times[idx] < next {
            out.push(momentum);
            idx += 1;
        }
        if next > cfg.horizon {
            break;
        }
        let u = stream.next_f64();
        momentum += sampler.sample(interval, u)?;
        clock = next;
    }
    // A fixed source can run out of intervals before the horizon.
    while idx < times.len() {
        out.push(momentum);
        idx += 1;
    }
    Ok(out)
}

fn wavefunction_trajectory(
    cfg: &EnsembleConfig,
    op: &KickOperator,
    source: &IntervalSource,
    stream_id: u64,
) -> Result<Vec<i64>> {
    let times = &cfg.sample_times;
    let mut stream = UniformStream::from_master(cfg.master_seed, stream_id);
    let mut out = Vec::with_capacity(times.len());
    let mut momentum: i64 = 0;
    let mut clock: u64 = 0;
    let mut idx = 0;
    let mut epoch = 0;
    while idx < times.len() {
        let Some(interval) = source.next(epoch, &mut stream)? else {
            break;
        };
        epoch += 1;
        let next = clock.saturating_add(interval);

        if cfg.mid_interval_sampling {
            // Walk the unitary evolution and answer mid-interval sample times
            // with a virtual measurement draw that does not collapse anything.
            let mut psi = WaveFunction::eigenstate(momentum);
            let mut kicks_done: u64 = 0;
            while idx < times.len() && times[idx] < next {
                let s = times[idx];
                if s <= clock {
                    out.push(momentum);
                } else {
                    let target = s - clock;
                    psi.evolve_with(op, target - kicks_done)?;
                    kicks_done = target;
                    let (virtual_outcome, _) = psi.measure_momentum(stream.next_f64())?;
                    out.push(virtual_outcome.momentum);
                }
                idx += 1;
            }
            if next > cfg.horizon {
                break;
            }
            psi.evolve_with(op, interval - kicks_done)?;
            let (outcome, _) = psi.measure_momentum(stream.next_f64())?;
            momentum = outcome.momentum;
        } else {
            while idx < times.len() && times[idx] < next {
                out.push(momentum);
                idx += 1;
            }
            if next > cfg.horizon {
                break;
            }
            let mut psi = WaveFunction::eigenstate(momentum);
            psi.evolve_with(op, interval)?;
            let (outcome, _) = psi.measure_momentum(stream.next_f64())?;
            momentum = outcome.momentum;
        }
        clock = next;
    }
    while idx < times.len() {
        out.push(momentum);
        idx += 1;
    }
    Ok(out)
}

fn trajectory_with(
    cfg: &EnsembleConfig,
    sampler: &IncrementSampler,
    op: Option<&KickOperator>,
    source: &IntervalSource,
    stream_id: u64,
) -> Result<Vec<i64>> {
    match cfg.engine {
        EngineKind::ClosedFormKernel => kernel_trajectory(cfg, sampler, source, stream_id),
        EngineKind::FullWavefunction => {
            let op = op.expect("kick operator prepared for wavefunction engine");
            wavefunction_trajectory(cfg, op, source, stream_id)
        }
    }
}

/// Momenta recorded at `cfg.sample_times` for one trajectory stream.
pub fn run_trajectory(cfg: &EnsembleConfig, stream_id: u64) -> Result<Vec<i64>> {
    cfg.validate()?;
    let sampler = IncrementSampler::for_config(cfg);
    let op = match cfg.engine {
        EngineKind::FullWavefunction => Some(KickOperator::new(&cfg.resonance)),
        EngineKind::ClosedFormKernel => None,
    };
    trajectory_with(cfg, &sampler, op.as_ref(), &IntervalSource::Levy(&cfg.levy), stream_id)
}

/// Runs the full ensemble and aggregates the variance series.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<VarianceSeries> {
    run_ensemble_detailed(cfg).map(|r| r.series)
}

/// Like [`run_ensemble`] but keeps the per-trajectory samples, which the
/// bootstrap slope band needs.
pub fn run_ensemble_detailed(cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    cfg.validate()?;
    let sampler = IncrementSampler::for_config(cfg);
    let op = match cfg.engine {
        EngineKind::FullWavefunction => Some(KickOperator::new(&cfg.resonance)),
        EngineKind::ClosedFormKernel => None,
    };
    let trajectories = ensemble_samples(cfg, &sampler, op.as_ref(), None)?;
    let series = series_from_samples(&cfg.sample_times, &trajectories);
    Ok(EnsembleResult {
        series,
        trajectories,
    })
}

/// Ensemble in which every trajectory follows the same fixed schedule; used
/// by the Monte Carlo versus master-equation convergence checks.
pub fn run_ensemble_fixed_schedule(
    cfg: &EnsembleConfig,
    schedule: &MeasurementSchedule,
) -> Result<VarianceSeries> {
    cfg.validate()?;
    let sampler = IncrementSampler::for_config(cfg);
    let op = match cfg.engine {
        EngineKind::FullWavefunction => Some(KickOperator::new(&cfg.resonance)),
        EngineKind::ClosedFormKernel => None,
    };
    let trajectories = ensemble_samples(cfg, &sampler, op.as_ref(), Some(schedule.intervals()))?;
    Ok(series_from_samples(&cfg.sample_times, &trajectories))
}

fn ensemble_samples(
    cfg: &EnsembleConfig,
    sampler: &IncrementSampler,
    op: Option<&KickOperator>,
    fixed: Option<&[u64]>,
) -> Result<Vec<Vec<i64>>> {
    // Stream ids are pre-assigned and results collected in stream order, so
    // the outcome does not depend on the worker count.
    (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|stream_id| {
            let source = match fixed {
                Some(intervals) => IntervalSource::Fixed(intervals),
                None => IntervalSource::Levy(&cfg.levy),
            };
            trajectory_with(cfg, sampler, op, &source, stream_id)
        })
        .collect()
}

/// Cross-trajectory variance (`E[l^2] - E[l]^2`) and jackknife standard error
/// at each sample time. Momentum sums are accumulated in exact integer
/// arithmetic, so the result is independent of summation order.
fn series_from_samples(times: &[u64], trajectories: &[Vec<i64>]) -> VarianceSeries {
    let n = trajectories.len();
    let nf = n as f64;
    let mut variance = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let mut s1: i128 = 0;
        let mut s2: i128 = 0;
        for traj in trajectories {
            let x = traj[j] as i128;
            s1 += x;
            s2 += x * x;
        }
        let m1 = s1 as f64 / nf;
        let m2 = s2 as f64 / nf;
        variance.push(m2 - m1 * m1);

        // Jackknife over trajectories: leave-one-out variances in stream order.
        let nm1 = nf - 1.0;
        let mut mean_acc = 0.0;
        for traj in trajectories {
            let x = traj[j] as i128;
            let m1i = (s1 - x) as f64 / nm1;
            let m2i = (s2 - x * x) as f64 / nm1;
            mean_acc += m2i - m1i * m1i;
        }
        let vbar = mean_acc / nf;
        let mut ssq = 0.0;
        for traj in trajectories {
            let x = traj[j] as i128;
            let m1i = (s1 - x) as f64 / nm1;
            let m2i = (s2 - x * x) as f64 / nm1;
            let d = (m2i - m1i * m1i) - vbar;
            ssq += d * d;
        }
        stderr.push((nm1 / nf * ssq).sqrt());
    }
    VarianceSeries {
        times: times.to_vec(),
        variance,
        stderr,
        n_effective: n,
    }
}

/// Exact variance added by a schedule: `(kappa^2 / 2) * sum T_i^2`.
///
/// This is the closed form the variance recursion telescopes to, and the
/// master-equation propagation must reproduce it to 1e-8 relative.
pub fn schedule_variance(schedule: &MeasurementSchedule, kappa: f64) -> f64 {
    let mut sum: u128 = 0;
    let mut overflow = false;
    for &t in schedule.intervals() {
        match (t as u128).checked_mul(t as u128).and_then(|sq| sum.checked_add(sq)) {
            Some(s) => sum = s,
            None => {
                overflow = true;
                break;
            }
        }
    }
    if overflow {
        return f64::INFINITY;
    }
    kappa * kappa / 2.0 * sum as f64
}

/// Propagates a distribution through every interval of a schedule, returning
/// snapshots after the epochs listed in `snapshot_epochs` (1-based count of
/// completed intervals; 0 is the initial state).
pub fn propagate_master(
    initial: &MomentumDistribution,
    schedule: &MeasurementSchedule,
    kappa: f64,
    snapshot_epochs: &[usize],
) -> Result<Vec<MomentumDistribution>> {
    let mut snapshots = Vec::with_capacity(snapshot_epochs.len());
    let mut current = initial.clone();
    let mut want = snapshot_epochs.iter().peekable();
    if let Some(&&0) = want.peek() {
        snapshots.push(current.clone());
        want.next();
    }
    for (i, &interval) in schedule.intervals().iter().enumerate() {
        let kernel = build_kernel(kappa, interval, ENGINE_TAIL_TOL)?;
        current = current.convolve(&kernel);
        if let Some(&&e) = want.peek() {
            if e == i + 1 {
                snapshots.push(current.clone());
                want.next();
            }
        }
    }
    if want.peek().is_some() {
        return Err(Error::config(
            "snapshot epoch beyond the end of the schedule",
        ));
    }
    Ok(snapshots)
}

/// Clock time and distribution variance after each interval of a schedule,
/// starting from the initial state at time zero.
pub fn master_variance_series(
    initial: &MomentumDistribution,
    schedule: &MeasurementSchedule,
    kappa: f64,
) -> Result<Vec<(u128, f64)>> {
    let mut out = Vec::with_capacity(schedule.intervals().len() + 1);
    let mut clock: u128 = 0;
    let mut current = initial.clone();
    out.push((clock, current.variance()));
    for &interval in schedule.intervals() {
        let kernel = build_kernel(kappa, interval, ENGINE_TAIL_TOL)?;
        current = current.convolve(&kernel);
        clock += interval as u128;
        out.push((clock, current.variance()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn base_config(alpha: f64, horizon: u64, n: usize) -> EnsembleConfig {
        EnsembleConfig {
            n_trajectories: n,
            horizon,
            sample_times: crate::config::log_spaced_times(horizon, 10),
            master_seed: 99,
            resonance: ResonanceParams::new(1, 1, 1.0).unwrap(),
            levy: LevyParams::new(alpha).unwrap(),
            engine: EngineKind::ClosedFormKernel,
            kernel_model: KernelModel::Bessel,
            mid_interval_sampling: false,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = base_config(1.5, 100, 10);
        cfg.n_trajectories = 1;
        assert!(cfg.validate().is_err());

        let mut cfg = base_config(1.5, 100, 10);
        cfg.resonance = ResonanceParams::new(1, 2, 1.0).unwrap();
        assert!(cfg.validate().is_err());
        cfg.engine = EngineKind::FullWavefunction;
        assert!(cfg.validate().is_ok());

        let mut cfg = base_config(1.5, 100, 10);
        cfg.mid_interval_sampling = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn vanishing_kick_strength_keeps_trajectories_at_origin() {
        let mut cfg = base_config(1.0, 1000, 4);
        cfg.resonance = ResonanceParams::new(1, 1, 1e-9).unwrap();
        for id in 0..4 {
            let samples = run_trajectory(&cfg, id).unwrap();
            assert!(samples.iter().all(|&l| l == 0));
        }
    }

    #[test]
    fn unit_intervals_give_diffusive_growth() {
        // Every interval forced to one kick: sigma^2(t) = t * m2(kernel(kappa, 1)).
        // The oracle is a direct i.i.d. sum of kernel draws, i.e. t times the
        // kernel second moment, with m2 = kappa^2/2 here.
        let cfg = base_config(1.0, 512, 3000);
        let schedule = MeasurementSchedule::from_intervals(vec![1u64; 512], 512).unwrap();
        let series = run_ensemble_fixed_schedule(&cfg, &schedule).unwrap();
        let m2 = build_kernel(1.0, 1, 1e-12).unwrap().moments().1;
        assert_relative_eq!(m2, 0.5, max_relative = 1e-9);
        for (i, &t) in series.times.iter().enumerate() {
            let want = t as f64 * m2;
            let got = series.variance[i];
            let tol = 5.0 * series.stderr[i].max(1e-6);
            assert!(
                (got - want).abs() <= tol,
                "t={t}: variance {got} vs {want} +- {tol}"
            );
        }
    }

    #[test]
    fn monte_carlo_converges_to_schedule_variance() {
        // One fixed schedule shared by all trajectories; the ensemble variance
        // approaches (kappa^2/2) sum T_i^2 at the 1/sqrt(n) rate.
        let mut stream = UniformStream::from_seed(7);
        let levy = LevyParams::new(1.5).unwrap();
        let schedule = MeasurementSchedule::sample_count(&levy, 64, &mut stream).unwrap();
        let horizon = schedule.realized_time() as u64;
        let exact = schedule_variance(&schedule, 1.0);

        let mut errs = Vec::new();
        for &n in &[1000usize, 10000] {
            let mut cfg = base_config(1.5, horizon, n);
            cfg.sample_times = vec![horizon];
            let series = run_ensemble_fixed_schedule(&cfg, &schedule).unwrap();
            errs.push((series.variance[0] - exact).abs() / exact);
        }
        // 10x the trajectories should shrink the error by roughly sqrt(10);
        // allow generous slack for the stochastic ratio.
        assert!(errs[1] < errs[0], "errors {errs:?} did not decrease");
        assert!(errs[1] < 0.1, "n=10^4 error too large: {errs:?}");
    }

    #[test]
    fn determinism_across_thread_counts() {
        let cfg = base_config(1.5, 2000, 64);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_ensemble(&cfg))
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_ensemble(&cfg))
            .unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn propagate_master_examples() {
        let delta = MomentumDistribution::delta(0);

        // T = 0 leaves the distribution unchanged.
        let schedule = MeasurementSchedule::from_intervals(vec![0], 0).unwrap();
        let out = propagate_master(&delta, &schedule, 1.0, &[1]).unwrap();
        assert_eq!(out[0], delta);

        // A single interval reproduces the kernel weights.
        let schedule = MeasurementSchedule::from_intervals(vec![7], 7).unwrap();
        let out = propagate_master(&delta, &schedule, 1.0, &[1]).unwrap();
        let kernel = build_kernel(1.0, 7, 1e-12).unwrap();
        for l in -(kernel.half_width() as i64)..=kernel.half_width() as i64 {
            assert_abs_diff_eq!(out[0].probability(l), kernel.weight(l), epsilon = 1e-14);
        }

        // Two intervals: variance (kappa^2/2)(9 + 16).
        let schedule = MeasurementSchedule::from_intervals(vec![3, 4], 7).unwrap();
        let out = propagate_master(&delta, &schedule, 1.0, &[2]).unwrap();
        assert_relative_eq!(out[0].variance(), 12.5, max_relative = 1e-10);
    }

    #[test]
    fn schedule_variance_examples() {
        let kappa = 1.0;
        let empty = MeasurementSchedule::from_intervals(vec![], 0).unwrap();
        assert_eq!(schedule_variance(&empty, kappa), 0.0);

        let ones = MeasurementSchedule::from_intervals(vec![1, 1, 1, 1], 4).unwrap();
        assert_eq!(schedule_variance(&ones, 1.0), 2.0);

        let ten = MeasurementSchedule::from_intervals(vec![10], 10).unwrap();
        assert_eq!(schedule_variance(&ten, 2.0), 200.0);
    }

    #[test]
    fn exactness_chain_master_vs_closed_form() {
        let mut stream = UniformStream::from_seed(11);
        let levy = LevyParams::new(1.5).unwrap();
        let schedule = MeasurementSchedule::sample_count(&levy, 200, &mut stream).unwrap();
        let exact = schedule_variance(&schedule, 1.3);
        let series = master_variance_series(&MomentumDistribution::delta(0), &schedule, 1.3).unwrap();
        let final_var = series.last().unwrap().1;
        assert_relative_eq!(final_var, exact, max_relative = 1e-8);
    }

    #[test]
    fn synthetic_kernel_examples() {
        // beta = 2, T = 3: two-point kernel at +-3 with p = 1.
        let k = synthetic_kernel(2.0, 3).unwrap();
        assert_eq!(k.half_width(), 3);
        assert_eq!(k.weight(3), 0.5);
        assert_eq!(k.weight(0), 0.0);
        assert_relative_eq!(k.moments().1, 9.0, max_relative = 1e-12);

        // beta = 1, T = 9: variance exactly 9.
        let k = synthetic_kernel(1.0, 9).unwrap();
        assert_relative_eq!(k.moments().1, 9.0, max_relative = 1e-12);

        // T = 1 has variance 1 for any beta.
        for &beta in &[0.3, 1.0, 1.7, 2.0] {
            let k = synthetic_kernel(beta, 1).unwrap();
            assert_relative_eq!(k.moments().1, 1.0, max_relative = 1e-12);
        }

        // T = 0 is the delta kernel.
        let k = synthetic_kernel(1.0, 0).unwrap();
        assert_eq!(k.half_width(), 0);
    }

    #[test]
    fn synthetic_variance_exact_over_range() {
        for &beta in &[0.4, 1.0, 1.5, 2.0] {
            for t in 1..100u64 {
                let k = synthetic_kernel(beta, t).unwrap();
                let want = (t as f64).powf(beta);
                assert_relative_eq!(k.moments().1, want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn engines_share_interval_streams() {
        // With the same master seed both engines face identical schedules, so
        // the recorded series correlate point by point.
        let mut cfg = base_config(1.5, 300, 40);
        cfg.master_seed = 5;
        let kernel: Vec<Vec<i64>> = (0..40).map(|i| run_trajectory(&cfg, i).unwrap()).collect();
        cfg.engine = EngineKind::FullWavefunction;
        let wf: Vec<Vec<i64>> = (0..40).map(|i| run_trajectory(&cfg, i).unwrap()).collect();
        // The increments are drawn through the same inverse-CDF convention on
        // distributions equal to 1e-8, so paired trajectories rarely diverge.
        let mut agree = 0usize;
        let mut total = 0usize;
        for (a, b) in kernel.iter().zip(&wf) {
            for (x, y) in a.iter().zip(b) {
                total += 1;
                if x == y {
                    agree += 1;
                }
            }
        }
        assert!(
            agree as f64 >= 0.99 * total as f64,
            "only {agree}/{total} samples agree across engines"
        );
    }
}
