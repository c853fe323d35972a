//! Flat key-value run configuration with strict validation.
//!
//! The same JSON document serves as the input config and as the emitted run
//! manifest: loading a manifest and re-running reproduces the outputs byte
//! for byte. Unknown keys are rejected.

use crate::engine::{EngineKind, EnsembleConfig, KernelModel};
use crate::error::{Error, Result};
use crate::evolution::ResonanceParams;
use crate::levy::{FloorPolicy, LevyParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelModelName {
    #[default]
    Bessel,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Waiting-time tail exponent, in (0, 2].
    pub alpha: f64,
    #[serde(default = "defaults::kappa")]
    pub kappa: f64,
    #[serde(default = "defaults::one_u32")]
    pub resonance_p: u32,
    #[serde(default = "defaults::one_u32")]
    pub resonance_q: u32,
    #[serde(default)]
    pub floor_policy: FloorPolicy,
    #[serde(default)]
    pub engine: EngineKind,
    #[serde(default)]
    pub kernel_model: KernelModelName,
    /// Single-interval variance exponent for the synthetic kernel.
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    #[serde(default = "defaults::n_trajectories")]
    pub n_trajectories: usize,
    #[serde(default = "defaults::horizon")]
    pub horizon: u64,
    #[serde(default = "defaults::master_seed")]
    pub master_seed: u64,
    #[serde(default = "defaults::points_per_decade")]
    pub points_per_decade: u32,
    /// Lower edge of the fit window; default is sqrt(horizon).
    #[serde(default)]
    pub fit_t_min: Option<u64>,
    #[serde(default = "defaults::bootstrap_resamples")]
    pub bootstrap_resamples: usize,
    /// Acceptance tolerance on |fitted 2c - theoretical 2c|.
    #[serde(default = "defaults::tolerance_2c")]
    pub tolerance_2c: f64,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub emit_svg: bool,
    #[serde(default)]
    pub mid_interval_sampling: bool,
    /// Sweep lists; empty means "use the scalar field".
    #[serde(default)]
    pub alpha_values: Vec<f64>,
    #[serde(default)]
    pub kappa_values: Vec<f64>,
    #[serde(default)]
    pub beta_values: Vec<f64>,
    /// Version stamp carried by manifests; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_version: Option<String>,
}

mod defaults {
    pub fn kappa() -> f64 {
        1.0
    }
    pub fn one_u32() -> u32 {
        1
    }
    pub fn beta() -> f64 {
        2.0
    }
    pub fn n_trajectories() -> usize {
        1000
    }
    pub fn horizon() -> u64 {
        1_000_000
    }
    pub fn master_seed() -> u64 {
        1
    }
    pub fn points_per_decade() -> u32 {
        20
    }
    pub fn bootstrap_resamples() -> usize {
        200
    }
    pub fn tolerance_2c() -> f64 {
        0.15
    }
    pub fn out_dir() -> String {
        "out".to_string()
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 2], got {}",
                self.alpha
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::config(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.resonance_p == 0 || self.resonance_q == 0 {
            return Err(Error::config("resonance_p and resonance_q must be positive"));
        }
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(Error::config(format!("beta must lie in (0, 2], got {}", self.beta)));
        }
        if self.n_trajectories < 2 {
            return Err(Error::config("n_trajectories must be at least 2"));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon must be positive"));
        }
        if self.points_per_decade < 1 {
            return Err(Error::config("points_per_decade must be at least 1"));
        }
        if let Some(t) = self.fit_t_min {
            if t > self.horizon {
                return Err(Error::config("fit_t_min exceeds the horizon"));
            }
        }
        if !(self.tolerance_2c > 0.0) {
            return Err(Error::config("tolerance_2c must be positive"));
        }
        if !self.beta_values.is_empty() && self.kernel_model != KernelModelName::Synthetic {
            return Err(Error::config(
                "beta_values requires kernel_model = \"synthetic\"",
            ));
        }
        for &a in &self.alpha_values {
            if !(a > 0.0 && a <= 2.0) {
                return Err(Error::config(format!("swept alpha {a} outside (0, 2]")));
            }
        }
        for &k in &self.kappa_values {
            if !(k > 0.0) {
                return Err(Error::config(format!("swept kappa {k} must be positive")));
            }
        }
        for &b in &self.beta_values {
            if !(b > 0.0 && b <= 2.0) {
                return Err(Error::config(format!("swept beta {b} outside (0, 2]")));
            }
        }
        Ok(())
    }

    /// Effective lower fit edge: configured value or sqrt(horizon) rounded.
    pub fn effective_fit_t_min(&self) -> u64 {
        self.fit_t_min
            .unwrap_or_else(|| ((self.horizon as f64).sqrt().round() as u64).max(1))
    }

    /// The kernel exponent the exponent law should be compared against:
    /// 2 for the Bessel kernel, the configured beta for the synthetic one.
    pub fn effective_beta(&self) -> f64 {
        match self.kernel_model {
            KernelModelName::Bessel => 2.0,
            KernelModelName::Synthetic => self.beta,
        }
    }

    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        self.validate()?;
        let cfg = EnsembleConfig {
            n_trajectories: self.n_trajectories,
            horizon: self.horizon,
            sample_times: log_spaced_times(self.horizon, self.points_per_decade),
            master_seed: self.master_seed,
            resonance: ResonanceParams::new(self.resonance_p, self.resonance_q, self.kappa)?,
            levy: LevyParams::with_policy(self.alpha, self.floor_policy)?,
            engine: self.engine,
            kernel_model: match self.kernel_model {
                KernelModelName::Bessel => KernelModel::Bessel,
                KernelModelName::Synthetic => KernelModel::SyntheticBeta { beta: self.beta },
            },
            mid_interval_sampling: self.mid_interval_sampling,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy with every default materialized and the version stamped, i.e. the
    /// run manifest.
    pub fn resolved(&self, version: &str) -> RunConfig {
        let mut cfg = self.clone();
        cfg.artifact_version = Some(version.to_string());
        cfg
    }
}

/// Log-spaced integer sample times, `points_per_decade` per decade, deduped,
/// within `[1, horizon]` and always ending at the horizon.
pub fn log_spaced_times(horizon: u64, points_per_decade: u32) -> Vec<u64> {
    let mut times = Vec::new();
    let mut k = 0u32;
    loop {
        let t = 10f64.powf(k as f64 / points_per_decade as f64).round() as u64;
        if t > horizon {
            break;
        }
        if times.last() != Some(&t) {
            times.push(t.max(1));
        }
        k += 1;
    }
    if times.last() != Some(&horizon) {
        times.push(horizon);
    }
    times
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_json_str(r#"{"alpha": 1.5}"#).unwrap();
        assert_eq!(cfg.kappa, 1.0);
        assert_eq!(cfg.horizon, 1_000_000);
        assert_eq!(cfg.points_per_decade, 20);
        assert_eq!(cfg.effective_fit_t_min(), 1000);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_json_str(r#"{"alpha": 1.5, "alpha_tail": 2}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_json_str(r#"{"alpha": 2.5}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"alpha": 1.0, "kappa": -1}"#).is_err());
        assert!(RunConfig::from_json_str(r#"{"alpha": 1.0, "n_trajectories": 1}"#).is_err());
        assert!(
            RunConfig::from_json_str(r#"{"alpha": 1.0, "beta_values": [1.0]}"#).is_err(),
            "beta sweep requires the synthetic kernel"
        );
    }

    #[test]
    fn log_spacing_covers_range() {
        let times = log_spaced_times(1_000_000, 20);
        assert_eq!(times.first(), Some(&1));
        assert_eq!(times.last(), Some(&1_000_000));
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        // Roughly 20 per decade once past the small-integer rounding regime.
        let in_last_decade = times.iter().filter(|&&t| t > 100_000).count();
        assert!((19..=21).contains(&in_last_decade), "{in_last_decade}");
    }

    #[test]
    fn manifest_round_trip_is_identity() {
        let cfg = RunConfig::from_json_str(r#"{"alpha": 1.2, "horizon": 10000}"#).unwrap();
        let manifest = cfg.resolved("0.1.0");
        let text = serde_json::to_string_pretty(&manifest).unwrap();
        let reparsed = RunConfig::from_json_str(&text).unwrap();
        assert_eq!(manifest, reparsed);
    }
}
