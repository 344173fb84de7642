use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sot_core::dataset::DatasetSpec;
use sot_core::estimator::EstimatorConfig;
use sot_core::losses::{MssConfig, SotConfig, SweepConfig, DEFAULT_SCALES};
use sot_core::{Split, Variant};

use crate::CliError;

pub const SEED_ENV: &str = "SOT_SEED";

/// Everything a command can be configured with. Every section is optional;
/// unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub estimator: EstimatorConfig,
    pub study: StudySettings,
    pub sweep: SweepSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySettings {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub split: Split,
    /// Load this generated dataset instead of regenerating in memory.
    pub dataset_dir: Option<PathBuf>,
    /// Bias the initial pitch logits towards each example's true f0.
    pub hint_bias: Option<f64>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Sot2048, Variant::MssLin, Variant::SotNoCut],
            seeds: (0..5).collect(),
            split: Split::Test,
            dataset_dir: None,
            hint_bias: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub ref_freq_hz: f64,
    pub max_delta_hz: f64,
    pub step_hz: f64,
    pub n_samples: usize,
    pub sample_rate: f64,
    pub single_scale: MssConfig,
    pub multi_scale: MssConfig,
    pub sot: SotConfig,
}

impl Default for SweepSettings {
    fn default() -> Self {
        let base = SweepConfig::default();
        Self {
            ref_freq_hz: base.ref_freq,
            max_delta_hz: 2000.0,
            step_hz: 50.0,
            n_samples: base.n_samples,
            sample_rate: base.sample_rate,
            single_scale: base.single_scale,
            multi_scale: MssConfig::lin(&DEFAULT_SCALES),
            sot: base.sot,
        }
    }
}

impl SweepSettings {
    pub fn to_sweep(&self) -> Result<SweepConfig, CliError> {
        if !(self.step_hz > 0.0 && self.max_delta_hz >= 0.0) {
            return Err(CliError::Usage("sweep step must be positive and range nonnegative".into()));
        }
        let n = (self.max_delta_hz / self.step_hz).round() as i64;
        let with_rate = |mut m: MssConfig| {
            m.sample_rate = self.sample_rate;
            m
        };
        let mut sot = self.sot;
        sot.stft.sample_rate = self.sample_rate;
        Ok(SweepConfig {
            ref_freq: self.ref_freq_hz,
            deltas: (-n..=n).map(|k| k as f64 * self.step_hz).collect(),
            n_samples: self.n_samples,
            sample_rate: self.sample_rate,
            single_scale: with_rate(self.single_scale.clone()),
            multi_scale: with_rate(self.multi_scale.clone()),
            sot,
        })
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = seed_from_env()? {
            cfg.dataset.seed = seed;
            cfg.estimator.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: sot_core::Error| CliError::Usage(format!("invalid config: {e}"));
        self.dataset.validate().map_err(usage)?;
        self.estimator.validate().map_err(usage)?;
        self.sweep.single_scale.validate().map_err(usage)?;
        self.sweep.multi_scale.validate().map_err(usage)?;
        self.sweep.sot.validate().map_err(usage)?;
        if self.study.variants.is_empty() || self.study.seeds.is_empty() {
            return Err(CliError::Usage("invalid config: study needs variants and seeds".into()));
        }
        Ok(())
    }

    /// The estimator must synthesize signals shaped like the dataset's.
    pub fn check_estimator_matches(&self, spec: &DatasetSpec) -> Result<(), CliError> {
        let s = &self.estimator.synth;
        if s.n_samples != spec.n_samples || s.sample_rate != spec.sample_rate || s.hop != spec.hop {
            return Err(CliError::Usage(format!(
                "invalid config: estimator synth ({} samples, {} Hz, hop {}) does not match the dataset ({} samples, {} Hz, hop {})",
                s.n_samples, s.sample_rate, s.hop, spec.n_samples, spec.sample_rate, spec.hop
            )));
        }
        Ok(())
    }
}

pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_depth() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"dataset": {"n_exmples": 3}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"estimator": {"adam": {"lr": 1}}}"#).is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"dataset": {"n_examples": 10}, "study": {"variants": ["SOT-512-LogF"]}}"#)
                .unwrap();
        assert_eq!(cfg.dataset.n_examples, 10);
        assert_eq!(cfg.dataset.f0_range, [40.0, 1950.0]);
        assert_eq!(cfg.study.variants, vec![Variant::Sot512LogF]);
        assert_eq!(cfg.study.seeds.len(), 5);
    }

    #[test]
    fn default_sweep_matches_core_default() {
        let s = SweepSettings::default().to_sweep().unwrap();
        assert_eq!(s, SweepConfig::default());
    }
}
