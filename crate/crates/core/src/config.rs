//! Run configuration read from TOML.
//!
//! ```toml
//! n_crops = 100
//! ratio_lo = 0.5
//! ratio_hi = 0.9
//! seed = 0
//! tau = 1.25
//! temperature = 1.0
//! schedule = "halving"      # or "fixed_initial"
//! fixed_topk = 10
//! # step_weights = [0.5, 0.5, 0, 0, 0, 0]
//! out_size = 224
//! workers = 0               # 0 = one per core
//! # encoder = "toy:world.json"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::EncoderSpec;
use crate::error::{Error, Result};
use crate::geometry::{CropParams, DEFAULT_PATCH_SIZE};
use crate::pipeline::{LgcaConfig, ScheduleMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_crops: usize,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub seed: u64,
    pub tau: f64,
    pub temperature: f64,
    pub schedule: ScheduleMode,
    pub fixed_topk: usize,
    pub step_weights: Option<Vec<f64>>,
    pub out_size: u32,
    pub workers: usize,
    pub encoder: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let lgca = LgcaConfig::default();
        Self {
            n_crops: lgca.crop.n_crops,
            ratio_lo: lgca.crop.ratio_lo,
            ratio_hi: lgca.crop.ratio_hi,
            seed: lgca.crop.seed,
            tau: lgca.tau,
            temperature: lgca.temperature,
            schedule: lgca.schedule,
            fixed_topk: lgca.fixed_topk,
            step_weights: lgca.step_weights,
            out_size: DEFAULT_PATCH_SIZE,
            workers: 0,
            encoder: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn lgca(&self) -> LgcaConfig {
        LgcaConfig {
            crop: CropParams {
                n_crops: self.n_crops,
                ratio_lo: self.ratio_lo,
                ratio_hi: self.ratio_hi,
                seed: self.seed,
            },
            tau: self.tau,
            step_weights: self.step_weights.clone(),
            temperature: self.temperature,
            schedule: self.schedule,
            fixed_topk: self.fixed_topk,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lgca().resolve().map_err(|e| Error::Config(e.to_string()))?;
        if self.out_size == 0 {
            return Err(Error::Config("out_size must be >= 1".into()));
        }
        if let Some(spec) = &self.encoder {
            spec.parse::<EncoderSpec>().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.lgca(), LgcaConfig::default());
    }

    #[test]
    fn overrides_and_schedule_names() {
        let cfg = RunConfig::from_toml(
            "n_crops = 40\nseed = 7\nschedule = \"fixed_initial\"\nfixed_topk = 8\nstep_weights = [1, 0, 0, 0]\n",
        )
        .unwrap();
        let lgca = cfg.lgca();
        assert_eq!(lgca.crop.n_crops, 40);
        assert_eq!(lgca.crop.seed, 7);
        assert_eq!(lgca.schedule().unwrap().topk_per_step, vec![8, 4, 2, 1]);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for text in [
            "n_crops = 1",
            "tau = 0.9",
            "ratio_lo = 0.9\nratio_hi = 0.5",
            "schedule = \"spiral\"",
            "unknown_key = 3",
            "step_weights = [1.0]",
            "encoder = \"gpu:0\"",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }
}
