//! Experiment configuration: a strict TOML schema with four sections.
//!
//! ```toml
//! [device]      # k1 (1/s), k2 (V), c_total, c_couple, c_in (F), v0 (V)
//! [noise]       # sigma0 (V), sigma_coeff (V/sqrt(s))
//! [read]        # u_t (V), kappa, v_dd (V), q (C)
//! [experiment]  # name, seed, sweep grids, trainer blocks
//! output_dir = "out"   # optional, top level
//! ```
//!
//! Every section and field is optional and defaults to the shipped calibration; unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::energy::{NoiseModel, ReadModel};
use crate::error::{Error, Result};
use crate::node::FnParams;
use crate::trainer::network::{BlobSpec, NetworkConfig};
use crate::trainer::TrainerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub k1: f64,
    pub k2: f64,
    pub c_total: f64,
    pub c_couple: f64,
    pub c_in: f64,
    pub v0: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let p = calibration::calibrated_params();
        Self {
            k1: p.k1,
            k2: p.k2,
            c_total: p.c_total,
            c_couple: p.c_couple,
            c_in: calibration::C_IN,
            v0: calibration::V0,
        }
    }
}

impl DeviceConfig {
    pub fn params(&self) -> FnParams {
        FnParams {
            k1: self.k1,
            k2: self.k2,
            c_total: self.c_total,
            c_couple: self.c_couple,
            quantize_charge: false,
        }
    }

    pub fn from_params(p: &FnParams, c_in: f64, v0: f64) -> Self {
        Self {
            k1: p.k1,
            k2: p.k2,
            c_total: p.c_total,
            c_couple: p.c_couple,
            c_in,
            v0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptronBlock {
    pub n_points: usize,
    pub margin: f64,
    pub trainer: TrainerConfig,
    /// Array state file to start from instead of a freshly synchronised pair.
    pub initial_state: Option<String>,
}

impl Default for PerceptronBlock {
    fn default() -> Self {
        Self {
            n_points: 50,
            margin: 1.0,
            trainer: TrainerConfig::default(),
            initial_state: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkBlock {
    pub blobs: BlobSpec,
    pub training: NetworkConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    /// `perceptron` or `network` for `train`; ignored elsewhere.
    pub name: Option<String>,
    /// Master seed for datasets, shuffles, initialisation and mismatch draws.
    pub seed: u64,
    pub energy_horizon_s: f64,
    pub energy_samples: usize,
    /// Age of the cell used by the pulse sweeps and the disturbance trace (s).
    pub probe_age_s: f64,
    /// Largest pulse amplitude any precompensation may choose (V).
    pub amp_max: f64,
    pub amplitude_sweep_v: Vec<f64>,
    pub amplitude_sweep_duration_s: f64,
    pub split_on_time_s: f64,
    pub split_counts: Vec<u64>,
    pub split_amplitude_v: f64,
    /// Weight written by the first pulse of the bidirectional sequence (mV).
    pub bidirectional_step_mv: f64,
    /// Pulses per SET block; the RESET block is twice as long.
    pub bidirectional_block: usize,
    pub count_sweep_max: u64,
    pub count_sweep_amplitude_v: f64,
    pub count_sweep_duration_s: f64,
    pub count_sweep_frequency_hz: f64,
    pub common_mode_step_v: f64,
    pub common_mode_weight_mv: f64,
    pub trace_step_s: f64,
    pub n_devices: usize,
    pub mismatch_sigma: f64,
    pub retention_ages_s: Vec<f64>,
    pub retention_bias_v: Vec<f64>,
    pub retention_weights_mv: Vec<f64>,
    pub retention_horizon_s: f64,
    pub perceptron: PerceptronBlock,
    pub network: NetworkBlock,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            name: None,
            seed: 2,
            energy_horizon_s: calibration::ENERGY_HORIZON,
            energy_samples: 97,
            probe_age_s: 0.0,
            amp_max: crate::cell::DEFAULT_AMP_MAX,
            amplitude_sweep_v: (0..=8).map(|i| 4.1 + 0.05 * i as f64).collect(),
            amplitude_sweep_duration_s: 0.01,
            split_on_time_s: 0.1,
            split_counts: vec![1, 2, 4, 8],
            split_amplitude_v: 4.3,
            bidirectional_step_mv: 0.5,
            bidirectional_block: 5,
            count_sweep_max: 20,
            count_sweep_amplitude_v: 2.0,
            count_sweep_duration_s: 5e-4,
            count_sweep_frequency_hz: 1000.0,
            common_mode_step_v: 0.1,
            common_mode_weight_mv: 2.0,
            trace_step_s: 1.0,
            n_devices: 12,
            mismatch_sigma: 0.001,
            retention_ages_s: vec![0.0, 30.0, 90.0, 180.0, 540.0, 1800.0, 3600.0, 14_400.0, 86_400.0],
            retention_bias_v: (0..=10).map(|i| 6.5 + 0.1 * i as f64).collect(),
            retention_weights_mv: vec![0.0, 0.5, 1.0, 2.0, 5.0],
            retention_horizon_s: crate::energy::DEFAULT_RETENTION_HORIZON,
            perceptron: PerceptronBlock::default(),
            network: NetworkBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub device: DeviceConfig,
    pub noise: NoiseModel,
    pub read: ReadModel,
    pub experiment: ExperimentBlock,
    pub output_dir: Option<String>,
}

fn config_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("", e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_error(path, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.device;
        for (name, v) in [
            ("device.k1", d.k1),
            ("device.k2", d.k2),
            ("device.c_total", d.c_total),
            ("device.c_couple", d.c_couple),
            ("device.c_in", d.c_in),
            ("device.v0", d.v0),
            ("noise.sigma0", self.noise.sigma0),
            ("read.u_t", self.read.u_t),
            ("read.kappa", self.read.kappa),
            ("read.v_dd", self.read.v_dd),
            ("experiment.energy_horizon_s", self.experiment.energy_horizon_s),
            ("experiment.retention_horizon_s", self.experiment.retention_horizon_s),
            ("experiment.amp_max", self.experiment.amp_max),
            ("experiment.trace_step_s", self.experiment.trace_step_s),
            ("experiment.split_on_time_s", self.experiment.split_on_time_s),
            ("experiment.split_amplitude_v", self.experiment.split_amplitude_v),
            ("experiment.amplitude_sweep_duration_s", self.experiment.amplitude_sweep_duration_s),
            ("experiment.count_sweep_duration_s", self.experiment.count_sweep_duration_s),
            ("experiment.count_sweep_frequency_hz", self.experiment.count_sweep_frequency_hz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_error(name, format!("must be positive and finite, got {v}")));
            }
        }
        d.params().validate().map_err(|e| config_error("device", e.to_string()))?;
        self.noise.validate().map_err(|e| config_error("noise", e.to_string()))?;
        self.read.validate().map_err(|e| config_error("read", e.to_string()))?;
        let e = &self.experiment;
        if !(e.probe_age_s >= 0.0) {
            return Err(config_error("experiment.probe_age_s", "must be >= 0"));
        }
        if e.mismatch_sigma < 0.0 {
            return Err(config_error("experiment.mismatch_sigma", "must be >= 0"));
        }
        if e.energy_samples < 2 {
            return Err(config_error("experiment.energy_samples", "need at least 2 samples"));
        }
        if let Some(name) = &e.name {
            if !["perceptron", "network"].contains(&name.as_str()) {
                return Err(config_error(
                    "experiment.name",
                    format!("unknown experiment `{name}` (expected perceptron or network)"),
                ));
            }
        }
        e.perceptron
            .trainer
            .validate()
            .map_err(|err| config_error("experiment.perceptron.trainer", err.to_string()))?;
        e.network
            .training
            .validate()
            .map_err(|err| config_error("experiment.network.training", err.to_string()))?;
        Ok(())
    }

    /// Replaces every seed in the configuration with `seed`.
    pub fn apply_seed(&mut self, seed: u64) {
        let e = &mut self.experiment;
        e.seed = seed;
        e.perceptron.trainer.seed = seed;
        e.network.blobs.seed = seed;
        e.network.training.seed = seed;
    }

    /// Canonical JSON of the resolved configuration, the input of the config hash.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).unwrap_or(serde_json::Value::Null);
        serde_json::to_string(&value).unwrap_or_default()
    }

    pub fn device_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct DeviceOnly<'a> {
            device: &'a DeviceConfig,
        }
        toml::to_string(&DeviceOnly { device: &self.device }).map_err(|e| Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = ExperimentConfig::from_toml_str("[device]\nk3 = 1.0\n").unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "device.k3");
                assert!(message.contains("k3"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = ExperimentConfig::from_toml_str("[experiment.perceptron.trainer]\nepochs = \"x\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "experiment.perceptron.trainer.epochs"), "{err:?}");
    }

    #[test]
    fn non_positive_physics_is_rejected() {
        let err = ExperimentConfig::from_toml_str("[device]\nk2 = -3.0\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "device.k2"));
    }

    #[test]
    fn device_block_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.device_toml().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.device, cfg.device);
    }
}
