//! Experiment configuration: one serialisable document (TOML or JSON)
//! that fully determines a run. Reports embed the resolved form so a run
//! can be reproduced from its report alone.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::data::SyntheticConfig;
use crate::encoding::EncodingConfig;
use crate::energy::{BalancedMode, EnergyConstants};
use crate::error::{Error, Result};
use crate::preprocess::{DnConfig, PolarisationMode, ScalingMode};
use crate::snn::{LifParams, ModelType, ResetMode, SurrogateConfig, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Where the visibilities come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DataSourceKind {
    #[default]
    Synthetic,
    Hdf5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub source: DataSourceKind,
    /// HDF5 file path (required when source = "hdf5").
    pub path: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSourceKind::Synthetic,
            path: None,
            synthetic: SyntheticConfig::default(),
            test_fraction: 0.3,
        }
    }
}

/// Scope over which divisive normalisation and unit scaling statistics
/// are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DnScope {
    /// Whole spectrogram, before patching.
    #[default]
    Spectrogram,
    /// Each patch region independently.
    Patch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PreprocessConfig {
    pub polarisation: PolarisationMode,
    pub divisive_normalisation: DnConfig,
    pub dn_scope: DnScope,
    pub scaling: ScalingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub model_type: ModelType,
    pub beta: f64,
    pub v_threshold: f64,
    pub reset: ResetMode,
    pub surrogate: SurrogateConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let p = LifParams::default();
        Self {
            model_type: ModelType::Patched,
            beta: p.beta,
            v_threshold: p.v_threshold,
            reset: p.reset,
            surrogate: SurrogateConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn lif_params(&self) -> LifParams {
        LifParams {
            beta: self.beta,
            v_threshold: self.v_threshold,
            reset: self.reset,
        }
    }
}

/// How test pixels are grouped before computing metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetricPooling {
    /// One pool over the whole test set.
    #[default]
    Pooled,
    /// Per baseline, averaged afterwards.
    PerBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MetricsConfig {
    pub pooling: MetricPooling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub constants: EnergyConstants,
    /// Instrument channel count for whole-spectrogram scaling.
    pub channels: usize,
    pub pols: usize,
    /// Whole-spectrogram inferences per second.
    pub cadence: f64,
    pub balanced_mode: BalancedMode,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            constants: EnergyConstants::default(),
            channels: 512,
            pols: 4,
            cadence: 1.0,
            balanced_mode: BalancedMode::PerChip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputConfig {
    /// Artifact directory; unset falls back to $SPIKEFLAG_OUT, then
    /// ./spikeflag-out.
    pub dir: Option<PathBuf>,
}

/// The full experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub data: DataConfig,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub encoding: EncodingConfig,
    pub train: TrainConfig,
    pub metrics: MetricsConfig,
    pub energy: EnergyConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            data: DataConfig::default(),
            preprocess: PreprocessConfig::default(),
            model: ModelConfig::default(),
            encoding: EncodingConfig::default(),
            train: TrainConfig::default(),
            metrics: MetricsConfig::default(),
            energy: EnergyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.data.source == DataSourceKind::Hdf5 && self.data.path.is_none() {
            return Err(Error::Config(
                "data.source = \"hdf5\" requires data.path".into(),
            ));
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "data.test_fraction must be in (0, 1), got {}",
                self.data.test_fraction
            )));
        }
        if self.data.source == DataSourceKind::Synthetic {
            self.data.synthetic.validate()?;
        }
        self.preprocess.divisive_normalisation.validate()?;
        self.model.lif_params().validate()?;
        self.model.surrogate.validate()?;
        self.encoding.validate()?;
        self.train.validate()?;
        if self.energy.cadence <= 0.0 {
            return Err(Error::Config(format!(
                "energy.cadence must be > 0, got {}",
                self.energy.cadence
            )));
        }
        if self.energy.channels == 0 || self.energy.pols == 0 {
            return Err(Error::Config(
                "energy.channels and energy.pols must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Parse a TOML (`.toml`) or JSON (anything else) config file.
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)?,
            _ => serde_json::from_str(&text)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
