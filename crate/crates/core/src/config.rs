//! Resolved settings for a whole experiment.

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierKind, LrParams, SvmParams};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::ingest::ColumnSchema;
use crate::reduce::DEFAULT_VARIANCE_TARGET;
use crate::validate::{OutputFormat, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub enabled: bool,
    /// Smallest cumulative explained-variance ratio to retain.
    pub variance_target: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            enabled: true,
            variance_target: DEFAULT_VARIANCE_TARGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema: ColumnSchema,
    pub features: FeatureConfig,
    pub pca: PcaConfig,
    pub classifier: ClassifierKind,
    pub lr: LrParams,
    pub svm: SvmParams,
    pub scheme: Scheme,
    pub seed: u64,
    pub format: OutputFormat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema: ColumnSchema::default(),
            features: FeatureConfig::default(),
            pca: PcaConfig::default(),
            classifier: ClassifierKind::Lr,
            lr: LrParams::default(),
            svm: SvmParams::default(),
            scheme: Scheme::Loso,
            seed: 0,
            format: OutputFormat::Table,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        self.features.validate()?;
        let target = self.pca.variance_target;
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::Param(format!(
                "PCA variance target must be in (0, 1], got {target}"
            )));
        }
        self.lr.validate()?;
        self.svm.validate()
    }
}
