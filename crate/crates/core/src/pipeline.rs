//! Fitted scaler, optional PCA basis and classifier as one serializable model.

use serde::{Deserialize, Serialize};

use crate::classify::{lr_fit, svm_fit, ClassifierKind, ClassifierModel, LabeledSet};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig, FeatureVector};
use crate::ingest::{Dataset, Skill, Trajectory};
use crate::reduce::{fit_pca, fit_scaler, PcaModel, Scaler};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineModel {
    pub format_version: u32,
    /// Feature settings the model was trained with.
    pub features: FeatureConfig,
    pub scaler: Scaler,
    pub pca: Option<PcaModel>,
    pub classifier: ClassifierModel,
}

impl PipelineModel {
    /// Fits scaler, PCA (if enabled) and the configured classifier on
    /// feature rows.
    pub fn fit(rows: &[Vec<f64>], labels: &[Skill], cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        if rows.len() != labels.len() {
            return Err(Error::Dimension { expected: rows.len(), got: labels.len() });
        }
        let scaler = fit_scaler(rows)?;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.transform(r)).collect::<Result<_>>()?;
        let (pca, inputs) = if cfg.pca.enabled {
            let pca = fit_pca(&scaled, cfg.pca.variance_target)?;
            let projected = scaled.iter().map(|z| pca.project(z)).collect::<Result<_>>()?;
            (Some(pca), projected)
        } else {
            (None, scaled)
        };

        let data = LabeledSet::new(inputs, labels.to_vec())?;
        let classifier = match cfg.classifier {
            ClassifierKind::Lr => ClassifierModel::Lr(lr_fit(&data, &cfg.lr)?),
            ClassifierKind::Svm => {
                let gamma = cfg.svm.resolve_gamma(data.x());
                ClassifierModel::Svm(svm_fit(&data, cfg.svm.c, gamma, cfg.svm.tol, cfg.svm.max_passes)?)
            }
        };
        Ok(PipelineModel {
            format_version: MODEL_FORMAT_VERSION,
            features: cfg.features.clone(),
            scaler,
            pca,
            classifier,
        })
    }

    /// Extracts features from every trial of `dataset`, then fits.
    pub fn fit_dataset(dataset: &Dataset, cfg: &PipelineConfig) -> Result<Self> {
        dataset.require_both_classes()?;
        let rows = extract_all(dataset, &cfg.features)?
            .iter()
            .map(|f| f.to_array().to_vec())
            .collect::<Vec<_>>();
        let labels: Vec<Skill> = dataset.metas().map(|m| m.skill).collect();
        PipelineModel::fit(&rows, &labels, cfg)
    }

    /// Classifier input for a raw feature row.
    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.scaler.transform(x)?;
        match &self.pca {
            Some(p) => p.project(&z),
            None => Ok(z),
        }
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<Skill> {
        self.classifier.predict(&self.embed(x)?)
    }

    pub fn score_row(&self, x: &[f64]) -> Result<f64> {
        self.classifier.score(&self.embed(x)?)
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<Skill> {
        self.predict_row(&features.to_array())
    }

    /// Extracts features with the training settings, then classifies.
    pub fn predict_trajectory(&self, traj: &Trajectory) -> Result<(Skill, f64)> {
        let fv = extract_features(traj, &self.features)?;
        let row = fv.to_array();
        Ok((self.predict_row(&row)?, self.score_row(&row)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != MODEL_FORMAT_VERSION {
            return Err(Error::Version { found, expected: MODEL_FORMAT_VERSION });
        }
        Ok(serde_json::from_value(value)?)
    }
}

/// Feature vectors for every trial, in dataset order.
pub fn extract_all(dataset: &Dataset, cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    dataset
        .trials()
        .iter()
        .map(|t| {
            extract_features(&t.trajectory, cfg).map_err(|e| e.in_trial(&t.meta.surgeon_id, t.meta.trial_index))
        })
        .collect()
}
