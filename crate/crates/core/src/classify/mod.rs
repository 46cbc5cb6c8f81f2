//! Binary expert/novice classifiers.
//!
//! Novice is the negative class (0 or -1), Expert the positive one (1 or +1)
//! everywhere in the crate.

mod lr;
mod svm;

pub use lr::{
    lr_fit, lr_fit_traced, lr_gradient, lr_objective, lr_predict, lr_predict_proba, LrModel,
    LrParams,
};
pub use svm::{
    dual_objective, gram_matrix, median_gamma, rbf_kernel, svm_decision, svm_fit, svm_predict,
    GammaRule, SvmModel, SvmParams,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Skill;

/// Feature rows with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    x: Vec<Vec<f64>>,
    y: Vec<Skill>,
}

impl LabeledSet {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Skill>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dimension { expected: x.len(), got: y.len() });
        }
        if let Some(first) = x.first() {
            let d = first.len();
            for row in &x {
                if row.len() != d {
                    return Err(Error::Dimension { expected: d, got: row.len() });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("non-finite feature value".into()));
                }
            }
        }
        Ok(LabeledSet { x, y })
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[Skill] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn with_flipped_labels(&self) -> LabeledSet {
        LabeledSet {
            x: self.x.clone(),
            y: self.y.iter().map(|s| s.flipped()).collect(),
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let experts = self.y.iter().filter(|&&s| s == Skill::Expert).count();
        if experts == 0 || experts == self.len() {
            return Err(Error::Degenerate(
                "training data must contain both novices and experts".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lr,
    Svm,
}

impl ClassifierKind {
    pub fn label(self) -> &'static str {
        match self {
            ClassifierKind::Lr => "LR",
            ClassifierKind::Svm => "SVM",
        }
    }
}

/// A trained classifier of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierModel {
    Lr(LrModel),
    Svm(SvmModel),
}

impl ClassifierModel {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierModel::Lr(_) => ClassifierKind::Lr,
            ClassifierModel::Svm(_) => ClassifierKind::Svm,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Skill> {
        match self {
            ClassifierModel::Lr(m) => lr_predict(m, x),
            ClassifierModel::Svm(m) => svm_predict(m, x),
        }
    }

    /// Expert probability for LR, signed decision value for SVM.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            ClassifierModel::Lr(m) => lr_predict_proba(m, x),
            ClassifierModel::Svm(m) => svm_decision(m, x),
        }
    }
}
