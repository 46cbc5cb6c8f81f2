//! Expert/novice skill classification from robot tool-tip trajectories.
//!
//! The pipeline runs in stages, one module each:
//!
//! - [`ingest`]: kinematics files and trial manifests into a [`Dataset`]
//! - [`preprocess`]: local linear regression smoothing and finite differences
//! - [`features`]: the 17-value movement feature vector of a trial
//! - [`reduce`]: standardization and principal component analysis
//! - [`classify`]: logistic regression (Newton/IRLS) and RBF-kernel SVM (SMO)
//! - [`validate`]: leave-one-super-trial-out / leave-one-user-out evaluation
//! - [`synth`]: seeded synthetic expert/novice populations
//!
//! [`pipeline`] ties the fitted stages together into a serializable model
//! and [`config`] holds the knobs for all of them.

pub mod classify;
pub mod config;
pub mod error;
pub mod features;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod reduce;
pub mod synth;
pub mod validate;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use features::{FeatureConfig, FeatureVector};
pub use ingest::{ColumnSchema, Dataset, Sample, Skill, Trajectory, TrialMeta};
pub use pipeline::PipelineModel;
pub use validate::{EvalReport, FoldPlan, Scheme};
