//! Movement features of a trial.
//!
//! Six quantities describe the motion of each tool tip: time to complete,
//! path length, depth perception, speed, smoothness (jerk magnitude) and
//! curvature. Speed, jerk and curvature vary per sample and are summarized
//! by mean and sample standard deviation. With time to complete shared
//! between the hands, a trial becomes 1 + 2 x 8 = 17 values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Hand, TrialMeta, Trajectory};
use crate::preprocess::{derivative, loess_smooth, norm, Series3};

/// Denominator floor for curvature at near-zero speed.
pub const CURVATURE_EPS: f64 = 1e-9;

pub const DEFAULT_SMOOTHING_SPAN: f64 = 0.05;

pub const FEATURE_COUNT: usize = 17;

/// Canonical feature order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "ttc_s",
    "pl_left",
    "dp_left",
    "speed_mean_left",
    "speed_std_left",
    "jerk_mean_left",
    "jerk_std_left",
    "curv_mean_left",
    "curv_std_left",
    "pl_right",
    "dp_right",
    "speed_mean_right",
    "speed_std_right",
    "jerk_mean_right",
    "jerk_std_right",
    "curv_mean_right",
    "curv_std_right",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Fraction of the series length used as the smoothing window.
    pub smoothing_span: f64,
    /// Instrument axis for depth perception; must be a unit vector.
    pub depth_axis: [f64; 3],
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            smoothing_span: DEFAULT_SMOOTHING_SPAN,
            depth_axis: [0.0, 0.0, 1.0],
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothing_span > 0.0 && self.smoothing_span <= 1.0) {
            return Err(Error::Param(format!(
                "smoothing span must be in (0, 1], got {}",
                self.smoothing_span
            )));
        }
        check_unit(&self.depth_axis)
    }
}

fn check_unit(axis: &[f64; 3]) -> Result<()> {
    let n = norm(axis);
    if !((n - 1.0).abs() <= 1e-9) {
        return Err(Error::Param(format!(
            "depth axis must have unit length, got norm {n}"
        )));
    }
    Ok(())
}

/// Per-hand part of the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HandFeatures {
    pub path_length: f64,
    pub depth_perception: f64,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub jerk_mean: f64,
    pub jerk_std: f64,
    pub curvature_mean: f64,
    pub curvature_std: f64,
}

impl HandFeatures {
    fn values(&self) -> [f64; 8] {
        [
            self.path_length,
            self.depth_perception,
            self.speed_mean,
            self.speed_std,
            self.jerk_mean,
            self.jerk_std,
            self.curvature_mean,
            self.curvature_std,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        HandFeatures {
            path_length: v[0],
            depth_perception: v[1],
            speed_mean: v[2],
            speed_std: v[3],
            jerk_mean: v[4],
            jerk_std: v[5],
            curvature_mean: v[6],
            curvature_std: v[7],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ttc_s: f64,
    pub left: HandFeatures,
    pub right: HandFeatures,
}

impl FeatureVector {
    pub fn hand(&self, hand: Hand) -> &HandFeatures {
        match hand {
            Hand::Left => &self.left,
            Hand::Right => &self.right,
        }
    }

    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        let mut out = [0.0; FEATURE_COUNT];
        out[0] = self.ttc_s;
        out[1..9].copy_from_slice(&self.left.values());
        out[9..17].copy_from_slice(&self.right.values());
        out
    }

    pub fn from_array(values: &[f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            ttc_s: values[0],
            left: HandFeatures::from_values(&values[1..9]),
            right: HandFeatures::from_values(&values[9..17]),
        }
    }

    /// Checks the sign and ordering constraints every extracted vector meets.
    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("feature vector has non-finite entries".into()));
        }
        if self.ttc_s <= 0.0 {
            return Err(Error::Invalid(format!("time to complete {} is not positive", self.ttc_s)));
        }
        for hand in Hand::BOTH {
            let h = self.hand(hand);
            let tol = 1e-9 * h.path_length.max(1.0);
            if h.depth_perception < 0.0 || h.depth_perception > h.path_length + tol {
                return Err(Error::Invalid(format!(
                    "{} hand: need path length >= depth perception >= 0",
                    hand.as_str()
                )));
            }
            if h.values()[2..].iter().any(|&v| v < 0.0) {
                return Err(Error::Invalid(format!(
                    "{} hand: negative speed, jerk or curvature statistic",
                    hand.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// `(N - 1) / sample_rate_hz`, in seconds.
pub fn time_to_complete(traj: &Trajectory) -> f64 {
    (traj.len() - 1) as f64 / traj.sample_rate_hz()
}

fn step(p: &[f64; 3], q: &[f64; 3]) -> [f64; 3] {
    [q[0] - p[0], q[1] - p[1], q[2] - p[2]]
}

/// Sum of Euclidean distances between consecutive points.
pub fn path_length(points: &Series3) -> f64 {
    points
        .values()
        .windows(2)
        .map(|w| norm(&step(&w[0], &w[1])))
        .sum()
}

/// Total distance traveled along `axis`: the sum of absolute projections of
/// consecutive displacements onto it.
pub fn depth_perception(points: &Series3, axis: &[f64; 3]) -> Result<f64> {
    check_unit(axis)?;
    Ok(points
        .values()
        .windows(2)
        .map(|w| {
            let d = step(&w[0], &w[1]);
            (d[0] * axis[0] + d[1] * axis[1] + d[2] * axis[2]).abs()
        })
        .sum())
}

/// Backward-difference speed `|p_i - p_{i-1}| / dt` for `i = 1..N-1`.
pub fn speed_series(points: &Series3) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::TooShort { len: points.len(), min: 2 });
    }
    let dt = points.dt();
    Ok(points
        .values()
        .windows(2)
        .map(|w| norm(&step(&w[0], &w[1])) / dt)
        .collect())
}

/// Magnitude of the third time derivative at every sample.
pub fn jerk_series(points: &Series3) -> Result<Vec<f64>> {
    if points.len() < 4 {
        return Err(Error::TooShort { len: points.len(), min: 4 });
    }
    let jerk = derivative(&derivative(&derivative(points)?)?)?;
    Ok(jerk.norms())
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `|v x a| / max(|v|^3, eps)` at every sample.
pub fn curvature_series(velocity: &Series3, acceleration: &Series3) -> Result<Vec<f64>> {
    if velocity.len() != acceleration.len() {
        return Err(Error::Dimension {
            expected: velocity.len(),
            got: acceleration.len(),
        });
    }
    Ok(velocity
        .values()
        .iter()
        .zip(acceleration.values())
        .map(|(v, a)| norm(&cross(v, a)) / norm(v).powi(3).max(CURVATURE_EPS))
        .collect())
}

/// Mean and sample (n - 1) standard deviation. A single value has std 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

fn hand_features(raw: &Series3, cfg: &FeatureConfig) -> Result<HandFeatures> {
    let points = loess_smooth(raw, cfg.smoothing_span)?;
    let velocity = derivative(&points)?;
    let acceleration = derivative(&velocity)?;
    let jerk = derivative(&acceleration)?.norms();
    let speed = speed_series(&points)?;
    let curvature = curvature_series(&velocity, &acceleration)?;

    let (speed_mean, speed_std) = mean_std(&speed);
    let (jerk_mean, jerk_std) = mean_std(&jerk);
    let (curvature_mean, curvature_std) = mean_std(&curvature);
    Ok(HandFeatures {
        path_length: path_length(&points),
        depth_perception: depth_perception(&points, &cfg.depth_axis)?,
        speed_mean,
        speed_std,
        jerk_mean,
        jerk_std,
        curvature_mean,
        curvature_std,
    })
}

/// Smooths each hand, then computes the 17 features.
pub fn extract_features(traj: &Trajectory, cfg: &FeatureConfig) -> Result<FeatureVector> {
    cfg.validate()?;
    let left = hand_features(&traj.hand(Hand::Left), cfg).map_err(|e| e.in_hand("left"))?;
    let right = hand_features(&traj.hand(Hand::Right), cfg).map_err(|e| e.in_hand("right"))?;
    Ok(FeatureVector {
        ttc_s: time_to_complete(traj),
        left,
        right,
    })
}

pub fn feature_csv_header() -> String {
    let mut cols = vec!["surgeon_id", "trial_index", "skill"];
    cols.extend(FEATURE_NAMES);
    cols.join(",")
}

/// One row per trial: identity, label, then the 17 features.
pub fn render_feature_csv(rows: &[(TrialMeta, FeatureVector)]) -> String {
    let mut out = feature_csv_header();
    out.push('\n');
    for (meta, fv) in rows {
        out.push_str(&format!("{},{},{}", meta.surgeon_id, meta.trial_index, meta.skill));
        for v in fv.to_array() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
