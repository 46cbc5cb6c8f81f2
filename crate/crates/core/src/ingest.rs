//! Kinematics files, trial manifests and the in-memory dataset.
//!
//! A trajectory file holds one sample per row. Which columns carry the left
//! and right tool-tip positions is decided by a [`ColumnSchema`], so the same
//! parser reads both the crate's own six-column CSV and wide robot API dumps
//! (see [`ColumnSchema::jigsaws_psm`]).

use std::collections::HashSet;
use std::fmt;
use std::path::{Component, Path};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::Series3;

/// Minimum number of samples a trajectory needs for third-order differences.
pub const MIN_SAMPLES: usize = 4;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Skill {
    Novice,
    Expert,
}

impl Skill {
    /// `0` for novices, `1` for experts.
    pub fn as_binary(self) -> f64 {
        match self {
            Skill::Novice => 0.0,
            Skill::Expert => 1.0,
        }
    }

    /// `-1` for novices, `+1` for experts.
    pub fn as_sign(self) -> f64 {
        match self {
            Skill::Novice => -1.0,
            Skill::Expert => 1.0,
        }
    }

    pub fn flipped(self) -> Skill {
        match self {
            Skill::Novice => Skill::Expert,
            Skill::Expert => Skill::Novice,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Skill::Novice => "novice",
            Skill::Expert => "expert",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Skill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "novice" => Ok(Skill::Novice),
            "expert" => Ok(Skill::Expert),
            other => Err(Error::Invalid(format!("unknown skill {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

/// Left and right tool-tip positions at one instant, in centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub left: [f64; 3],
    pub right: [f64; 3],
}

impl Sample {
    pub fn new(left: [f64; 3], right: [f64; 3]) -> Self {
        Sample { left, right }
    }

    pub fn is_finite(&self) -> bool {
        self.left.iter().chain(&self.right).all(|v| v.is_finite())
    }

    pub fn hand(&self, hand: Hand) -> [f64; 3] {
        match hand {
            Hand::Left => self.left,
            Hand::Right => self.right,
        }
    }
}

/// Time-ordered samples at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    samples: Vec<Sample>,
    sample_rate_hz: f64,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Param(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.len() < MIN_SAMPLES {
            return Err(Error::TooShort {
                len: samples.len(),
                min: MIN_SAMPLES,
            });
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Invalid(format!("sample {i} has a non-finite coordinate")));
        }
        Ok(Trajectory {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Positions of one hand as a series.
    pub fn hand(&self, hand: Hand) -> Series3 {
        let values = self.samples.iter().map(|s| s.hand(hand)).collect();
        Series3::new(values, self.dt()).expect("trajectory invariants imply a valid series")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Char(char),
    /// Any run of ASCII whitespace.
    Whitespace,
}

impl Default for Delimiter {
    fn default() -> Self {
        Delimiter::Char(',')
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delimiter::Char('\t') => f.write_str("tab"),
            Delimiter::Char(c) => write!(f, "{c}"),
            Delimiter::Whitespace => f.write_str("whitespace"),
        }
    }
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(Delimiter::Whitespace),
            "tab" | "\t" => Ok(Delimiter::Char('\t')),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(Delimiter::Char(c)),
                    _ => Err(Error::Param(format!("unsupported delimiter {s:?}"))),
                }
            }
        }
    }
}

impl Serialize for Delimiter {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Delimiter {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where the six position coordinates live in a row-per-sample text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    /// Zero-based column indices of left x, y, z.
    pub left: [usize; 3],
    /// Zero-based column indices of right x, y, z.
    pub right: [usize; 3],
    pub delimiter: Delimiter,
    /// Leading lines to skip before data rows.
    pub header_rows: usize,
    pub sample_rate_hz: f64,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            left: [0, 1, 2],
            right: [3, 4, 5],
            delimiter: Delimiter::default(),
            header_rows: 0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

impl ColumnSchema {
    /// JIGSAWS kinematics: 76 whitespace-separated columns, patient-side
    /// manipulator tool-tip positions at columns 39-41 (left) and 58-60
    /// (right), one-based.
    pub fn jigsaws_psm() -> Self {
        ColumnSchema {
            left: [38, 39, 40],
            right: [57, 58, 59],
            delimiter: Delimiter::Whitespace,
            header_rows: 0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Param(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    fn min_columns(&self) -> usize {
        self.left.iter().chain(&self.right).max().map_or(0, |m| m + 1)
    }
}

fn split_fields<'a>(line: &'a str, delimiter: Delimiter) -> Vec<&'a str> {
    match delimiter {
        Delimiter::Whitespace => line.split_ascii_whitespace().collect(),
        Delimiter::Char(c) => line.split(c).map(str::trim).collect(),
    }
}

/// Parses row-per-sample kinematics text into a trajectory.
///
/// Blank lines are skipped. Every data row must have the same number of
/// fields, enough to cover the schema's columns; only the six selected cells
/// are parsed. Row numbers in errors are one-based line numbers.
pub fn parse_kinematics(text: &str, schema: &ColumnSchema) -> Result<Trajectory> {
    schema.validate()?;
    let min_columns = schema.min_columns();
    let mut expected_fields = None;
    let mut samples = Vec::new();

    for (idx, line) in text.lines().enumerate().skip(schema.header_rows) {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line, schema.delimiter);
        match expected_fields {
            None => {
                if fields.len() < min_columns {
                    return Err(Error::Parse {
                        row,
                        message: format!(
                            "expected at least {min_columns} columns, found {}",
                            fields.len()
                        ),
                    });
                }
                expected_fields = Some(fields.len());
            }
            Some(n) if n != fields.len() => {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {n} columns, found {}", fields.len()),
                });
            }
            Some(_) => {}
        }

        let cell = |col: usize| -> Result<f64> {
            let raw = fields[col];
            let value: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {col}: {raw:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("column {col}: {raw:?} is not finite"),
                });
            }
            Ok(value)
        };
        let left = [cell(schema.left[0])?, cell(schema.left[1])?, cell(schema.left[2])?];
        let right = [cell(schema.right[0])?, cell(schema.right[1])?, cell(schema.right[2])?];
        samples.push(Sample { left, right });
    }

    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooShort {
            len: samples.len(),
            min: MIN_SAMPLES,
        });
    }
    Trajectory::new(samples, schema.sample_rate_hz)
}

/// Writes a trajectory in the default six-column CSV layout, no header.
///
/// Values use the shortest representation that parses back exactly, so
/// `parse_kinematics(serialize_trajectory(t), default)` reproduces `t`.
pub fn serialize_trajectory(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 64);
    for s in traj.samples() {
        let [lx, ly, lz] = s.left;
        let [rx, ry, rz] = s.right;
        out.push_str(&format!("{lx},{ly},{lz},{rx},{ry},{rz}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub surgeon_id: String,
    pub trial_index: u32,
    pub skill: Skill,
    /// Trajectory file, relative to the dataset root.
    pub source_path: String,
}

impl TrialMeta {
    pub fn key(&self) -> TrialKey {
        TrialKey {
            surgeon_id: self.surgeon_id.clone(),
            trial_index: self.trial_index,
        }
    }
}

/// Identifies a trial within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialKey {
    pub surgeon_id: String,
    pub trial_index: u32,
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.surgeon_id, self.trial_index)
    }
}

/// Parses a manifest: `surgeon_id,trial_index,skill,path` per line.
///
/// Lines starting with `#` and blank lines are ignored. Skill names are
/// case-insensitive.
pub fn parse_manifest(text: &str) -> Result<Vec<TrialMeta>> {
    let mut metas = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Manifest {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let surgeon_id = fields[0];
        if surgeon_id.is_empty() {
            return Err(err("empty surgeon id".into()));
        }
        let trial_index: u32 = fields[1]
            .parse()
            .map_err(|_| err(format!("invalid trial index {:?}", fields[1])))?;
        let skill: Skill = fields[2]
            .parse()
            .map_err(|_| err(format!("unknown skill {:?}", fields[2])))?;
        if fields[3].is_empty() {
            return Err(err("empty path".into()));
        }
        if !seen.insert((surgeon_id.to_string(), trial_index)) {
            return Err(err(format!(
                "duplicate trial ({surgeon_id}, {trial_index})"
            )));
        }
        metas.push(TrialMeta {
            surgeon_id: surgeon_id.to_string(),
            trial_index,
            skill,
            source_path: fields[3].to_string(),
        });
    }
    Ok(metas)
}

pub fn render_manifest(metas: &[TrialMeta]) -> String {
    let mut out = String::from("# surgeon_id,trial_index,skill,path\n");
    for m in metas {
        out.push_str(&format!(
            "{},{},{},{}\n",
            m.surgeon_id, m.trial_index, m.skill, m.source_path
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub meta: TrialMeta,
    pub trajectory: Trajectory,
}

/// Labeled trials. Non-empty with unique `(surgeon_id, trial_index)` keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trials: Vec<Trial>,
}

impl Dataset {
    pub fn new(trials: Vec<Trial>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::Invalid("dataset has no trials".into()));
        }
        let mut seen = HashSet::new();
        for t in &trials {
            if !seen.insert(t.meta.key()) {
                return Err(Error::Invalid(format!("duplicate trial {}", t.meta.key())));
            }
        }
        Ok(Dataset { trials })
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn metas(&self) -> impl Iterator<Item = &TrialMeta> {
        self.trials.iter().map(|t| &t.meta)
    }

    /// Distinct surgeon ids in order of first appearance.
    pub fn surgeons(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.metas()
            .filter(|m| seen.insert(m.surgeon_id.as_str()))
            .map(|m| m.surgeon_id.as_str())
            .collect()
    }

    /// `(novices, experts)`
    pub fn class_counts(&self) -> (usize, usize) {
        let experts = self.metas().filter(|m| m.skill == Skill::Expert).count();
        (self.len() - experts, experts)
    }

    pub fn require_both_classes(&self) -> Result<()> {
        match self.class_counts() {
            (0, _) => Err(Error::Degenerate("dataset has no novice trials".into())),
            (_, 0) => Err(Error::Degenerate("dataset has no expert trials".into())),
            _ => Ok(()),
        }
    }
}

/// Loads every trial named in `metas` from files under `root`.
pub fn load_dataset(root: &Path, metas: Vec<TrialMeta>, schema: &ColumnSchema) -> Result<Dataset> {
    if metas.is_empty() {
        return Err(Error::Invalid("manifest lists no trials".into()));
    }
    let mut trials = Vec::with_capacity(metas.len());
    for meta in metas {
        let rel = Path::new(&meta.source_path);
        let escapes = rel
            .components()
            .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir));
        if escapes {
            return Err(Error::Invalid(format!(
                "path {:?} does not resolve under the data directory",
                meta.source_path
            ))
            .in_trial(&meta.surgeon_id, meta.trial_index));
        }
        let path = root.join(rel);
        if !path.is_file() {
            return Err(Error::MissingFile { path }.in_trial(&meta.surgeon_id, meta.trial_index));
        }
        let trajectory = std::fs::read_to_string(&path)
            .map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })
            .and_then(|text| parse_kinematics(&text, schema))
            .map_err(|e| e.in_trial(&meta.surgeon_id, meta.trial_index))?;
        trials.push(Trial { meta, trajectory });
    }
    Dataset::new(trials)
}
