//! Leave-one-super-trial-out and leave-one-user-out evaluation.
//!
//! LOSO fold `t` holds out trial `t` of every surgeon that has one. LOUO
//! holds out all trials of one surgeon per fold. Predictions are pooled
//! over folds; per-class accuracy is the recall of that class.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierKind;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::ingest::{Dataset, Skill, TrialKey, TrialMeta};
use crate::pipeline::{extract_all, PipelineModel};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Loso,
    Louo,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Loso => "LOSO",
            Scheme::Louo => "LOUO",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loso" => Ok(Scheme::Loso),
            "louo" => Ok(Scheme::Louo),
            _ => Err(Error::Param(format!("unknown validation scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// One-based fold number.
    pub index: usize,
    /// `trial 3` for LOSO, `surgeon B` for LOUO.
    pub label: String,
    pub train: Vec<TrialKey>,
    pub test: Vec<TrialKey>,
    /// Why the fold cannot be trained, if it cannot.
    pub degenerate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub scheme: Scheme,
    pub folds: Vec<Fold>,
}

fn degenerate_reason(train: &[&TrialMeta]) -> Option<String> {
    let experts = train.iter().filter(|m| m.skill == Skill::Expert).count();
    let novices = train.len() - experts;
    if train.len() < 2 {
        Some(format!("training side has {} trial(s)", train.len()))
    } else if experts == 0 {
        Some("training side has no expert trials".into())
    } else if novices == 0 {
        Some("training side has no novice trials".into())
    } else {
        None
    }
}

/// Builds the folds for `scheme`. Fold order and the order of keys within a
/// fold follow the dataset order.
pub fn make_folds(dataset: &Dataset, scheme: Scheme) -> Result<FoldPlan> {
    let metas: Vec<&TrialMeta> = dataset.metas().collect();
    let groups: Vec<(String, Box<dyn Fn(&TrialMeta) -> bool>)> = match scheme {
        Scheme::Louo => {
            let surgeons = dataset.surgeons();
            if surgeons.len() < 2 {
                return Err(Error::Precondition(format!(
                    "leave-one-user-out needs at least 2 surgeons, found {}",
                    surgeons.len()
                )));
            }
            surgeons
                .into_iter()
                .map(|s| {
                    let id = s.to_string();
                    let label = format!("surgeon {id}");
                    (label, Box::new(move |m: &TrialMeta| m.surgeon_id == id) as Box<dyn Fn(&TrialMeta) -> bool>)
                })
                .collect()
        }
        Scheme::Loso => {
            let repeated = dataset
                .surgeons()
                .iter()
                .any(|s| metas.iter().filter(|m| m.surgeon_id == *s).count() >= 2);
            if !repeated {
                return Err(Error::Precondition(
                    "leave-one-super-trial-out needs a surgeon with at least 2 trials".into(),
                ));
            }
            let ordinals: BTreeSet<u32> = metas.iter().map(|m| m.trial_index).collect();
            ordinals
                .into_iter()
                .map(|t| {
                    (format!("trial {t}"), Box::new(move |m: &TrialMeta| m.trial_index == t) as Box<dyn Fn(&TrialMeta) -> bool>)
                })
                .collect()
        }
    };

    let folds = groups
        .into_iter()
        .enumerate()
        .map(|(i, (label, held_out))| {
            let (test, train): (Vec<&TrialMeta>, Vec<&TrialMeta>) = metas.iter().partition(|m| held_out(m));
            Fold {
                index: i + 1,
                label,
                degenerate: degenerate_reason(&train),
                train: train.iter().map(|m| m.key()).collect(),
                test: test.iter().map(|m| m.key()).collect(),
            }
        })
        .collect();
    Ok(FoldPlan { scheme, folds })
}

/// Pooled counts over every evaluated fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub novice_correct: usize,
    pub novice_as_expert: usize,
    pub expert_correct: usize,
    pub expert_as_novice: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: Skill, predicted: Skill) {
        match (truth, predicted) {
            (Skill::Novice, Skill::Novice) => self.novice_correct += 1,
            (Skill::Novice, Skill::Expert) => self.novice_as_expert += 1,
            (Skill::Expert, Skill::Expert) => self.expert_correct += 1,
            (Skill::Expert, Skill::Novice) => self.expert_as_novice += 1,
        }
    }

    pub fn novice_total(&self) -> usize {
        self.novice_correct + self.novice_as_expert
    }

    pub fn expert_total(&self) -> usize {
        self.expert_correct + self.expert_as_novice
    }

    pub fn total(&self) -> usize {
        self.novice_total() + self.expert_total()
    }

    pub fn correct(&self) -> usize {
        self.novice_correct + self.expert_correct
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub surgeon_id: String,
    pub trial_index: u32,
    pub truth: Skill,
    pub predicted: Skill,
    /// Expert probability (LR) or decision value (SVM).
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub index: usize,
    pub label: String,
    pub n_train: usize,
    pub n_test: usize,
    pub correct: usize,
    /// `None` for degenerate folds.
    pub accuracy: Option<f64>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateFold {
    pub index: usize,
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub format_version: u32,
    pub scheme: Scheme,
    pub classifier: ClassifierKind,
    pub folds: Vec<FoldResult>,
    pub confusion: Confusion,
    /// Novice recall over pooled predictions.
    pub novice_acc: Option<f64>,
    /// Expert recall over pooled predictions.
    pub expert_acc: Option<f64>,
    pub overall_acc: Option<f64>,
    pub degenerate_folds: Vec<DegenerateFold>,
    pub config: PipelineConfig,
}

impl EvalReport {
    /// Checks that per-fold counts, pooled confusion and accuracies agree.
    pub fn check_consistency(&self) -> Result<()> {
        let c = &self.confusion;
        let fold_correct: usize = self.folds.iter().map(|f| f.correct).sum();
        let fold_tested: usize = self.folds.iter().filter(|f| f.accuracy.is_some()).map(|f| f.n_test).sum();
        let ok = fold_correct == c.correct()
            && fold_tested == c.total()
            && self.novice_acc == ratio(c.novice_correct, c.novice_total())
            && self.expert_acc == ratio(c.expert_correct, c.expert_total())
            && self.overall_acc == ratio(c.correct(), c.total());
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid("report counts and accuracies disagree".into()))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != REPORT_FORMAT_VERSION {
            return Err(Error::Version { found, expected: REPORT_FORMAT_VERSION });
        }
        Ok(serde_json::from_value(value)?)
    }
}

fn rows_for<'a>(
    keys: &[TrialKey],
    metas: &'a [TrialMeta],
    features: &'a [FeatureVector],
) -> Vec<(&'a TrialMeta, &'a FeatureVector)> {
    keys.iter()
        .map(|k| {
            let i = metas.iter().position(|m| m.surgeon_id == k.surgeon_id && m.trial_index == k.trial_index)
                .expect("fold keys come from the same dataset");
            (&metas[i], &features[i])
        })
        .collect()
}

/// Fits the pipeline on the training side of `fold` only.
pub fn fit_fold(
    fold: &Fold,
    metas: &[TrialMeta],
    features: &[FeatureVector],
    cfg: &PipelineConfig,
) -> Result<PipelineModel> {
    let train = rows_for(&fold.train, metas, features);
    let x: Vec<Vec<f64>> = train.iter().map(|(_, f)| f.to_array().to_vec()).collect();
    let y: Vec<Skill> = train.iter().map(|(m, _)| m.skill).collect();
    PipelineModel::fit(&x, &y, cfg)
}

/// Runs cross-validation from precomputed per-trial features.
pub fn run_eval_on_features(
    metas: &[TrialMeta],
    features: &[FeatureVector],
    plan: &FoldPlan,
    cfg: &PipelineConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if metas.len() != features.len() {
        return Err(Error::Dimension { expected: metas.len(), got: features.len() });
    }
    let mut confusion = Confusion::default();
    let mut folds = Vec::with_capacity(plan.folds.len());
    let mut degenerate_folds = Vec::new();

    for fold in &plan.folds {
        let mut reason = fold.degenerate.clone();
        let model = match reason {
            Some(_) => None,
            None => match fit_fold(fold, metas, features, cfg) {
                Ok(m) => Some(m),
                Err(Error::Degenerate(msg)) => {
                    reason = Some(msg);
                    None
                }
                Err(e) => return Err(Error::Precondition(format!("fold {} ({}): {e}", fold.index, fold.label))),
            },
        };

        let Some(model) = model else {
            degenerate_folds.push(DegenerateFold {
                index: fold.index,
                label: fold.label.clone(),
                reason: reason.unwrap_or_default(),
            });
            folds.push(FoldResult {
                index: fold.index,
                label: fold.label.clone(),
                n_train: fold.train.len(),
                n_test: fold.test.len(),
                correct: 0,
                accuracy: None,
                predictions: Vec::new(),
            });
            continue;
        };

        let mut predictions = Vec::with_capacity(fold.test.len());
        for (meta, fv) in rows_for(&fold.test, metas, features) {
            let row = fv.to_array();
            let predicted = model.predict_row(&row)?;
            confusion.record(meta.skill, predicted);
            predictions.push(Prediction {
                surgeon_id: meta.surgeon_id.clone(),
                trial_index: meta.trial_index,
                truth: meta.skill,
                predicted,
                score: model.score_row(&row)?,
            });
        }
        let correct = predictions.iter().filter(|p| p.truth == p.predicted).count();
        folds.push(FoldResult {
            index: fold.index,
            label: fold.label.clone(),
            n_train: fold.train.len(),
            n_test: fold.test.len(),
            correct,
            accuracy: ratio(correct, predictions.len()),
            predictions,
        });
    }

    let mut config = cfg.clone();
    config.scheme = plan.scheme;
    Ok(EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        scheme: plan.scheme,
        classifier: cfg.classifier,
        folds,
        novice_acc: ratio(confusion.novice_correct, confusion.novice_total()),
        expert_acc: ratio(confusion.expert_correct, confusion.expert_total()),
        overall_acc: ratio(confusion.correct(), confusion.total()),
        confusion,
        degenerate_folds,
        config,
    })
}

/// Extracts features, builds the folds for `scheme` and evaluates.
pub fn run_eval(dataset: &Dataset, scheme: Scheme, cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let plan = make_folds(dataset, scheme)?;
    let features = extract_all(dataset, &cfg.features)?;
    let metas: Vec<TrialMeta> = dataset.metas().cloned().collect();
    run_eval_on_features(&metas, &features, &plan, cfg)
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |a| format!("{:.1}%", a * 100.0))
}

/// Renders one report in the requested format.
pub fn render_report(report: &EvalReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Table => Ok(render_table(std::slice::from_ref(report))),
        OutputFormat::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => Ok(render_csv(std::slice::from_ref(report))),
    }
}

/// Accuracy table with rows Novices / Experts / Overall per classifier and
/// one column per validation scheme.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut schemes: Vec<Scheme> = Vec::new();
    let mut classifiers: Vec<ClassifierKind> = Vec::new();
    for r in reports {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme);
        }
        if !classifiers.contains(&r.classifier) {
            classifiers.push(r.classifier);
        }
    }
    let find = |c: ClassifierKind, s: Scheme| reports.iter().find(|r| r.classifier == c && r.scheme == s);

    let mut out = String::new();
    out.push_str(&format!("{:<10}{:<6}", "", ""));
    for s in &schemes {
        out.push_str(&format!("{:>8}", s.label()));
    }
    out.push('\n');
    out.push_str(&"=".repeat(16 + 8 * schemes.len()));
    out.push('\n');

    let rows: [(&str, fn(&EvalReport) -> Option<f64>); 3] = [
        ("Novices", |r| r.novice_acc),
        ("Experts", |r| r.expert_acc),
        ("Overall", |r| r.overall_acc),
    ];
    for (name, get) in rows {
        for (i, c) in classifiers.iter().enumerate() {
            let head = if i == 0 { name } else { "" };
            out.push_str(&format!("{head:<10}{:<6}", c.label()));
            for s in &schemes {
                out.push_str(&format!("{:>8}", percent(find(*c, *s).and_then(get))));
            }
            out.push('\n');
        }
        out.push_str(&"-".repeat(16 + 8 * schemes.len()));
        out.push('\n');
    }

    let warnings: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.degenerate_folds.iter().map(move |d| {
                format!("  {} {} fold {} ({}): {}", r.classifier.label(), r.scheme, d.index, d.label, d.reason)
            })
        })
        .collect();
    if !warnings.is_empty() {
        out.push_str("\nWarnings: degenerate folds excluded from accuracy\n");
        for w in warnings {
            out.push_str(&w);
            out.push('\n');
        }
    }
    if let Some(first) = reports.first() {
        let mut cfg = first.config.clone();
        if reports.len() > 1 {
            // Scheme and classifier vary across columns and rows.
            cfg.scheme = Scheme::Loso;
            cfg.classifier = ClassifierKind::Lr;
        }
        if let Ok(json) = serde_json::to_string(&cfg) {
            out.push_str(&format!("\nconfig: {json}\n"));
        }
    }
    out
}

/// One row per fold plus aggregate rows, for each report.
pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("classifier,scheme,row,label,n_train,n_test,correct,accuracy,degenerate\n");
    let acc = |v: Option<f64>| v.map_or_else(String::new, |a| format!("{a}"));
    for r in reports {
        let c = r.classifier.label();
        let s = r.scheme.label();
        for f in &r.folds {
            let reason = r
                .degenerate_folds
                .iter()
                .find(|d| d.index == f.index)
                .map_or(String::new(), |d| d.reason.replace(',', ";"));
            out.push_str(&format!(
                "{c},{s},fold {},{},{},{},{},{},{}\n",
                f.index, f.label, f.n_train, f.n_test, f.correct, acc(f.accuracy), reason
            ));
        }
        let k = &r.confusion;
        out.push_str(&format!("{c},{s},novices,,,{},{},{},\n", k.novice_total(), k.novice_correct, acc(r.novice_acc)));
        out.push_str(&format!("{c},{s},experts,,,{},{},{},\n", k.expert_total(), k.expert_correct, acc(r.expert_acc)));
        out.push_str(&format!("{c},{s},overall,,,{},{},{},\n", k.total(), k.correct(), acc(r.overall_acc)));
    }
    out
}
