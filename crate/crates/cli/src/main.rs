//! `kinskill`: extract features, cross-validate, generate synthetic data,
//! train and apply skill classifiers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kinskill::classify::ClassifierKind;
use kinskill::features::render_feature_csv;
use kinskill::ingest::{load_dataset, parse_kinematics, parse_manifest};
use kinskill::pipeline::{extract_all, PipelineModel};
use kinskill::synth::{gen_population, MANIFEST_FILE};
use kinskill::validate::{render_csv, render_table, run_eval, EvalReport, OutputFormat, Scheme};
use kinskill::{ColumnSchema, Dataset, PipelineConfig};

#[derive(Parser)]
#[command(name = "kinskill", version, about = "Surgical skill classification from tool-tip kinematics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the 17 movement features of every trial as CSV.
    Extract {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate and report per-class accuracy.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long, value_enum)]
        classifier: Option<ClassifierArg>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic expert/novice population with a manifest.
    Synth {
        /// Directory to write trajectory files and manifest.csv into.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        experts: usize,
        #[arg(long, default_value_t = 4)]
        novices: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// 0 makes the classes indistinguishable, 1 fully separates them.
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit the full pipeline on a dataset and save the model as JSON.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        classifier: Option<ClassifierArg>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Classify one trajectory file with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding the trajectory files.
    #[arg(long)]
    data: PathBuf,
    /// Manifest path; defaults to manifest.csv inside the data directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Column layout preset for trajectory files.
    #[arg(long, value_enum)]
    schema: Option<SchemaArg>,
    #[arg(long, overrides_with = "no_pca")]
    pca: bool,
    #[arg(long, overrides_with = "pca")]
    no_pca: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaArg {
    /// Six columns: left x y z, right x y z.
    Default,
    /// JIGSAWS 76-column kinematics, PSM tool tips.
    Jigsaws,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Loso,
    Louo,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Lr,
    Svm,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
    Csv,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn resolve(common: &CommonArgs) -> Result<PipelineConfig> {
    let mut cfg = load_config(common.config.as_deref())?;
    match common.schema {
        Some(SchemaArg::Default) => cfg.schema = ColumnSchema::default(),
        Some(SchemaArg::Jigsaws) => cfg.schema = ColumnSchema::jigsaws_psm(),
        None => {}
    }
    if common.pca {
        cfg.pca.enabled = true;
    }
    if common.no_pca {
        cfg.pca.enabled = false;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(data: &DataArgs, cfg: &PipelineConfig) -> Result<Dataset> {
    let manifest = data.manifest.clone().unwrap_or_else(|| data.data.join(MANIFEST_FILE));
    let text = fs::read_to_string(&manifest).with_context(|| format!("reading manifest {}", manifest.display()))?;
    let metas = parse_manifest(&text).with_context(|| format!("parsing manifest {}", manifest.display()))?;
    if metas.is_empty() {
        bail!("manifest {} lists no trials", manifest.display());
    }
    Ok(load_dataset(&data.data, metas, &cfg.schema)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn classifiers(arg: Option<ClassifierArg>, cfg: &PipelineConfig) -> Vec<ClassifierKind> {
    match arg {
        None => vec![cfg.classifier],
        Some(ClassifierArg::Lr) => vec![ClassifierKind::Lr],
        Some(ClassifierArg::Svm) => vec![ClassifierKind::Svm],
        Some(ClassifierArg::Both) => vec![ClassifierKind::Lr, ClassifierKind::Svm],
    }
}

fn schemes(arg: Option<SchemeArg>, cfg: &PipelineConfig) -> Vec<Scheme> {
    match arg {
        None => vec![cfg.scheme],
        Some(SchemeArg::Loso) => vec![Scheme::Loso],
        Some(SchemeArg::Louo) => vec![Scheme::Louo],
        Some(SchemeArg::Both) => vec![Scheme::Loso, Scheme::Louo],
    }
}

fn render(reports: &[EvalReport], format: OutputFormat) -> Result<String> {
    Ok(match format {
        OutputFormat::Table => render_table(reports),
        OutputFormat::Csv => render_csv(reports),
        OutputFormat::Json if reports.len() == 1 => reports[0].to_json()? + "\n",
        OutputFormat::Json => serde_json::to_string_pretty(reports)? + "\n",
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { data, common, out } => {
            let cfg = resolve(&common)?;
            let ds = load(&data, &cfg)?;
            let feats = extract_all(&ds, &cfg.features)?;
            let rows: Vec<_> = ds.metas().cloned().zip(feats).collect();
            emit(out.as_deref(), &render_feature_csv(&rows))
        }
        Command::Evaluate { data, common, scheme, classifier, format, out } => {
            let cfg = resolve(&common)?;
            let ds = load(&data, &cfg)?;
            let format = match format {
                Some(FormatArg::Table) => OutputFormat::Table,
                Some(FormatArg::Json) => OutputFormat::Json,
                Some(FormatArg::Csv) => OutputFormat::Csv,
                None => cfg.format,
            };
            let mut reports = Vec::new();
            for kind in classifiers(classifier, &cfg) {
                for s in schemes(scheme, &cfg) {
                    let run_cfg = PipelineConfig { classifier: kind, scheme: s, ..cfg.clone() };
                    let report = run_eval(&ds, s, &run_cfg)
                        .with_context(|| format!("{} {}", kind.label(), s.label()))?;
                    reports.push(report);
                }
            }
            emit(out.as_deref(), &render(&reports, format)?)
        }
        Command::Synth { out, experts, novices, trials, separation, seed, config } => {
            let cfg = load_config(config.as_deref())?;
            let pop = gen_population(experts, novices, trials, separation, seed.unwrap_or(cfg.seed))?;
            pop.write_to(&out)?;
            eprintln!("wrote {} trials and {} to {}", pop.files.len(), MANIFEST_FILE, out.display());
            Ok(())
        }
        Command::Train { data, common, classifier, model } => {
            let mut cfg = resolve(&common)?;
            match classifiers(classifier, &cfg).as_slice() {
                [kind] => cfg.classifier = *kind,
                _ => bail!("train fits one classifier; choose lr or svm"),
            }
            let ds = load(&data, &cfg)?;
            let fitted = PipelineModel::fit_dataset(&ds, &cfg)?;
            fs::write(&model, fitted.to_json()? + "\n").with_context(|| format!("writing {}", model.display()))
        }
        Command::Predict { model, trajectory, common } => {
            let cfg = resolve(&common)?;
            let text = fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let fitted = PipelineModel::from_json(&text)?;
            let raw = fs::read_to_string(&trajectory).with_context(|| format!("reading {}", trajectory.display()))?;
            let traj = parse_kinematics(&raw, &cfg.schema).with_context(|| format!("parsing {}", trajectory.display()))?;
            let (skill, score) = fitted.predict_trajectory(&traj)?;
            println!("{skill}\t{score}");
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
