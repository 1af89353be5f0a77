use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tsgps_core::model::{ModelKind, Preset};
use tsgps_core::screen::FeatureMode;
use tsgps_core::train::KdForm;
use tsgps_core::{Error, Result};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "tsgps", version, about = "Gene-pair screening and teacher/student distillation pipeline")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Model size preset: desk or paper-scale.
    #[arg(long, global = true)]
    pub preset: Option<Preset>,
    /// Worker threads for screening and k-fold evaluation.
    #[arg(long, global = true, value_name = "N")]
    pub parallel: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort with planted gene pairs.
    Synth(SynthArgs),
    /// Select the top-k discriminative gene pairs.
    Screen(ScreenArgs),
    /// Train the teacher on an 80/20 stratified split.
    TrainTeacher(TrainTeacherArgs),
    /// Train a student from a teacher checkpoint.
    Distill(DistillArgs),
    /// Score a checkpoint on labeled data, or cross-validate its architecture.
    Evaluate(EvaluateArgs),
    /// Write per-sample class probabilities.
    Predict(PredictArgs),
    /// Parameter counts, compression ratios and metrics per model.
    Report(ReportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Screen(_) => "screen",
            Command::TrainTeacher(_) => "train-teacher",
            Command::Distill(_) => "distill",
            Command::Evaluate(_) => "evaluate",
            Command::Predict(_) => "predict",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Samples per class, health first, e.g. `300,300,300`.
    #[arg(long, value_delimiter = ',')]
    pub samples_per_class: Option<Vec<usize>>,
    #[arg(long)]
    pub n_genes: Option<usize>,
    #[arg(long)]
    pub n_pathways: Option<usize>,
    #[arg(long)]
    pub pathway_size: Option<usize>,
    #[arg(long)]
    pub planted_pairs: Option<usize>,
    #[arg(long)]
    pub flip_noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Expression matrix (genes x samples, CSV or TSV).
    #[arg(long, value_name = "PATH")]
    pub expression: Option<PathBuf>,
    /// Labels CSV with `sample_id,label`.
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    /// Collapse infection classes into one `infected` class.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// GMT pathway catalog.
    #[arg(long, value_name = "PATH")]
    pub pathways: Option<PathBuf>,
    /// Panel size.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainTeacherArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Panel CSV written by `screen`.
    #[arg(long, value_name = "PATH")]
    pub panel: Option<PathBuf>,
    #[arg(long, value_parser = parse_feature_mode)]
    pub feature_mode: Option<FeatureMode>,
}

#[derive(Debug, Args)]
pub struct DistillArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Teacher checkpoint manifest.
    #[arg(long, value_name = "PATH")]
    pub teacher: Option<PathBuf>,
    /// Disease-specific panel fed to teacher and student instead of the
    /// teacher's own; must have the same size.
    #[arg(long, value_name = "PATH")]
    pub panel: Option<PathBuf>,
    /// student_tx or student_mlp.
    #[arg(long)]
    pub student: Option<ModelKind>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub w_distill: Option<f64>,
    #[arg(long)]
    pub w_ce: Option<f64>,
    /// kl or verbatim.
    #[arg(long)]
    pub kd_form: Option<KdForm>,
    /// Cross-entropy only (w_distill = 0).
    #[arg(long, conflicts_with = "paired")]
    pub vanilla: bool,
    /// Train both the distilled and the vanilla arm.
    #[arg(long)]
    pub paired: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Checkpoint manifest.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    /// Retrain the checkpoint's architecture under stratified k-fold CV.
    #[arg(long, value_name = "K")]
    pub kfold: Option<usize>,
    /// Epochs per fold under --kfold.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub expression: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Checkpoint manifests, one table row each.
    #[arg(long = "checkpoint", value_name = "PATH")]
    pub checkpoints: Vec<PathBuf>,
    /// Row name to measure compression against.
    #[arg(long)]
    pub teacher: Option<String>,
    /// `NAME=COUNT` parameter override; repeatable.
    #[arg(long = "params", value_name = "NAME=COUNT", value_parser = parse_param)]
    pub params: Vec<(String, usize)>,
    /// Add rows for the preset's three model kinds.
    #[arg(long)]
    pub presets: bool,
}

fn parse_feature_mode(s: &str) -> std::result::Result<FeatureMode, String> {
    match s {
        "binary" => Ok(FeatureMode::Binary),
        "continuous" => Ok(FeatureMode::Continuous),
        other => Err(format!("unknown feature mode `{other}` (binary|continuous)")),
    }
}

fn parse_param(s: &str) -> std::result::Result<(String, usize), String> {
    let (name, count) = s.split_once('=').ok_or("expected NAME=COUNT")?;
    let count = count
        .replace(['_', ','], "")
        .parse()
        .map_err(|e| format!("bad count `{count}`: {e}"))?;
    Ok((name.to_string(), count))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set_opt(&mut cfg.data.expression, self.expression.clone());
        set_opt(&mut cfg.data.labels, self.labels.clone());
        cfg.data.binary |= self.binary;
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set_opt(&mut cfg.train.epochs, self.epochs);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.lr, self.lr);
        set(&mut cfg.train.weight_decay, self.weight_decay);
        set(&mut cfg.train.train_fraction, self.train_fraction);
    }
}

impl Cli {
    /// Config file (if any) with every flag applied on top, plus the
    /// command's default epoch count filled in.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.out, self.out.clone());
        set(&mut cfg.preset, self.preset);
        set(&mut cfg.parallel, self.parallel);
        match &self.command {
            Command::Synth(a) => {
                let s = &mut cfg.synth;
                set(&mut s.n_samples_per_class, a.samples_per_class.clone());
                set(&mut s.n_genes, a.n_genes);
                set(&mut s.n_pathways, a.n_pathways);
                set(&mut s.pathway_size, a.pathway_size);
                set(&mut s.planted_pairs, a.planted_pairs);
                set(&mut s.flip_noise, a.flip_noise);
            }
            Command::Screen(a) => {
                a.data.apply(&mut cfg);
                set_opt(&mut cfg.data.pathways, a.pathways.clone());
                set(&mut cfg.screen.k, a.k);
            }
            Command::TrainTeacher(a) => {
                a.data.apply(&mut cfg);
                a.train.apply(&mut cfg);
                set_opt(&mut cfg.data.panel, a.panel.clone());
                set(&mut cfg.features.mode, a.feature_mode);
                cfg.train.epochs.get_or_insert(tsgps_core::train::TrainHyper::teacher().epochs);
            }
            Command::Distill(a) => {
                a.data.apply(&mut cfg);
                a.train.apply(&mut cfg);
                set_opt(&mut cfg.data.teacher, a.teacher.clone());
                set_opt(&mut cfg.data.panel, a.panel.clone());
                let d = &mut cfg.distill;
                set(&mut d.student, a.student);
                set(&mut d.temperature, a.temperature);
                set(&mut d.w_distill, a.w_distill);
                set(&mut d.w_ce, a.w_ce);
                set(&mut d.kd_form, a.kd_form);
                d.vanilla |= a.vanilla;
                d.paired |= a.paired;
                cfg.train.epochs.get_or_insert(tsgps_core::train::TrainHyper::student().epochs);
            }
            Command::Evaluate(a) => {
                a.data.apply(&mut cfg);
                set_opt(&mut cfg.data.checkpoint, a.checkpoint.clone());
                set_opt(&mut cfg.evaluate.kfold, a.kfold);
                set_opt(&mut cfg.train.epochs, a.epochs);
                set(&mut cfg.evaluate.threshold, a.threshold);
                if cfg.evaluate.kfold.is_some() {
                    cfg.train.epochs.get_or_insert(tsgps_core::train::TrainHyper::teacher().epochs);
                }
            }
            Command::Predict(a) => {
                set_opt(&mut cfg.data.expression, a.expression.clone());
                set_opt(&mut cfg.data.checkpoint, a.checkpoint.clone());
            }
            Command::Report(a) => {
                if !a.checkpoints.is_empty() {
                    cfg.report.checkpoints = a.checkpoints.clone();
                }
                set_opt(&mut cfg.report.teacher, a.teacher.clone());
                cfg.report.params.extend(a.params.iter().cloned());
                cfg.report.presets |= a.presets;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit status for an error: 2 configuration, 3 data, 4 runtime.
pub fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        tsgps_core::ErrorKind::Config => 2,
        tsgps_core::ErrorKind::Data => 3,
        tsgps_core::ErrorKind::Runtime => 4,
    }
}
