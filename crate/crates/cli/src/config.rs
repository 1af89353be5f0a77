//! Declarative run configuration.
//!
//! A config file is TOML; every key can be written as a flat dotted path
//! (`train.epochs = 20`) or inside its table. Command-line flags are applied
//! on top of the file, and the merged result is written next to the outputs
//! so a run can be repeated with `--config <out>/<command>.config.toml`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsgps_core::io::SynthConfig;
use tsgps_core::model::{Activation, ModelKind, ModelSpec, Preset};
use tsgps_core::screen::{FeatureMode, DEFAULT_PANEL_SIZE};
use tsgps_core::train::{AdamWConfig, DistillConfig, KdForm, TrainHyper};
use tsgps_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub out: PathBuf,
    pub preset: Preset,
    /// Worker threads for screening and k-fold evaluation.
    pub parallel: usize,
    pub data: DataSection,
    pub synth: SynthSection,
    pub screen: ScreenSection,
    pub features: FeaturesSection,
    pub train: TrainSection,
    pub distill: DistillSection,
    pub model: ModelSection,
    pub evaluate: EvaluateSection,
    pub report: ReportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            preset: Preset::Desk,
            parallel: 1,
            data: DataSection::default(),
            synth: SynthSection::default(),
            screen: ScreenSection::default(),
            features: FeaturesSection::default(),
            train: TrainSection::default(),
            distill: DistillSection::default(),
            model: ModelSection::default(),
            evaluate: EvaluateSection::default(),
            report: ReportSection::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expression: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// GMT pathway catalog.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pathways: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel: Option<PathBuf>,
    /// Teacher checkpoint manifest used by `distill`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teacher: Option<PathBuf>,
    /// Checkpoint manifest used by `evaluate` and `predict`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Collapse every infection class into a single `infected` label.
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_samples_per_class: Vec<usize>,
    pub n_genes: usize,
    pub n_pathways: usize,
    pub pathway_size: usize,
    pub planted_pairs: usize,
    pub flip_noise: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            n_samples_per_class: d.n_samples_per_class,
            n_genes: d.n_genes,
            n_pathways: d.n_pathways,
            pathway_size: d.pathway_size,
            planted_pairs: d.planted_pairs,
            flip_noise: d.flip_noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenSection {
    pub k: usize,
}

impl Default for ScreenSection {
    fn default() -> Self {
        Self { k: DEFAULT_PANEL_SIZE }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub mode: FeatureMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Unset means the per-model default (teacher 100, students 200).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub train_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let h = TrainHyper::teacher();
        Self {
            epochs: None,
            batch_size: h.batch_size,
            lr: h.optimizer.lr,
            beta1: h.optimizer.beta1,
            beta2: h.optimizer.beta2,
            epsilon: h.optimizer.epsilon,
            weight_decay: h.optimizer.weight_decay,
            train_fraction: 0.8,
        }
    }
}

impl TrainSection {
    pub fn hyper(&self) -> TrainHyper {
        TrainHyper {
            optimizer: AdamWConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
                weight_decay: self.weight_decay,
            },
            batch_size: self.batch_size,
            epochs: self.epochs.unwrap_or(TrainHyper::teacher().epochs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillSection {
    pub student: ModelKind,
    pub temperature: f64,
    pub w_distill: f64,
    pub w_ce: f64,
    pub kd_form: KdForm,
    /// Baseline arm: the student sees cross-entropy only (`w_distill = 0`).
    pub vanilla: bool,
    /// Train the distilled and the vanilla arm and compare them.
    pub paired: bool,
}

impl Default for DistillSection {
    fn default() -> Self {
        let d = DistillConfig::default();
        Self {
            student: ModelKind::StudentTx,
            temperature: d.temperature,
            w_distill: d.w_distill,
            w_ce: d.w_ce,
            kd_form: d.kd_form,
            vanilla: false,
            paired: false,
        }
    }
}

impl DistillSection {
    pub fn config(&self, vanilla: bool) -> DistillConfig {
        DistillConfig {
            temperature: self.temperature,
            w_distill: if vanilla { 0.0 } else { self.w_distill },
            w_ce: self.w_ce,
            kd_form: self.kd_form,
            class_map: None,
        }
    }
}

/// Explicit dimensions that replace preset values, one table per model kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub teacher: DimOverrides,
    pub student_tx: DimOverrides,
    pub student_mlp: DimOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_model_1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heads_1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_layers_1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_model_2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heads_2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_layers_2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlp_widths: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation_1: Option<Activation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation_2: Option<Activation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation_head: Option<Activation>,
}

impl DimOverrides {
    fn apply(&self, spec: &mut ModelSpec) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        set(&mut spec.d_model_1, &self.d_model_1);
        set(&mut spec.heads_1, &self.heads_1);
        set(&mut spec.encoder_layers_1, &self.encoder_layers_1);
        set(&mut spec.dropout_1, &self.dropout_1);
        set(&mut spec.d_model_2, &self.d_model_2);
        set(&mut spec.heads_2, &self.heads_2);
        set(&mut spec.encoder_layers_2, &self.encoder_layers_2);
        set(&mut spec.mlp_widths, &self.mlp_widths);
        set(&mut spec.activation_1, &self.activation_1);
        set(&mut spec.activation_2, &self.activation_2);
        set(&mut spec.activation_head, &self.activation_head);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Cross-validation folds; unset scores the checkpoint as is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kfold: Option<usize>,
    pub threshold: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            kfold: None,
            threshold: tsgps_core::metrics::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub checkpoints: Vec<PathBuf>,
    /// Row that compression ratios are measured against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub teacher: Option<String>,
    /// Parameter counts by row name; replaces a row's count or adds a row.
    pub params: BTreeMap<String, usize>,
    /// Add one row per model kind built from the preset.
    pub presets: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_samples_per_class: self.synth.n_samples_per_class.clone(),
            n_genes: self.synth.n_genes,
            n_pathways: self.synth.n_pathways,
            pathway_size: self.synth.pathway_size,
            planted_pairs: self.synth.planted_pairs,
            flip_noise: self.synth.flip_noise,
            seed: self.seed,
        }
    }

    /// Preset dimensions for `kind` with this config's overrides applied.
    pub fn model_spec(&self, kind: ModelKind, num_features: usize, num_classes: usize) -> ModelSpec {
        let mut spec = ModelSpec::preset(self.preset, kind, num_features, num_classes);
        let overrides = match kind {
            ModelKind::Teacher => &self.model.teacher,
            ModelKind::StudentTx => &self.model.student_tx,
            ModelKind::StudentMlp => &self.model.student_mlp,
        };
        overrides.apply(&mut spec);
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.parallel == 0 {
            return Err(Error::Config("parallel must be at least 1".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        if self.screen.k == 0 {
            return Err(Error::Config("screen.k must be at least 1".into()));
        }
        if !(self.train.train_fraction > 0.0 && self.train.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train.train_fraction must lie in (0, 1), got {}",
                self.train.train_fraction
            )));
        }
        if self.distill.student == ModelKind::Teacher {
            return Err(Error::Config("distill.student must be student_tx or student_mlp".into()));
        }
        if self.distill.vanilla && self.distill.paired {
            return Err(Error::Config("distill.vanilla and distill.paired are exclusive".into()));
        }
        if let Some(k) = self.evaluate.kfold {
            if k < 2 {
                return Err(Error::Config(format!("evaluate.kfold must be at least 2, got {k}")));
            }
        }
        self.synth_config().validate()?;
        self.train.hyper().validate()?;
        self.distill.config(false).validate()
    }
}

/// The value of a required path setting, or a config error naming both the
/// key and the flag that provide it.
pub fn require<'a>(value: &'a Option<PathBuf>, key: &str, flag: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("`{key}` is not set (use {flag} or the config file)")))
}
