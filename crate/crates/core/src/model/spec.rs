use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Two transformer blocks, an expansion layer between them, MLP head.
    Teacher,
    /// One transformer block (the teacher's first) plus MLP head.
    StudentTx,
    /// Linear layers with activations only.
    StudentMlp,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher" => Ok(Self::Teacher),
            "student_tx" | "student-tx" => Ok(Self::StudentTx),
            "student_mlp" | "student-mlp" => Ok(Self::StudentMlp),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Gelu,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Small widths; trains in seconds to minutes on one core.
    Desk,
    /// Widths chosen so parameter totals land near the published model sizes.
    PaperScale,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper-scale" | "paper_scale" => Ok(Self::PaperScale),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

/// Feed-forward inner width inside encoder layers, as a multiple of d_model.
pub const FF_MULT: usize = 4;
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Architecture hyperparameters. Fields for blocks a kind does not have are
/// ignored (presets set them to zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub num_features: usize,
    pub d_model_1: usize,
    pub heads_1: usize,
    pub encoder_layers_1: usize,
    pub dropout_1: f64,
    pub d_model_2: usize,
    pub heads_2: usize,
    pub encoder_layers_2: usize,
    pub mlp_widths: Vec<usize>,
    pub num_classes: usize,
    pub activation_1: Activation,
    pub activation_2: Activation,
    pub activation_head: Activation,
}

impl ModelSpec {
    pub fn preset(preset: Preset, kind: ModelKind, num_features: usize, num_classes: usize) -> Self {
        let (d1, widths) = match (preset, kind) {
            (Preset::Desk, ModelKind::Teacher) => (40, vec![64]),
            (Preset::Desk, ModelKind::StudentTx) => (40, vec![32]),
            (Preset::Desk, ModelKind::StudentMlp) => (0, vec![64, 32]),
            (Preset::PaperScale, ModelKind::Teacher) => (350, vec![512]),
            (Preset::PaperScale, ModelKind::StudentTx) => (350, vec![2048, 768]),
            (Preset::PaperScale, ModelKind::StudentMlp) => (0, vec![1024, 512, 448]),
        };
        let has_block1 = kind != ModelKind::StudentMlp;
        let has_block2 = kind == ModelKind::Teacher;
        Self {
            kind,
            num_features,
            d_model_1: d1,
            heads_1: if has_block1 { 5 } else { 0 },
            encoder_layers_1: if has_block1 { 4 } else { 0 },
            dropout_1: if has_block1 { 0.1 } else { 0.0 },
            d_model_2: if has_block2 { 2 * d1 } else { 0 },
            heads_2: if has_block2 { 2 } else { 0 },
            encoder_layers_2: if has_block2 { 2 } else { 0 },
            mlp_widths: widths,
            num_classes,
            activation_1: Activation::Gelu,
            activation_2: Activation::Relu,
            activation_head: Activation::Gelu,
        }
    }

    pub fn has_block1(&self) -> bool {
        self.kind != ModelKind::StudentMlp
    }

    pub fn has_block2(&self) -> bool {
        self.kind == ModelKind::Teacher
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_features == 0 {
            return fail("num_features must be at least 1".into());
        }
        if self.num_classes < 2 {
            return fail(format!("num_classes must be at least 2, got {}", self.num_classes));
        }
        if self.mlp_widths.contains(&0) {
            return fail("MLP widths must be positive".into());
        }
        let mut blocks = Vec::new();
        if self.has_block1() {
            blocks.push((1, self.d_model_1, self.heads_1, self.encoder_layers_1));
            if !(0.0..1.0).contains(&self.dropout_1) {
                return fail(format!("dropout_1 must lie in [0, 1), got {}", self.dropout_1));
            }
        }
        if self.has_block2() {
            blocks.push((2, self.d_model_2, self.heads_2, self.encoder_layers_2));
        }
        for (block, d, heads, layers) in blocks {
            if d == 0 || heads == 0 || layers == 0 {
                return fail(format!(
                    "block {block} needs positive width, heads and layers (got {d}, {heads}, {layers})"
                ));
            }
            if d % heads != 0 {
                return fail(format!(
                    "block {block}: d_model {d} is not divisible by {heads} heads"
                ));
            }
        }
        Ok(())
    }
}

fn encoder_layer_params(d: usize) -> usize {
    // attention (no biases) + two layer norms + feed-forward with biases
    4 * d * d + 4 * d + (d * FF_MULT * d + FF_MULT * d) + (FF_MULT * d * d + d)
}

fn head_params(input: usize, widths: &[usize], classes: usize, layer_norm: bool) -> usize {
    let mut total = 0;
    let mut prev = input;
    for &w in widths {
        total += prev * w + w + if layer_norm { 2 * w } else { 0 };
        prev = w;
    }
    total + prev * classes + classes
}

/// Closed-form parameter total for `spec`.
pub fn count_parameters(spec: &ModelSpec) -> usize {
    let k = spec.num_features;
    let (d1, d2) = (spec.d_model_1, spec.d_model_2);
    match spec.kind {
        ModelKind::StudentMlp => head_params(k, &spec.mlp_widths, spec.num_classes, false),
        ModelKind::StudentTx => {
            2 * k * d1
                + spec.encoder_layers_1 * encoder_layer_params(d1)
                + 2 * d1
                + head_params(d1, &spec.mlp_widths, spec.num_classes, true)
        }
        ModelKind::Teacher => {
            2 * k * d1
                + spec.encoder_layers_1 * encoder_layer_params(d1)
                + 2 * d1
                + d1 * d2
                + d2
                + spec.encoder_layers_2 * encoder_layer_params(d2)
                + 2 * d2
                + head_params(d2, &spec.mlp_widths, spec.num_classes, true)
        }
    }
}

/// `1 − student / teacher`.
pub fn compression_ratio(student: usize, teacher: usize) -> Result<f64> {
    if teacher == 0 {
        return Err(Error::Parameter("teacher parameter count must be positive".into()));
    }
    Ok(1.0 - student as f64 / teacher as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_linear_layer() {
        let spec = ModelSpec {
            mlp_widths: vec![],
            ..ModelSpec::preset(Preset::Desk, ModelKind::StudentMlp, 35, 2)
        };
        assert_eq!(count_parameters(&spec), 72);
    }

    #[test]
    fn published_compression_ratios() {
        let r = compression_ratio(8_178_842, 18_142_949).unwrap();
        assert!((r - 0.549).abs() <= 0.0005, "{r}");
        let r = compression_ratio(797_925, 18_142_949).unwrap();
        assert!((r - 0.956).abs() <= 0.0005, "{r}");
        assert_eq!(compression_ratio(10, 10).unwrap(), 0.0);
        assert!(compression_ratio(1, 0).is_err());
    }

    #[test]
    fn paper_scale_teacher_near_published_size() {
        let t = count_parameters(&ModelSpec::preset(Preset::PaperScale, ModelKind::Teacher, 35, 3));
        let rel = (t as f64 - 18_142_949.0).abs() / 18_142_949.0;
        assert!(rel <= 0.2, "teacher has {t} parameters");
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let good = ModelSpec::preset(Preset::Desk, ModelKind::Teacher, 35, 3);
        good.validate().unwrap();
        let mut s = good.clone();
        s.heads_1 = 3;
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.num_classes = 1;
        assert!(s.validate().is_err());
        let mut s = good.clone();
        s.num_features = 0;
        assert!(s.validate().is_err());
        let mut s = good;
        s.dropout_1 = 1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn kind_and_preset_parse() {
        assert_eq!("student-mlp".parse::<ModelKind>().unwrap(), ModelKind::StudentMlp);
        assert_eq!("paper-scale".parse::<Preset>().unwrap(), Preset::PaperScale);
        assert!("big".parse::<Preset>().is_err());
    }
}
