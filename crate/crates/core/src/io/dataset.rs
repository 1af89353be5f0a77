use rand::seq::SliceRandom;

use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::screen::{featurize, DgpPanel, ExpressionMatrix, FeatureMode, LabelVector};

/// Model-ready samples: one feature row per sample plus its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<usize>,
    sample_ids: Vec<String>,
    class_names: Vec<String>,
}

/// `health`, then the infection classes used throughout the pipeline.
pub fn default_class_names(num_classes: usize) -> Vec<String> {
    match num_classes {
        2 => vec!["health".into(), "infected".into()],
        3 => vec!["health".into(), "bacterial".into(), "viral".into()],
        n => (0..n).map(|i| format!("class{i}")).collect(),
    }
}

impl Dataset {
    pub fn new(
        features: Tensor,
        labels: Vec<usize>,
        sample_ids: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.rows() != labels.len() || labels.len() != sample_ids.len() {
            return Err(Error::Data(format!(
                "dataset has {} feature rows, {} labels and {} sample ids",
                features.rows(),
                labels.len(),
                sample_ids.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data("dataset features contain non-finite values".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            sample_ids,
            class_names,
        })
    }

    /// Featurizes `expr` against `panel` and attaches the aligned labels.
    pub fn from_expression(
        expr: &ExpressionMatrix,
        labels: &LabelVector,
        panel: &DgpPanel,
        mode: FeatureMode,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if class_names.len() != labels.num_classes {
            return Err(Error::Config(format!(
                "{} class names for {} classes",
                class_names.len(),
                labels.num_classes
            )));
        }
        let aligned = labels.aligned_to(expr)?;
        let features = featurize(expr, panel, mode)?;
        Self::new(features, aligned.labels, aligned.sample_ids, class_names)
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            sample_ids: indices.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Keeps the samples but replaces the class space.
    pub fn relabel(&self, labels: Vec<usize>, class_names: Vec<String>) -> Result<Dataset> {
        Dataset::new(self.features.clone(), labels, self.sample_ids.clone(), class_names)
    }

    /// Sample indices grouped by class, ascending within each class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }
}

/// Train/validation indices from a per-class proportional split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Per class: shuffle, then send `round(n_c · fraction)` samples (clamped so
/// both sides get at least one) to training. Index lists come back sorted.
pub fn stratified_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = stream(seed, "split");
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
    };
    for (class, mut idx) in data.indices_by_class().into_iter().enumerate() {
        match idx.len() {
            0 => continue,
            1 => {
                return Err(Error::Data(format!(
                    "class `{}` has a single sample and cannot be split",
                    data.class_names[class]
                )))
            }
            n => {
                idx.shuffle(&mut rng);
                let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
                split.train.extend_from_slice(&idx[..n_train]);
                split.validation.extend_from_slice(&idx[n_train..]);
            }
        }
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    Ok(split)
}
