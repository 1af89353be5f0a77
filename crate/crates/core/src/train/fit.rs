use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adamw::{adamw_step, AdamWConfig, AdamWState};
use super::loss::{
    cross_entropy, distill_loss_from_targets, soft_targets, total_loss, ClassMap, DistillConfig,
};
use crate::engine::{Graph, Tensor};
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::metrics::evaluate;
use crate::model::{build_model, Mode, ModelInstance, ModelSpec};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub optimizer: AdamWConfig,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self::teacher()
    }
}

impl TrainHyper {
    pub fn teacher() -> Self {
        Self {
            optimizer: AdamWConfig::default(),
            batch_size: 32,
            epochs: 100,
        }
    }

    pub fn student() -> Self {
        Self {
            epochs: 200,
            ..Self::teacher()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config(format!(
                "batch size and epochs must be positive, got {} and {}",
                self.batch_size, self.epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub val_auc: Option<f64>,
}

/// Run manifest: everything needed to reproduce and audit one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub spec: ModelSpec,
    pub hyper: TrainHyper,
    pub distill: Option<DistillConfig>,
    pub trace: Vec<EpochRecord>,
    /// Epoch with the lowest validation loss; the returned weights are
    /// always those of the final epoch.
    pub best_epoch: Option<usize>,
    pub wall_clock_secs: f64,
    pub checkpoint: Option<String>,
}

impl TrainRun {
    /// The run without its wall-clock time, for reproducibility comparisons.
    pub fn without_timing(&self) -> TrainRun {
        TrainRun {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelInstance,
    pub run: TrainRun,
}

enum Objective<'a> {
    Supervised { w_ce: f64 },
    Distill {
        cfg: &'a DistillConfig,
        map: ClassMap,
        /// Mapped soft targets for every training row.
        targets: Tensor,
    },
}

fn check_data(spec: &ModelSpec, data: &Dataset, role: &str) -> Result<()> {
    if data.num_features() != spec.num_features {
        return Err(Error::Config(format!(
            "{role} data has {} features, the model expects {}",
            data.num_features(),
            spec.num_features
        )));
    }
    if data.num_classes() != spec.num_classes {
        return Err(Error::Config(format!(
            "{role} data has {} classes, the model expects {}",
            data.num_classes(),
            spec.num_classes
        )));
    }
    Ok(())
}

fn check_train_set(spec: &ModelSpec, train: &Dataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Data("training data is empty".into()));
    }
    check_data(spec, train, "training")?;
    for (c, &n) in train.class_counts().iter().enumerate() {
        if n == 0 {
            return Err(Error::Data(format!(
                "class `{}` is absent from the training split",
                train.class_names()[c]
            )));
        }
    }
    Ok(())
}

fn validation_record(model: &ModelInstance, val: &Dataset) -> Result<(f64, Option<f64>, Option<f64>)> {
    let logits = model.logits(val.features())?;
    let mut g = Graph::new();
    let z = g.constant(logits);
    let loss = g.cross_entropy(z, val.labels())?;
    let loss = g.value(loss).item();
    let probs = crate::engine::softmax_rows(g.value(z), 1.0);
    match evaluate(&probs, val.labels(), crate::metrics::DEFAULT_THRESHOLD) {
        Ok(r) => Ok((loss, Some(r.accuracy), Some(r.auc))),
        Err(Error::UndefinedMetric(_)) => Ok((loss, None, None)),
        Err(e) => Err(e),
    }
}

fn fit(
    mut model: ModelInstance,
    train: &Dataset,
    val: Option<&Dataset>,
    objective: Objective<'_>,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    let mut shuffle_rng = stream(seed, "shuffle");
    let mut dropout_rng = stream(seed, "dropout");
    let mut opt = AdamWState::new(hyper.optimizer, model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut trace = Vec::with_capacity(hyper.epochs);
    model.set_mode(Mode::Train);

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let x = train.features().select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| train.labels()[i]).collect();
            let mut g = Graph::new();
            let fwd = model.forward(&mut g, &x, Some(&mut dropout_rng))?;
            let ce = cross_entropy(&mut g, fwd.logits, &y)?;
            let loss = match &objective {
                Objective::Supervised { w_ce } => g.scale(ce, *w_ce),
                Objective::Distill { cfg, targets, .. } => {
                    let q = targets.select_rows(batch);
                    let kd = distill_loss_from_targets(&mut g, &q, fwd.logits, cfg.temperature, cfg.kd_form)?;
                    total_loss(&mut g, kd, ce, cfg.w_distill, cfg.w_ce)?
                }
            };
            g.backward(loss)?;
            loss_sum += g.value(loss).item() * batch.len() as f64;
            let grads: Vec<Tensor> = fwd.params.iter().map(|&p| g.grad_or_zeros(p)).collect();
            adamw_step(&mut opt, model.params_mut(), &grads)?;
        }
        let (val_loss, val_accuracy, val_auc) = match val {
            Some(v) if !v.is_empty() => {
                let (l, a, u) = validation_record(&model, v)?;
                (Some(l), a, u)
            }
            _ => (None, None, None),
        };
        trace.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_accuracy,
            val_auc,
        });
    }
    model.set_mode(Mode::Eval);

    let best_epoch = trace
        .iter()
        .filter_map(|r| r.val_loss.map(|l| (r.epoch, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(e, _)| e);
    let distill = match &objective {
        Objective::Distill { cfg, map, .. } => Some(DistillConfig {
            class_map: Some(map.clone()),
            ..(*cfg).clone()
        }),
        Objective::Supervised { .. } => None,
    };
    Ok(TrainOutcome {
        run: TrainRun {
            seed,
            epochs: hyper.epochs,
            batch_size: hyper.batch_size,
            spec: model.spec().clone(),
            hyper: *hyper,
            distill,
            trace,
            best_epoch,
            wall_clock_secs: started.elapsed().as_secs_f64(),
            checkpoint: None,
        },
        model,
    })
}

fn init(spec: &ModelSpec, seed: u64) -> Result<ModelInstance> {
    spec.validate()?;
    build_model(spec, &mut stream(seed, "init"))
}

/// Cross-entropy training of a freshly initialized `spec` model.
pub fn train_teacher(
    train: &Dataset,
    val: Option<&Dataset>,
    spec: &ModelSpec,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    check_train_set(spec, train)?;
    if let Some(v) = val {
        check_data(spec, v, "validation")?;
    }
    let model = init(spec, seed)?;
    fit(model, train, val, Objective::Supervised { w_ce: 1.0 }, hyper, seed)
}

/// Student trained on `w_ce` times cross-entropy alone (the baseline arm).
pub fn train_vanilla(
    student_spec: &ModelSpec,
    train: &Dataset,
    val: Option<&Dataset>,
    w_ce: f64,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    check_train_set(student_spec, train)?;
    if let Some(v) = val {
        check_data(student_spec, v, "validation")?;
    }
    let model = init(student_spec, seed)?;
    fit(model, train, val, Objective::Supervised { w_ce }, hyper, seed)
}

/// Student trained on `w_distill·KD + w_ce·CE`. The frozen teacher's soft
/// targets, mapped onto the student's classes, are computed once up front.
pub fn distill_student(
    student_spec: &ModelSpec,
    teacher: &ModelInstance,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &DistillConfig,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    cfg.validate()?;
    if teacher.mode() != Mode::Eval {
        return Err(Error::Usage("the teacher must be in eval mode".into()));
    }
    check_train_set(student_spec, train)?;
    if let Some(v) = val {
        check_data(student_spec, v, "validation")?;
    }
    if teacher.spec().num_features != student_spec.num_features {
        return Err(Error::Config(format!(
            "teacher reads {} features, student {}",
            teacher.spec().num_features,
            student_spec.num_features
        )));
    }
    let map = cfg.resolved_class_map(teacher.spec().num_classes, student_spec.num_classes)?;
    let targets = map.apply(&soft_targets(&teacher.logits(train.features())?, cfg.temperature)?);
    let model = init(student_spec, seed)?;
    fit(
        model,
        train,
        val,
        Objective::Distill { cfg, map, targets },
        hyper,
        seed,
    )
}
