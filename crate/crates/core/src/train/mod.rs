//! AdamW, the distillation and cross-entropy losses, and the teacher,
//! distilled-student and vanilla-student training loops.
//!
//! Every loop draws initialization, batch order and dropout masks from
//! separate streams derived from one seed, and runs single-threaded, so a
//! run is bit-reproducible.

mod adamw;
mod fit;
mod loss;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use fit::{
    distill_student, train_teacher, train_vanilla, EpochRecord, TrainHyper, TrainOutcome, TrainRun,
};
pub use loss::{
    cross_entropy, distill_loss, distill_loss_from_targets, labels_from_one_hot, soft_targets,
    total_loss, total_loss_value, ClassMap, DistillConfig, KdForm,
};
