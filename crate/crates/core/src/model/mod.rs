//! Teacher and student architectures over gene-pair panel features.
//!
//! Each panel feature becomes one token (`value · E_j + B_j`), so a
//! transformer block sees a sequence of `num_features` tokens. The teacher
//! runs two encoder blocks with a widening linear map between them; the
//! transformer student keeps only the first block; the MLP student skips
//! attention entirely.

mod instance;
mod spec;

pub use instance::{build_model, parameter_layout, sgd_update, Forward, Mode, ModelInstance, ParamSlot};
pub use spec::{
    compression_ratio, count_parameters, Activation, ModelKind, ModelSpec, Preset, FF_MULT,
    LAYER_NORM_EPS,
};
