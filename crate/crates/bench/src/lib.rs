//! Shared inputs for the benchmark targets.

use tsgps_core::io::{generate_synthetic, SynthConfig, SyntheticData};
use tsgps_core::model::{build_model, ModelKind, ModelInstance, ModelSpec, Preset};
use tsgps_core::rng::stream;
use tsgps_core::Tensor;

pub const SEED: u64 = 11;

/// Default synthetic cohort with `per_class` samples in each of three classes.
pub fn cohort(per_class: usize) -> SyntheticData {
    let cfg = SynthConfig {
        n_samples_per_class: vec![per_class; 3],
        seed: SEED,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg).expect("valid synthetic config")
}

pub fn random(rows: usize, cols: usize, name: &str) -> Tensor {
    Tensor::normal(rows, cols, 0.0, 1.0, &mut stream(SEED, name))
}

/// Random 0/1 features for `batch` samples over a `k`-pair panel.
pub fn binary_features(batch: usize, k: usize) -> Tensor {
    let mut t = Tensor::uniform(batch, k, 0.0, 1.0, &mut stream(SEED, "features"));
    for v in t.data_mut() {
        *v = if *v > 0.5 { 1.0 } else { 0.0 };
    }
    t
}

pub fn desk_model(kind: ModelKind, k: usize) -> ModelInstance {
    let classes = if kind == ModelKind::Teacher { 3 } else { 2 };
    let spec = ModelSpec::preset(Preset::Desk, kind, k, classes);
    build_model(&spec, &mut stream(SEED, "init")).expect("preset specs are valid")
}
