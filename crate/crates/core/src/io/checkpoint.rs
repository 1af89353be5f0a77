use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::formats::write_atomic;
use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::model::{parameter_layout, ModelInstance, ModelSpec};
use crate::screen::{DgpPanel, FeatureMode};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to score new expression data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelInstance,
    pub panel: DgpPanel,
    pub feature_mode: FeatureMode,
    pub class_names: Vec<String>,
    /// SHA-256 of the training run manifest, if one was recorded.
    pub training_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: (usize, usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestBody {
    format_version: u32,
    spec: ModelSpec,
    panel: DgpPanel,
    feature_mode: FeatureMode,
    class_names: Vec<String>,
    tensors: Vec<TensorEntry>,
    blob: String,
    training_digest: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    #[serde(flatten)]
    body: ManifestBody,
    digest: String,
}

/// Lower-case hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn content_digest(body: &ManifestBody, blob: &[u8]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(body)?);
    h.update(blob);
    Ok(hex::encode(h.finalize()))
}

/// Path of the parameter blob that accompanies a manifest.
pub fn blob_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

/// Writes `path` (JSON manifest) and its `.bin` sibling holding every
/// parameter as little-endian f64 in manifest order.
pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let model = &ckpt.model;
    if ckpt.class_names.len() != model.spec().num_classes {
        return Err(Error::Config(format!(
            "{} class names for a {}-class model",
            ckpt.class_names.len(),
            model.spec().num_classes
        )));
    }
    let blob_file = blob_path(path);
    let mut blob = Vec::with_capacity(model.num_parameters() * 8);
    for t in model.params() {
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let body = ManifestBody {
        format_version: CHECKPOINT_VERSION,
        spec: model.spec().clone(),
        panel: ckpt.panel.clone(),
        feature_mode: ckpt.feature_mode,
        class_names: ckpt.class_names.clone(),
        tensors: model
            .names()
            .iter()
            .zip(model.params())
            .map(|(n, t)| TensorEntry {
                name: n.clone(),
                shape: t.shape(),
            })
            .collect(),
        blob: blob_file
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        training_digest: ckpt.training_digest.clone(),
    };
    let digest = content_digest(&body, &blob)?;
    let manifest = serde_json::to_vec_pretty(&Manifest { body, digest })?;
    write_atomic(&blob_file, &blob)?;
    write_atomic(path, &manifest)
}

/// Checks, in order: format version, tensor names and shapes against the
/// spec, content digest. Nothing is returned unless all pass.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let manifest: Manifest = serde_json::from_slice(&raw)?;
    let body = manifest.body;
    if body.format_version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: body.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    body.spec.validate()?;
    let layout = parameter_layout(&body.spec);
    if layout.len() != body.tensors.len() {
        return Err(Error::Data(format!(
            "checkpoint lists {} tensors, the model has {}",
            body.tensors.len(),
            layout.len()
        )));
    }
    for (slot, entry) in layout.iter().zip(&body.tensors) {
        if slot.name != entry.name {
            return Err(Error::Data(format!(
                "checkpoint tensor `{}` found where `{}` was expected",
                entry.name, slot.name
            )));
        }
        if slot.shape != entry.shape {
            return Err(Error::CheckpointShape {
                name: entry.name.clone(),
                expected: slot.shape,
                found: entry.shape,
            });
        }
    }
    let blob_file = path.with_file_name(&body.blob);
    let blob = fs::read(&blob_file)
        .map_err(|e| Error::io(format!("reading {}", blob_file.display()), e))?;
    let found = content_digest(&body, &blob)?;
    if found != manifest.digest {
        return Err(Error::CheckpointDigest {
            expected: manifest.digest,
            found,
        });
    }
    let total: usize = body.tensors.iter().map(|t| t.shape.0 * t.shape.1).sum();
    if blob.len() != total * 8 {
        return Err(Error::Data(format!(
            "blob holds {} bytes, manifest describes {}",
            blob.len(),
            total * 8
        )));
    }
    let mut values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut named = Vec::with_capacity(body.tensors.len());
    for entry in &body.tensors {
        let (r, c) = entry.shape;
        let data: Vec<f64> = values.by_ref().take(r * c).collect();
        named.push((entry.name.clone(), Tensor::from_vec(r, c, data)?));
    }
    let panel = DgpPanel::new(body.panel.pairs().to_vec())?;
    if panel.k() != body.spec.num_features {
        return Err(Error::Data(format!(
            "panel has {} pairs but the model reads {} features",
            panel.k(),
            body.spec.num_features
        )));
    }
    Ok(Checkpoint {
        model: ModelInstance::from_parameters(body.spec, named)?,
        panel,
        feature_mode: body.feature_mode,
        class_names: body.class_names,
        training_digest: body.training_digest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelKind, Preset};
    use crate::rng::stream;
    use crate::screen::GenePair;

    fn panel(k: usize) -> DgpPanel {
        DgpPanel::new(
            (0..k)
                .map(|i| GenePair {
                    g1: format!("A{i}"),
                    g2: format!("B{i}"),
                    pathway: "P".into(),
                    p_value: (i + 1) as f64 * 1.234_567_890_123_457e-123 / 3.0,
                    page_ratio_case: 0.8,
                    page_ratio_control: 0.2,
                })
                .collect(),
        )
        .unwrap()
    }

    fn checkpoint() -> Checkpoint {
        let mut spec = ModelSpec::preset(Preset::Desk, ModelKind::StudentTx, 4, 2);
        spec.d_model_1 = 10;
        spec.encoder_layers_1 = 1;
        let model = build_model(&spec, &mut stream(3, "init")).unwrap();
        Checkpoint {
            model,
            panel: panel(4),
            feature_mode: FeatureMode::Binary,
            class_names: vec!["health".into(), "infected".into()],
            training_digest: Some(sha256_hex(b"run")),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut ck = checkpoint();
        ck.model.set_mode(crate::model::Mode::Eval);
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        let x = Tensor::from_rows(&[vec![1.0, 0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        let (a, b) = (ck.model.logits(&x).unwrap(), back.model.logits(&x).unwrap());
        assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.json"), dir.path().join("b.json"));
        save_checkpoint(&checkpoint(), &p1).unwrap();
        save_checkpoint(&checkpoint(), &p2).unwrap();
        assert_eq!(fs::read(blob_path(&p1)).unwrap(), fs::read(blob_path(&p2)).unwrap());
        let m1 = fs::read_to_string(&p1).unwrap().replace("a.bin", "");
        let m2 = fs::read_to_string(&p2).unwrap().replace("b.bin", "");
        assert_eq!(m1.len(), m2.len());
    }

    #[test]
    fn truncated_blob_is_a_digest_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&checkpoint(), &path).unwrap();
        let blob = fs::read(blob_path(&path)).unwrap();
        fs::write(blob_path(&path), &blob[..blob.len() - 8]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::CheckpointDigest { .. })));
    }

    #[test]
    fn edited_shape_names_the_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&checkpoint(), &path).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        v["tensors"][2]["shape"] = serde_json::json!([3, 3]);
        let name = v["tensors"][2]["name"].as_str().unwrap().to_string();
        fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
        match load_checkpoint(&path) {
            Err(Error::CheckpointShape { name: n, .. }) => assert_eq!(n, name),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_distinct() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&checkpoint(), &path).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
        v["format_version"] = serde_json::json!(99);
        fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CheckpointVersion { found: 99, .. })
        ));
    }
}
