//! Model checkpoints: a JSON manifest naming every parameter block with its
//! shape, plus a payload file of little-endian `f64` values in block order.

use std::path::{Path, PathBuf};

use opkb_core::comprehension::{ComprehensionModel, EncoderConfig, EncoderModel, Task, TaskHead};
use opkb_core::distmult::DistMultModel;
use opkb_core::nn::{Params, Tensor2};
use opkb_core::reasoner::Seq2SeqModel;
use opkb_core::text::Vocab;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Failure, Result};
use crate::formats::{read_json, write_bytes, write_json};
use crate::manifest::sha256_hex;

pub const FORMAT: &str = "opkb-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub kind: String,
    pub seed: u64,
    pub hyperparameters: Value,
    /// Whatever is needed to rebuild the model skeleton (vocabularies, dims).
    pub meta: Value,
    pub tensors: Vec<TensorEntry>,
    pub payload: String,
    pub payload_sha256: String,
}

pub fn payload_path(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

pub fn save<P: Params>(path: &Path, model: &P, kind: &str, seed: u64, hyperparameters: Value, meta: Value) -> Result<()> {
    let blocks = model.tensors();
    let mut bytes = Vec::with_capacity(model.num_params() * 8);
    for (_, t) in &blocks {
        for x in t.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let payload = payload_path(path);
    let manifest = CheckpointManifest {
        format: FORMAT.into(),
        kind: kind.into(),
        seed,
        hyperparameters,
        meta,
        tensors: blocks
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
        payload: file_name(&payload),
        payload_sha256: sha256_hex(&bytes),
    };
    write_bytes(&payload, &bytes)?;
    write_json(path, &manifest)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub values: Vec<f64>,
}

pub fn read(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Failure::data(format!("missing checkpoint {}", path.display())));
    }
    let manifest: CheckpointManifest = read_json(path)?;
    if manifest.format != FORMAT {
        return Err(Failure::data(format!("{}: unsupported checkpoint format `{}`", path.display(), manifest.format)));
    }
    let payload = path.with_file_name(&manifest.payload);
    let bytes = std::fs::read(&payload).map_err(|e| Failure::io(&payload, e))?;
    if sha256_hex(&bytes) != manifest.payload_sha256 {
        return Err(Failure::data(format!("{}: payload hash does not match its manifest", payload.display())));
    }
    if bytes.len() % 8 != 0 {
        return Err(Failure::data(format!("{}: payload is not a whole number of f64 values", payload.display())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of eight bytes")))
        .collect();
    Ok(Checkpoint { manifest, values })
}

impl Checkpoint {
    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.manifest.kind == kind {
            Ok(())
        } else {
            Err(Failure::data(format!("expected a {kind} checkpoint, found {}", self.manifest.kind)))
        }
    }

    fn meta<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        let v = self
            .manifest
            .meta
            .get(key)
            .ok_or_else(|| Failure::data(format!("checkpoint meta lacks `{key}`")))?;
        serde_json::from_value(v.clone()).map_err(|e| Failure::data(format!("checkpoint meta `{key}`: {e}")))
    }

    /// Copies the stored blocks into `model`, whose block names and shapes
    /// must match the manifest exactly.
    pub fn fill<P: Params>(&self, model: &mut P) -> Result<()> {
        let names: Vec<(String, usize, usize)> = model.tensors().iter().map(|(n, t)| (n.clone(), t.rows(), t.cols())).collect();
        if names.len() != self.manifest.tensors.len() {
            return Err(Failure::data(format!(
                "checkpoint has {} parameter blocks, model expects {}",
                self.manifest.tensors.len(),
                names.len()
            )));
        }
        for ((name, r, c), e) in names.iter().zip(&self.manifest.tensors) {
            if (name, *r, *c) != (&e.name, e.rows, e.cols) {
                return Err(Failure::data(format!(
                    "checkpoint block {} {}x{} does not match model block {name} {r}x{c}",
                    e.name, e.rows, e.cols
                )));
            }
        }
        let total: usize = names.iter().map(|(_, r, c)| r * c).sum();
        if total != self.values.len() {
            return Err(Failure::data(format!("checkpoint holds {} values, model needs {total}", self.values.len())));
        }
        let mut offset = 0;
        for t in model.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&self.values[offset..offset + n]);
            offset += n;
        }
        if !model.is_finite() {
            return Err(Failure::Numerical("checkpoint holds non-finite parameters".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- concrete models

pub fn save_reasoner(path: &Path, model: &Seq2SeqModel, seed: u64, hyperparameters: Value) -> Result<()> {
    let meta = serde_json::json!({
        "vocab": model.vocab,
        "embedding_dim": model.embedding_dim(),
        "hidden_dim": model.hidden_dim(),
    });
    save(path, model, "reasoner", seed, hyperparameters, meta)
}

pub fn reasoner_from(ck: &Checkpoint) -> Result<Seq2SeqModel> {
    ck.expect_kind("reasoner")?;
    let vocab: Vocab = ck.meta("vocab")?;
    let mut model = Seq2SeqModel::new(vocab, ck.meta("embedding_dim")?, ck.meta("hidden_dim")?, None, 0)
        .map_err(|e| Failure::in_data("reasoner checkpoint", e))?;
    ck.fill(&mut model)?;
    Ok(model)
}

pub fn save_distmult(path: &Path, model: &DistMultModel, seed: u64, hyperparameters: Value) -> Result<()> {
    let meta = serde_json::json!({
        "entities": model.entities,
        "relations": model.relations,
        "dim": model.dim(),
    });
    save(path, model, "distmult", seed, hyperparameters, meta)
}

pub fn distmult_from(ck: &Checkpoint) -> Result<DistMultModel> {
    ck.expect_kind("distmult")?;
    let entities: Vocab = ck.meta("entities")?;
    let relations: Vocab = ck.meta("relations")?;
    let dim: usize = ck.meta("dim")?;
    let mut model = DistMultModel {
        entity_vectors: Tensor2::zeros(entities.len(), dim),
        relation_vectors: Tensor2::zeros(relations.len(), dim),
        entities,
        relations,
    };
    ck.fill(&mut model)?;
    Ok(model)
}

/// What a comprehension checkpoint needs besides its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    pub task: Task,
    pub vocab: Vocab,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub source: String,
    pub source_width: usize,
    pub max_answer_tokens: usize,
}

pub fn save_task(path: &Path, model: &ComprehensionModel, meta: &TaskMeta, seed: u64, hyperparameters: Value) -> Result<()> {
    let meta = serde_json::to_value(meta).map_err(|e| Failure::data(e.to_string()))?;
    save(path, model, "comprehension", seed, hyperparameters, meta)
}

pub fn task_from(ck: &Checkpoint) -> Result<(ComprehensionModel, TaskMeta)> {
    ck.expect_kind("comprehension")?;
    let meta: TaskMeta = serde_json::from_value(ck.manifest.meta.clone()).map_err(|e| Failure::data(format!("checkpoint meta: {e}")))?;
    let cfg = EncoderConfig {
        embedding_dim: meta.embedding_dim,
        hidden_dim: meta.hidden_dim,
    };
    let mut rng = opkb_core::rng(0);
    let encoder = EncoderModel::new(meta.vocab.clone(), cfg, &mut rng).map_err(|e| Failure::in_data("task checkpoint", e))?;
    let head = TaskHead::new(meta.task, encoder.output_dim() + meta.source_width, &mut rng);
    let mut model = ComprehensionModel { encoder, head };
    ck.fill(&mut model)?;
    Ok((model, meta))
}
