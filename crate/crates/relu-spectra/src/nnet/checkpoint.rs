//! Versioned JSON checkpoint format for [`MlpModel`].
//!
//! The document is `{format_version, layers, head, metadata{seed, step}}`
//! with parameter arrays as decimal floats written in shortest-round-trip
//! form, so reloading reproduces every `f64` bit-exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::spectra::Activation;

use super::{Layer, MlpModel, NnetError};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub step: u64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format_version: u32,
    layers: Vec<LayerDoc>,
    head: LayerDoc,
    metadata: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ActivationDoc {
    Relu,
    LeakyRelu { slope: f64 },
    Linear,
}

impl From<Activation> for ActivationDoc {
    fn from(a: Activation) -> Self {
        match a {
            Activation::Relu => ActivationDoc::Relu,
            Activation::LeakyRelu(slope) => ActivationDoc::LeakyRelu { slope },
            Activation::Linear => ActivationDoc::Linear,
        }
    }
}

impl From<&ActivationDoc> for Activation {
    fn from(a: &ActivationDoc) -> Self {
        match a {
            ActivationDoc::Relu => Activation::Relu,
            ActivationDoc::LeakyRelu { slope } => Activation::LeakyRelu(*slope),
            ActivationDoc::Linear => Activation::Linear,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    kind: String,
    out_dim: usize,
    in_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    activation: ActivationDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<Vec<f64>>,
    bias: Vec<f64>,
}

fn layer_to_doc(layer: &Layer) -> LayerDoc {
    match layer {
        Layer::Single {
            weights,
            bias,
            activation,
        } => LayerDoc {
            kind: "single".into(),
            out_dim: weights.rows(),
            in_dim: weights.cols(),
            rank: None,
            activation: (*activation).into(),
            weights: Some(weights.data().to_vec()),
            w: None,
            m: None,
            bias: bias.clone(),
        },
        Layer::Double {
            factors,
            out_dim,
            in_dim,
            bias,
            activation,
        } => LayerDoc {
            kind: "double".into(),
            out_dim: *out_dim,
            in_dim: *in_dim,
            rank: Some(factors.as_ref().map_or(0, |(w, _)| w.cols())),
            activation: (*activation).into(),
            weights: None,
            w: factors.as_ref().map(|(w, _)| w.data().to_vec()),
            m: factors.as_ref().map(|(_, m)| m.data().to_vec()),
            bias: bias.clone(),
        },
    }
}

fn layer_from_doc(doc: &LayerDoc) -> Result<Layer, NnetError> {
    let activation: Activation = (&doc.activation).into();
    let bad = |msg: String| NnetError::CheckpointFormat(msg);
    if doc.bias.len() != doc.out_dim {
        return Err(bad(format!(
            "bias length {} does not match out_dim {}",
            doc.bias.len(),
            doc.out_dim
        )));
    }
    match doc.kind.as_str() {
        "single" => {
            let data = doc
                .weights
                .clone()
                .ok_or_else(|| bad("single layer without weights".into()))?;
            Ok(Layer::Single {
                weights: Matrix::new(doc.out_dim, doc.in_dim, data)?,
                bias: doc.bias.clone(),
                activation,
            })
        }
        "double" => {
            let rank = doc
                .rank
                .ok_or_else(|| bad("double layer without rank".into()))?;
            let factors = if rank == 0 {
                None
            } else {
                let w = doc
                    .w
                    .clone()
                    .ok_or_else(|| bad("double layer without w".into()))?;
                let m = doc
                    .m
                    .clone()
                    .ok_or_else(|| bad("double layer without m".into()))?;
                Some((
                    Matrix::new(doc.out_dim, rank, w)?,
                    Matrix::new(rank, doc.in_dim, m)?,
                ))
            };
            Ok(Layer::Double {
                factors,
                out_dim: doc.out_dim,
                in_dim: doc.in_dim,
                bias: doc.bias.clone(),
                activation,
            })
        }
        other => Err(bad(format!("unknown layer kind {other:?}"))),
    }
}

/// Serialize a model to the versioned JSON document.
pub fn checkpoint_to_json(model: &MlpModel, meta: CheckpointMeta) -> String {
    let doc = CheckpointDoc {
        format_version: FORMAT_VERSION,
        layers: model.layers.iter().map(layer_to_doc).collect(),
        head: layer_to_doc(&model.head),
        metadata: meta,
    };
    serde_json::to_string_pretty(&doc).expect("checkpoint document serializes")
}

/// Parse the versioned JSON document back into a model.
pub fn checkpoint_from_json(json: &str) -> Result<(MlpModel, CheckpointMeta), NnetError> {
    let doc: CheckpointDoc =
        serde_json::from_str(json).map_err(|e| NnetError::CheckpointFormat(e.to_string()))?;
    if doc.format_version != FORMAT_VERSION {
        return Err(NnetError::CheckpointFormat(format!(
            "unsupported format_version {}",
            doc.format_version
        )));
    }
    let layers = doc
        .layers
        .iter()
        .map(layer_from_doc)
        .collect::<Result<Vec<_>, _>>()?;
    let head = layer_from_doc(&doc.head)?;
    Ok((MlpModel { layers, head }, doc.metadata))
}

/// Write a checkpoint file atomically.
pub fn save_checkpoint(model: &MlpModel, meta: CheckpointMeta, path: &Path) -> Result<(), NnetError> {
    let json = checkpoint_to_json(model, meta);
    crate::fsio::write_atomic(path, json.as_bytes()).map_err(|source| NnetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a checkpoint file.
pub fn load_checkpoint(path: &Path) -> Result<(MlpModel, CheckpointMeta), NnetError> {
    let json = std::fs::read_to_string(path).map_err(|source| NnetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    checkpoint_from_json(&json)
}
