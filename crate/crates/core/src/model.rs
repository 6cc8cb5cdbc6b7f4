//! Encoder `f` + linear classifier `g` with teacher snapshots and checkpoints.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{softmax, softmax_rows, KernelError, Tape, Tensor, Var};
use crate::Scalar;

/// Real = 0, fake = 1.
pub const NUM_CLASSES: usize = 2;

const MAGIC: &[u8; 4] = b"DFIL";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("layer {layer}: expected input width {expected}, got {got}")]
    Dimension {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// Layer widths of the encoder. The classifier is always `feature_dim → 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub input_dim: usize,
    /// ReLU hidden layers, followed by a linear projection to `feature_dim`.
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            input_dim: 8,
            hidden: vec![64, 32],
            feature_dim: 16,
        }
    }
}

/// One dense layer `act(x · W + b)`, `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn new(
        weight: Tensor<T>,
        bias: Tensor<T>,
        activation: Activation,
    ) -> Result<Self, ModelError> {
        if weight.rank() != 2 || bias.len() != weight.cols() {
            return Err(ModelError::Architecture(format!(
                "weight {:?} incompatible with bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        let bias = bias.reshape(vec![1, weight.cols()])?;
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    fn glorot(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| T::lit(rng.random_range(-limit..=limit)))
            .collect();
        Self {
            weight: Tensor::from_vec(vec![fan_in, fan_out], data).expect("finite init"),
            bias: Tensor::zeros(&[1, fan_out]),
            activation,
        }
    }

    fn apply(&self, layer: usize, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        if x.cols() != self.input_dim() {
            return Err(ModelError::Dimension {
                layer,
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        let mut out = x.matmul(&self.weight)?;
        let (rows, cols) = (out.rows(), out.cols());
        let bias = self.bias.data();
        let data = out.data_mut();
        for i in 0..rows {
            for j in 0..cols {
                let v = data[i * cols + j] + bias[j];
                data[i * cols + j] = match self.activation {
                    Activation::Relu => v.max(T::zero()),
                    Activation::Linear => v,
                };
            }
        }
        Ok(out)
    }
}

/// Output of [`Model::forward`] for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    /// Encoder output `r = f(x)`.
    pub features: Tensor<T>,
    /// Classifier output `z = g(r)`.
    pub logits: Tensor<T>,
    /// `softmax(z)` at temperature 1.
    pub probs: Tensor<T>,
}

impl<T: Scalar> Prediction<T> {
    /// Argmax class; an exact tie resolves to real (0).
    pub fn class(&self) -> u8 {
        u8::from(self.probs.data()[1] > self.probs.data()[0])
    }

    /// Probability of the fake class.
    pub fn fake_score(&self) -> T {
        self.probs.data()[1]
    }
}

/// Batched forward result.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutput<T> {
    pub features: Tensor<T>,
    pub logits: Tensor<T>,
}

impl<T: Scalar> BatchOutput<T> {
    pub fn probs(&self) -> Result<Tensor<T>, KernelError> {
        softmax_rows(&self.logits, T::one())
    }

    pub fn classes(&self) -> Vec<u8> {
        (0..self.logits.rows())
            .map(|i| {
                let z = self.logits.row(i);
                u8::from(z[1] > z[0])
            })
            .collect()
    }
}

/// A forward pass recorded on a tape.
#[derive(Clone, Debug)]
pub struct Recorded {
    /// Parameter leaves in [`Model::params`] order.
    pub params: Vec<Var>,
    pub features: Var,
    pub logits: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    encoder: Vec<Dense<T>>,
    classifier: Dense<T>,
    seed: u64,
}

impl<T: Scalar> Model<T> {
    /// Glorot-uniform weights from a seeded stream, zero biases.
    pub fn new(arch: &Architecture, seed: u64) -> Result<Self, ModelError> {
        if arch.input_dim == 0 || arch.feature_dim == 0 || arch.hidden.contains(&0) {
            return Err(ModelError::Architecture(format!("zero width in {arch:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoder = Vec::with_capacity(arch.hidden.len() + 1);
        let mut fan_in = arch.input_dim;
        for &width in &arch.hidden {
            encoder.push(Dense::glorot(fan_in, width, Activation::Relu, &mut rng));
            fan_in = width;
        }
        encoder.push(Dense::glorot(
            fan_in,
            arch.feature_dim,
            Activation::Linear,
            &mut rng,
        ));
        let classifier = Dense::glorot(arch.feature_dim, NUM_CLASSES, Activation::Linear, &mut rng);
        Ok(Self {
            encoder,
            classifier,
            seed,
        })
    }

    pub fn from_layers(encoder: Vec<Dense<T>>, classifier: Dense<T>) -> Result<Self, ModelError> {
        if encoder.is_empty() {
            return Err(ModelError::Architecture(
                "encoder needs at least one layer".into(),
            ));
        }
        for (i, pair) in encoder.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(ModelError::Dimension {
                    layer: i + 1,
                    expected: pair[1].input_dim(),
                    got: pair[0].output_dim(),
                });
            }
        }
        let feature_dim = encoder.last().expect("non-empty").output_dim();
        if classifier.input_dim() != feature_dim {
            return Err(ModelError::Dimension {
                layer: encoder.len(),
                expected: classifier.input_dim(),
                got: feature_dim,
            });
        }
        if classifier.output_dim() != NUM_CLASSES || classifier.activation != Activation::Linear {
            return Err(ModelError::Architecture(
                "classifier must be a linear map onto 2 classes".into(),
            ));
        }
        Ok(Self {
            encoder,
            classifier,
            seed: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].input_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier.input_dim()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn encoder(&self) -> &[Dense<T>] {
        &self.encoder
    }

    pub fn classifier(&self) -> &Dense<T> {
        &self.classifier
    }

    fn layers(&self) -> impl Iterator<Item = &Dense<T>> {
        self.encoder.iter().chain(std::iter::once(&self.classifier))
    }

    /// Weight and bias of every encoder layer, then of the classifier.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.encoder
            .iter_mut()
            .chain(std::iter::once(&mut self.classifier))
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_tensors(&self) -> Vec<Tensor<T>> {
        self.params().into_iter().cloned().collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Replaces all parameters; shapes must match [`Model::params`].
    pub fn set_params(&mut self, values: Vec<Tensor<T>>) -> Result<(), ModelError> {
        let mut slots = self.params_mut();
        if slots.len() != values.len() {
            return Err(ModelError::Architecture(format!(
                "expected {} parameter tensors, got {}",
                slots.len(),
                values.len()
            )));
        }
        for (slot, v) in slots.iter().zip(&values) {
            if slot.shape() != v.shape() {
                return Err(ModelError::Architecture(format!(
                    "parameter shape {:?} != {:?}",
                    slot.shape(),
                    v.shape()
                )));
            }
        }
        for (slot, v) in slots.iter_mut().zip(values) {
            **slot = v;
        }
        Ok(())
    }

    /// Independent deep copy, used to freeze the teacher.
    pub fn snapshot(&self) -> Self {
        self.clone()
    }

    /// Hash of the exact parameter bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in self.params() {
            for &d in p.shape() {
                h.write_usize(d);
            }
            for &v in p.data() {
                h.write_u64(v.bits());
            }
        }
        h.finish()
    }

    /// `(r, z, p)` for a single input vector.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Prediction<T>, ModelError> {
        if x.rows() != 1 {
            return Err(ModelError::Architecture(format!(
                "forward takes one sample, got shape {:?}",
                x.shape()
            )));
        }
        let out = self.forward_batch(x)?;
        let logits = out.logits.into_data();
        let probs = softmax(&logits, T::one())?;
        Ok(Prediction {
            features: Tensor::vector(out.features.into_data())?,
            logits: Tensor::vector(logits)?,
            probs: Tensor::vector(probs)?,
        })
    }

    /// Features and logits for a `B × d` batch.
    pub fn forward_batch(&self, x: &Tensor<T>) -> Result<BatchOutput<T>, ModelError> {
        let mut h = x.clone();
        for (i, layer) in self.encoder.iter().enumerate() {
            h = layer.apply(i, &h)?;
        }
        let logits = self.classifier.apply(self.encoder.len(), &h)?;
        Ok(BatchOutput {
            features: h,
            logits,
        })
    }

    /// Records the forward pass with every parameter as a tape leaf.
    pub fn record(&self, tape: &mut Tape<T>, x: Var) -> Result<Recorded, ModelError> {
        let params: Vec<Var> = self
            .params()
            .into_iter()
            .map(|p| tape.param(p.clone()))
            .collect();
        self.record_with(tape, &params, x)
    }

    /// Records the forward pass using caller-supplied parameter leaves,
    /// which must follow [`Model::params`] order and shapes.
    pub fn record_with(
        &self,
        tape: &mut Tape<T>,
        params: &[Var],
        x: Var,
    ) -> Result<Recorded, ModelError> {
        let expected = 2 * (self.encoder.len() + 1);
        if params.len() != expected {
            return Err(ModelError::Architecture(format!(
                "expected {expected} parameter leaves, got {}",
                params.len()
            )));
        }
        let mut h = x;
        for (i, layer) in self.layers().enumerate() {
            let got = tape.value(h).cols();
            if got != layer.input_dim() {
                return Err(ModelError::Dimension {
                    layer: i,
                    expected: layer.input_dim(),
                    got,
                });
            }
            let pre = tape.linear(h, params[2 * i], params[2 * i + 1])?;
            h = match layer.activation {
                Activation::Relu => tape.relu(pre)?,
                Activation::Linear => pre,
            };
            if i + 1 == self.encoder.len() {
                // remember the encoder output
                let features = h;
                let pre = tape.linear(features, params[2 * (i + 1)], params[2 * (i + 1) + 1])?;
                return Ok(Recorded {
                    params: params.to_vec(),
                    features,
                    logits: pre,
                });
            }
        }
        unreachable!("encoder is non-empty")
    }

    /// Serializes as a `.dfil` checkpoint: magic, version, JSON header
    /// length and header, then every parameter as little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = CheckpointHeader {
            format: "dfil-checkpoint".into(),
            seed: self.seed,
            layers: self
                .layers()
                .enumerate()
                .map(|(i, l)| LayerHeader {
                    role: if i < self.encoder.len() {
                        LayerRole::Encoder
                    } else {
                        LayerRole::Classifier
                    },
                    input_dim: l.input_dim(),
                    output_dim: l.output_dim(),
                    activation: l.activation,
                })
                .collect(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.num_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.params() {
            for &v in p.data() {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("missing DFIL magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let header_end = 16usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..header_end])
            .map_err(|e| ModelError::Checkpoint(format!("header: {e}")))?;
        let mut blob = bytes[header_end..].chunks_exact(8);
        let mut take = |n: usize| -> Result<Vec<T>, ModelError> {
            (0..n)
                .map(|_| {
                    blob.next()
                        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
                        .ok_or_else(|| bad("truncated parameter blob"))
                })
                .collect()
        };
        let mut encoder = Vec::new();
        let mut classifier = None;
        for l in &header.layers {
            let w = Tensor::from_vec(
                vec![l.input_dim, l.output_dim],
                take(l.input_dim * l.output_dim)?,
            )?;
            let b = Tensor::from_vec(vec![1, l.output_dim], take(l.output_dim)?)?;
            let dense = Dense::new(w, b, l.activation)?;
            match l.role {
                LayerRole::Encoder if classifier.is_none() => encoder.push(dense),
                LayerRole::Classifier if classifier.is_none() => classifier = Some(dense),
                _ => return Err(bad("classifier must be the single last layer")),
            }
        }
        if blob.next().is_some() || !blob.remainder().is_empty() {
            return Err(bad("trailing bytes after parameters"));
        }
        let mut model =
            Self::from_layers(encoder, classifier.ok_or_else(|| bad("no classifier"))?)?;
        model.seed = header.seed;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    seed: u64,
    layers: Vec<LayerHeader>,
}

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    role: LayerRole,
    input_dim: usize,
    output_dim: usize,
    activation: Activation,
}

#[derive(Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum LayerRole {
    Encoder,
    Classifier,
}
