//! Small multilayer perceptrons with single and double (rank-factorized)
//! layers, their initializations, cross-entropy training with Adam, and
//! accuracy bookkeeping.
//!
//! A double layer computes `act(W M x + b)` with `W: m x k`, `M: k x n`,
//! which caps the weight rank at `k` and drops the parameter count below a
//! plain layer as soon as `k < mn / (m + n)`.

mod checkpoint;

pub use checkpoint::{
    checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint, CheckpointMeta,
};

use thiserror::Error;

use crate::datasets::{DataError, Dataset, Split};
use crate::linalg::{LinalgError, Matrix};
use crate::rng::Rng;
use crate::spectra::{Activation, EvalSet, SpectraError};

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("layer {layer} expects input dimension {expected}, got {found}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("double layer rank {rank} must lie in 1..={max} for dims {out}x{inp}")]
    InvalidRank {
        rank: usize,
        max: usize,
        out: usize,
        inp: usize,
    },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("loss became non-finite at step {step}")]
    NonFiniteLoss { step: usize },
    #[error(
        "requested {requested} per subset, but only {correct} correctly and \
         {incorrect} incorrectly classified samples exist (short by {shortfall})"
    )]
    SubsetShortfall {
        requested: usize,
        correct: usize,
        incorrect: usize,
        shortfall: usize,
    },
    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Shape of a hidden layer before parameters are materialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerKind {
    Single { out_dim: usize },
    Double { out_dim: usize, rank: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn single(out_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Single { out_dim },
            activation,
        }
    }

    pub fn double(out_dim: usize, rank: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Double { out_dim, rank },
            activation,
        }
    }
}

/// A materialized layer. Double layers keep their factors explicitly; a
/// fully pruned double layer (`factors == None`) has an identically zero
/// weight matrix and only its bias left.
#[derive(Debug, Clone)]
pub enum Layer {
    Single {
        weights: Matrix,
        bias: Vec<f64>,
        activation: Activation,
    },
    Double {
        factors: Option<(Matrix, Matrix)>,
        out_dim: usize,
        in_dim: usize,
        bias: Vec<f64>,
        activation: Activation,
    },
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Single { weights, .. } => weights.cols(),
            Layer::Double { in_dim, .. } => *in_dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Layer::Single { weights, .. } => weights.rows(),
            Layer::Double { out_dim, .. } => *out_dim,
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Single { activation, .. } | Layer::Double { activation, .. } => *activation,
        }
    }

    pub fn bias(&self) -> &[f64] {
        match self {
            Layer::Single { bias, .. } | Layer::Double { bias, .. } => bias,
        }
    }

    /// Upper bound on the rank of the effective weight matrix.
    pub fn rank_cap(&self) -> usize {
        match self {
            Layer::Single { weights, .. } => weights.rows().min(weights.cols()),
            Layer::Double { factors, .. } => factors.as_ref().map_or(0, |(w, _)| w.cols()),
        }
    }

    /// The effective weight matrix (`A` or `W * M`; zeros when fully pruned).
    pub fn effective_weights(&self) -> Matrix {
        match self {
            Layer::Single { weights, .. } => weights.clone(),
            Layer::Double {
                factors,
                out_dim,
                in_dim,
                ..
            } => match factors {
                Some((w, m)) => w.matmul(m),
                None => Matrix::zeros(*out_dim, *in_dim),
            },
        }
    }

    /// Number of trainable parameters: `mn + m` single, `k(m + n) + m` double.
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Single { weights, .. } => weights.rows() * weights.cols() + weights.rows(),
            Layer::Double {
                factors,
                out_dim,
                in_dim,
                ..
            } => {
                let k = factors.as_ref().map_or(0, |(w, _)| w.cols());
                k * (out_dim + in_dim) + out_dim
            }
        }
    }

    /// Post-activation output for a batch (rows are samples).
    fn apply_rows(&self, xs: &Matrix) -> Matrix {
        let (mut z, _) = self.pre_activation(xs);
        let act = self.activation();
        for i in 0..z.rows() {
            act.apply_slice(z.row_mut(i));
        }
        z
    }

    /// Pre-activation `xs * A' + b` plus the double-layer intermediate
    /// `xs * M'` needed by backpropagation.
    fn pre_activation(&self, xs: &Matrix) -> (Matrix, Option<Matrix>) {
        match self {
            Layer::Single { weights, bias, .. } => {
                let mut z = xs.matmul_nt(weights);
                add_bias_rows(&mut z, bias);
                (z, None)
            }
            Layer::Double {
                factors,
                out_dim,
                bias,
                ..
            } => match factors {
                Some((w, m)) => {
                    let hidden = xs.matmul_nt(m);
                    let mut z = hidden.matmul_nt(w);
                    add_bias_rows(&mut z, bias);
                    (z, Some(hidden))
                }
                None => {
                    let mut z = Matrix::zeros(xs.rows(), *out_dim);
                    add_bias_rows(&mut z, bias);
                    (z, None)
                }
            },
        }
    }
}

fn add_bias_rows(z: &mut Matrix, bias: &[f64]) {
    for i in 0..z.rows() {
        for (v, b) in z.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// How weight matrices are filled at construction time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// `N(0, 4/(m+n))` entries for single layers; double layers use the
    /// product construction with `p = 1`.
    Glorot,
    /// Double-p-product init for double layers (single layers and the head
    /// fall back to Glorot).
    DoubleProduct { p: usize },
}

/// Denominator of the double-product variance target. The literal form is
/// `n + n` (twice the input dimension); the symmetric alternative `m + n`
/// matches the plain layer target when `m != n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductDenom {
    InPlusIn,
    OutPlusIn,
}

impl ProductDenom {
    fn value(self, m: usize, n: usize) -> f64 {
        match self {
            ProductDenom::InPlusIn => (n + n) as f64,
            ProductDenom::OutPlusIn => (m + n) as f64,
        }
    }
}

/// `m x n` matrix with i.i.d. `N(0, 4/(m+n))` entries (4/(m+n) is the
/// variance, not the standard deviation).
pub fn glorot_init(m: usize, n: usize, rng: &mut Rng) -> Matrix {
    let sd = (4.0 / (m + n) as f64).sqrt();
    Matrix::from_fn(m, n, |_, _| sd * rng.next_gaussian())
}

/// Double-p-product factors: every entry of `W` (`m x k`) and `M` (`k x n`)
/// is a product of `p` i.i.d. draws from a zero-mean normal with variance
/// `((4/k)/denom)^(1/(2p))`, so each factor entry has variance
/// `sqrt((4/k)/denom)` and the product matrix entries hit `4/denom` — the
/// layer-level variance target. The bias is zero.
pub fn double_p_product_init(
    m: usize,
    n: usize,
    k: usize,
    p: usize,
    denom: ProductDenom,
    rng: &mut Rng,
) -> (Matrix, Matrix, Vec<f64>) {
    assert!(p >= 1, "double-p-product needs p >= 1");
    assert!(k >= 1 && k <= m.min(n), "rank must lie in 1..=min(m, n)");
    let variance = ((4.0 / k as f64) / denom.value(m, n)).powf(1.0 / (2.0 * p as f64));
    let sd = variance.sqrt();
    let product = |rng: &mut Rng| -> f64 { (0..p).map(|_| sd * rng.next_gaussian()).product() };
    let w = Matrix::from_fn(m, k, |_, _| product(rng));
    let mm = Matrix::from_fn(k, n, |_, _| product(rng));
    (w, mm, vec![0.0; m])
}

/// MLP: hidden layers followed by a linear head (softmax at inference,
/// logits during training).
#[derive(Debug, Clone)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub head: Layer,
}

impl MlpModel {
    /// Materialize a model from layer specs. Double layers honor
    /// `InitScheme::DoubleProduct`; the head is always a Glorot single layer.
    pub fn new(
        input_dim: usize,
        specs: &[LayerSpec],
        num_classes: usize,
        init: InitScheme,
        denom: ProductDenom,
        rng: &mut Rng,
    ) -> Result<Self, NnetError> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut in_dim = input_dim;
        for spec in specs {
            let layer = match spec.kind {
                LayerKind::Single { out_dim } => Layer::Single {
                    weights: glorot_init(out_dim, in_dim, rng),
                    bias: vec![0.0; out_dim],
                    activation: spec.activation,
                },
                LayerKind::Double { out_dim, rank } => {
                    if rank == 0 || rank > out_dim.min(in_dim) {
                        return Err(NnetError::InvalidRank {
                            rank,
                            max: out_dim.min(in_dim),
                            out: out_dim,
                            inp: in_dim,
                        });
                    }
                    let p = match init {
                        InitScheme::Glorot => 1,
                        InitScheme::DoubleProduct { p } => p,
                    };
                    let (w, m, bias) = double_p_product_init(out_dim, in_dim, rank, p, denom, rng);
                    Layer::Double {
                        factors: Some((w, m)),
                        out_dim,
                        in_dim,
                        bias,
                        activation: spec.activation,
                    }
                }
            };
            in_dim = layer.out_dim();
            layers.push(layer);
        }
        let head = Layer::Single {
            weights: glorot_init(num_classes, in_dim, rng),
            bias: vec![0.0; num_classes],
            activation: Activation::Linear,
        };
        Ok(MlpModel { layers, head })
    }

    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map_or_else(|| self.head.in_dim(), Layer::in_dim)
    }

    pub fn num_classes(&self) -> usize {
        self.head.out_dim()
    }

    /// Total trainable parameters, head included.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum::<usize>() + self.head.param_count()
    }

    /// Hidden post-activations (one matrix per layer) plus head logits.
    pub fn forward(&self, x_batch: &Matrix) -> Result<ForwardPass, NnetError> {
        if x_batch.cols() != self.input_dim() {
            return Err(NnetError::DimensionMismatch {
                layer: 0,
                expected: self.input_dim(),
                found: x_batch.cols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut current = x_batch.clone();
        for layer in &self.layers {
            current = layer.apply_rows(&current);
            activations.push(current.clone());
        }
        let logits = self.head.apply_rows(&current);
        Ok(ForwardPass {
            activations,
            logits,
        })
    }

    /// Softmax probabilities for a batch; rows sum to one.
    pub fn predict_proba(&self, x_batch: &Matrix) -> Result<Matrix, NnetError> {
        let mut logits = self.forward(x_batch)?.logits;
        for i in 0..logits.rows() {
            softmax_in_place(logits.row_mut(i));
        }
        Ok(logits)
    }

    /// Argmax class per row (ties resolve to the lowest index).
    pub fn predict(&self, x_batch: &Matrix) -> Result<Vec<usize>, NnetError> {
        let logits = self.forward(x_batch)?.logits;
        Ok((0..logits.rows())
            .map(|i| crate::datasets::argmax(logits.row(i)))
            .collect())
    }

    /// Parameters flattened in canonical order (layers then head; weights
    /// row-major, then `W`/`M` for double layers, then bias).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in self.layers.iter().chain(std::iter::once(&self.head)) {
            match layer {
                Layer::Single { weights, bias, .. } => {
                    out.extend_from_slice(weights.data());
                    out.extend_from_slice(bias);
                }
                Layer::Double { factors, bias, .. } => {
                    if let Some((w, m)) = factors {
                        out.extend_from_slice(w.data());
                        out.extend_from_slice(m.data());
                    }
                    out.extend_from_slice(bias);
                }
            }
        }
        out
    }

    /// Inverse of [`MlpModel::flatten_params`].
    pub fn assign_params(&mut self, flat: &[f64]) {
        let mut pos = 0;
        let mut take = |len: usize| {
            let slice = &flat[pos..pos + len];
            pos += len;
            slice
        };
        for layer in self
            .layers
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
        {
            match layer {
                Layer::Single { weights, bias, .. } => {
                    let len = weights.data().len();
                    weights.data_mut().copy_from_slice(take(len));
                    let blen = bias.len();
                    bias.copy_from_slice(take(blen));
                }
                Layer::Double { factors, bias, .. } => {
                    if let Some((w, m)) = factors {
                        let wl = w.data().len();
                        w.data_mut().copy_from_slice(take(wl));
                        let ml = m.data().len();
                        m.data_mut().copy_from_slice(take(ml));
                    }
                    let blen = bias.len();
                    bias.copy_from_slice(take(blen));
                }
            }
        }
        assert_eq!(pos, flat.len(), "flat parameter length mismatch");
    }
}

/// Everything the probes need from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Post-activation output of every hidden layer, in order.
    pub activations: Vec<Matrix>,
    pub logits: Matrix,
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Gradients mirroring the model's parameter tensors.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub head: LayerGrads,
}

#[derive(Debug, Clone)]
pub enum LayerGrads {
    Single {
        d_weights: Matrix,
        d_bias: Vec<f64>,
    },
    Double {
        d_factors: Option<(Matrix, Matrix)>,
        d_bias: Vec<f64>,
    },
}

impl Gradients {
    /// Same canonical order as [`MlpModel::flatten_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.layers.iter().chain(std::iter::once(&self.head)) {
            match g {
                LayerGrads::Single { d_weights, d_bias } => {
                    out.extend_from_slice(d_weights.data());
                    out.extend_from_slice(d_bias);
                }
                LayerGrads::Double { d_factors, d_bias } => {
                    if let Some((dw, dm)) = d_factors {
                        out.extend_from_slice(dw.data());
                        out.extend_from_slice(dm.data());
                    }
                    out.extend_from_slice(d_bias);
                }
            }
        }
        out
    }
}

/// Mean cross-entropy-with-logits over the batch, with gradients for every
/// parameter tensor via backpropagation. Logits go through a log-sum-exp
/// stabilization.
pub fn loss_and_grads(
    model: &MlpModel,
    features: &Matrix,
    labels: &[usize],
) -> Result<(f64, Gradients), NnetError> {
    assert_eq!(features.rows(), labels.len());
    let num_classes = model.num_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(NnetError::LabelOutOfRange {
            label: bad,
            num_classes,
        });
    }
    let batch = features.rows() as f64;

    // Forward with cached pre-activations and double-layer intermediates.
    let mut inputs: Vec<Matrix> = Vec::with_capacity(model.layers.len() + 1);
    let mut pres: Vec<Matrix> = Vec::with_capacity(model.layers.len());
    let mut hiddens: Vec<Option<Matrix>> = Vec::with_capacity(model.layers.len());
    let mut current = features.clone();
    for layer in &model.layers {
        inputs.push(current.clone());
        let (pre, hidden) = layer.pre_activation(&current);
        let mut post = pre.clone();
        let act = layer.activation();
        for i in 0..post.rows() {
            act.apply_slice(post.row_mut(i));
        }
        pres.push(pre);
        hiddens.push(hidden);
        current = post;
    }
    inputs.push(current.clone());
    let (logits, head_hidden) = model.head.pre_activation(&current);

    // Loss and d(logits): (softmax - onehot) / batch.
    let mut loss = 0.0;
    let mut dlogits = logits.clone();
    for i in 0..dlogits.rows() {
        let row = dlogits.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[labels[i]];
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
        row[labels[i]] -= 1.0;
        for v in row.iter_mut() {
            *v /= batch;
        }
    }
    loss /= batch;

    // Backward through the head, then the hidden layers in reverse.
    let (head_grads, mut dcurrent) = backprop_layer(
        &model.head,
        inputs.last().unwrap(),
        &dlogits,
        head_hidden.as_ref(),
        None,
    );
    let mut layer_grads: Vec<LayerGrads> = Vec::with_capacity(model.layers.len());
    for (idx, layer) in model.layers.iter().enumerate().rev() {
        let dz = apply_activation_grad(layer.activation(), &pres[idx], &dcurrent);
        let (grads, dx) = backprop_layer(layer, &inputs[idx], &dz, hiddens[idx].as_ref(), None);
        layer_grads.push(grads);
        dcurrent = dx;
    }
    layer_grads.reverse();

    Ok((
        loss,
        Gradients {
            layers: layer_grads,
            head: head_grads,
        },
    ))
}

/// Elementwise `dz = da * act'(pre)`.
fn apply_activation_grad(act: Activation, pre: &Matrix, da: &Matrix) -> Matrix {
    let mut dz = da.clone();
    for i in 0..dz.rows() {
        for (v, p) in dz.row_mut(i).iter_mut().zip(pre.row(i)) {
            *v *= act.derivative(*p);
        }
    }
    dz
}

/// Gradients of one layer given `dz` (gradient w.r.t. the pre-activation)
/// plus the gradient passed to the layer below.
fn backprop_layer(
    layer: &Layer,
    input: &Matrix,
    dz: &Matrix,
    hidden: Option<&Matrix>,
    _unused: Option<()>,
) -> (LayerGrads, Matrix) {
    let d_bias: Vec<f64> = (0..dz.cols())
        .map(|j| (0..dz.rows()).map(|i| dz.get(i, j)).sum())
        .collect();
    match layer {
        Layer::Single { weights, .. } => {
            let d_weights = dz.matmul_tn(input);
            let dx = dz.matmul(weights);
            (LayerGrads::Single { d_weights, d_bias }, dx)
        }
        Layer::Double {
            factors, in_dim, ..
        } => match factors {
            Some((w, m)) => {
                let hidden = hidden.expect("double layer caches its intermediate");
                let dw = dz.matmul_tn(hidden);
                let dh = dz.matmul(w);
                let dm = dh.matmul_tn(input);
                let dx = dh.matmul(m);
                (
                    LayerGrads::Double {
                        d_factors: Some((dw, dm)),
                        d_bias,
                    },
                    dx,
                )
            }
            None => (
                LayerGrads::Double {
                    d_factors: None,
                    d_bias,
                },
                Matrix::zeros(dz.rows(), *in_dim),
            ),
        },
    }
}

/// Mean loss without gradients (used for metrics reporting).
pub fn loss_only(model: &MlpModel, features: &Matrix, labels: &[usize]) -> Result<f64, NnetError> {
    let logits = model.forward(features)?.logits;
    let mut loss = 0.0;
    for i in 0..logits.rows() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[labels[i]];
    }
    Ok(loss / logits.rows() as f64)
}

/// Adam training configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub num_steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// A parameter snapshot is captured every this many steps (step 0
    /// included); the final step is always captured.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            num_steps: 2000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            checkpoint_every: 500,
        }
    }
}

/// A deep parameter snapshot taken during training.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub step: usize,
    pub model: MlpModel,
}

/// Result of a training run.
#[derive(Debug)]
pub struct TrainRun {
    pub model: MlpModel,
    pub checkpoints: Vec<Checkpoint>,
}

/// Train with Adam on the train split. Batch order is a seeded shuffle per
/// epoch, so the whole run is a pure function of the model and config.
pub fn train(model: MlpModel, dataset: &Dataset, config: &TrainConfig) -> Result<TrainRun, NnetError> {
    dataset.validate_training_ready()?;
    let mut model = model;
    let features = dataset.features_of(Split::Train);
    let labels = dataset.labels_of(Split::Train);
    let n = features.rows();
    let batch_size = config.batch_size.clamp(1, n);

    let mut rng = Rng::new(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n; // force a shuffle before the first batch

    let mut params = model.flatten_params();
    let mut adam = AdamMoments::new(params.len(), config.beta1, config.beta2, config.epsilon);
    let mut checkpoints = vec![Checkpoint {
        step: 0,
        model: model.clone(),
    }];

    for step in 0..config.num_steps {
        if cursor >= n {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let end = (cursor + batch_size).min(n);
        let idx = &order[cursor..end];
        cursor = end;

        let batch_features = Matrix::from_rows(
            &idx.iter()
                .map(|&i| features.row(i).to_vec())
                .collect::<Vec<_>>(),
        )?;
        let batch_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();

        let (loss, grads) = loss_and_grads(&model, &batch_features, &batch_labels)?;
        if !loss.is_finite() {
            return Err(NnetError::NonFiniteLoss { step });
        }
        adam.update(&mut params, &grads.flatten(), config.learning_rate);
        model.assign_params(&params);

        let completed = step + 1;
        if completed % config.checkpoint_every.max(1) == 0 || completed == config.num_steps {
            if checkpoints.last().map(|c| c.step) != Some(completed) {
                checkpoints.push(Checkpoint {
                    step: completed,
                    model: model.clone(),
                });
            }
        }
    }

    Ok(TrainRun { model, checkpoints })
}

struct AdamMoments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamMoments {
    fn new(len: usize, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamMoments {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Fraction of a split classified correctly.
pub fn accuracy(model: &MlpModel, dataset: &Dataset, split: Split) -> Result<f64, NnetError> {
    let features = dataset.features_of(split);
    let labels = dataset.labels_of(split);
    let predictions = model.predict(&features)?;
    let correct = predictions
        .iter()
        .zip(&labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / labels.len().max(1) as f64)
}

/// Draw two equal-size disjoint subsets of a split: one of correctly, one of
/// incorrectly classified samples. Errors with the shortfall if either pool
/// is too small.
pub fn split_by_correctness(
    model: &MlpModel,
    dataset: &Dataset,
    split: Split,
    subset_size: usize,
    rng: &mut Rng,
) -> Result<(EvalSet, EvalSet), NnetError> {
    let indices = dataset.indices_of(split);
    let features = dataset.features_of(split);
    let labels = dataset.labels_of(split);
    let predictions = model.predict(&features)?;

    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    for (row, (&p, &l)) in predictions.iter().zip(&labels).enumerate() {
        if p == l {
            correct.push(row);
        } else {
            incorrect.push(row);
        }
    }
    let pool = correct.len().min(incorrect.len());
    if subset_size > pool {
        return Err(NnetError::SubsetShortfall {
            requested: subset_size,
            correct: correct.len(),
            incorrect: incorrect.len(),
            shortfall: subset_size - pool,
        });
    }
    rng.shuffle(&mut correct);
    rng.shuffle(&mut incorrect);

    let gather = |rows: &[usize], subset: &str| -> EvalSet {
        let points = Matrix::from_rows(
            &rows
                .iter()
                .take(subset_size)
                .map(|&r| features.row(r).to_vec())
                .collect::<Vec<_>>(),
        )
        .expect("dataset features are finite");
        EvalSet::from_points(points, dataset.name(), subset)
    };
    let _ = indices; // split indices only matter for provenance; rows suffice
    Ok((gather(&correct, "correct"), gather(&incorrect, "incorrect")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_blobs;

    fn tiny_model(seed: u64) -> MlpModel {
        let mut rng = Rng::new(seed);
        MlpModel::new(
            3,
            &[
                LayerSpec::single(4, Activation::Relu),
                LayerSpec::double(4, 2, Activation::Relu),
            ],
            3,
            InitScheme::Glorot,
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn glorot_variance_parameter() {
        // m = 3, n = 1 gives variance 4 / 4 = 1.
        let mut rng = Rng::new(1);
        let sample = glorot_init(3, 1, &mut rng);
        assert_eq!(sample.rows() * sample.cols(), 3);

        let mut rng = Rng::new(2);
        let mut acc = 0.0;
        let trials = 100;
        for _ in 0..trials {
            let m = glorot_init(100, 100, &mut rng);
            acc += m.data().iter().map(|x| x * x).sum::<f64>() / m.data().len() as f64;
        }
        let var = acc / trials as f64;
        assert!((var - 0.02).abs() < 0.001, "var {var}");

        let mut a = Rng::new(3);
        let mut b = Rng::new(3);
        assert_eq!(
            glorot_init(5, 5, &mut a).data(),
            glorot_init(5, 5, &mut b).data()
        );
    }

    #[test]
    fn double_product_factor_variance() {
        // Factor entries should have variance sqrt((4/k)/(2n)).
        let (m, n, k) = (50, 50, 10);
        let expect = ((4.0 / k as f64) / (2.0 * n as f64)).sqrt();
        let mut rng = Rng::new(7);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..200 {
            let (w, _, _) =
                double_p_product_init(m, n, k, 1, ProductDenom::InPlusIn, &mut rng);
            acc += w.data().iter().map(|x| x * x).sum::<f64>();
            count += w.data().len();
        }
        let var = acc / count as f64;
        assert!(
            (var - expect).abs() < 0.1 * expect,
            "var {var} expect {expect}"
        );
    }

    #[test]
    fn double_product_matrix_variance_hits_target() {
        // Var((WM)_ij) = 4/(n+n) for m = n, across p.
        let (m, n, k) = (50usize, 50usize, 10usize);
        let expect = 4.0 / (n + n) as f64;
        for p in [1usize, 2, 3] {
            let mut rng = Rng::new(100 + p as u64);
            let mut acc = 0.0;
            let mut count = 0usize;
            for _ in 0..200 {
                let (w, mm, bias) =
                    double_p_product_init(m, n, k, p, ProductDenom::InPlusIn, &mut rng);
                assert!(bias.iter().all(|b| *b == 0.0));
                let prod = w.matmul(&mm);
                acc += prod.data().iter().map(|x| x * x).sum::<f64>();
                count += prod.data().len();
            }
            let var = acc / count as f64;
            assert!(
                (var - expect).abs() < 0.1 * expect,
                "p={p}: var {var} expect {expect}"
            );
        }
    }

    #[test]
    fn double_product_mean_is_zero() {
        let mut rng = Rng::new(5);
        let (w, _, _) = double_p_product_init(100, 100, 20, 2, ProductDenom::InPlusIn, &mut rng);
        let mean = w.data().iter().sum::<f64>() / w.data().len() as f64;
        let var = w.data().iter().map(|x| x * x).sum::<f64>() / w.data().len() as f64;
        let se = (var / w.data().len() as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn forward_identity_and_factorization() {
        // Single identity layer.
        let model = MlpModel {
            layers: vec![Layer::Single {
                weights: Matrix::identity(2),
                bias: vec![0.0; 2],
                activation: Activation::Relu,
            }],
            head: Layer::Single {
                weights: Matrix::identity(2),
                bias: vec![0.0; 2],
                activation: Activation::Linear,
            },
        };
        let x = Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let pass = model.forward(&x).unwrap();
        assert_eq!(pass.activations[0].row(0), &[0.0, 2.0]);

        // Double layer with W = M = I behaves like the identity single layer.
        let double = MlpModel {
            layers: vec![Layer::Double {
                factors: Some((Matrix::identity(2), Matrix::identity(2))),
                out_dim: 2,
                in_dim: 2,
                bias: vec![0.0; 2],
                activation: Activation::Relu,
            }],
            head: model.head.clone(),
        };
        let pass2 = double.forward(&x).unwrap();
        assert_eq!(pass2.activations[0].row(0), pass.activations[0].row(0));
    }

    #[test]
    fn zero_model_gives_uniform_softmax() {
        let model = MlpModel {
            layers: vec![],
            head: Layer::Single {
                weights: Matrix::zeros(4, 3),
                bias: vec![0.0; 4],
                activation: Activation::Linear,
            },
        };
        let x = Matrix::from_rows(&[vec![0.3, -0.2, 0.9]]).unwrap();
        let proba = model.predict_proba(&x).unwrap();
        for j in 0..4 {
            assert!((proba.get(0, j) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let model = tiny_model(3);
        let mut rng = Rng::new(4);
        let x = Matrix::from_fn(10, 3, |_, _| rng.next_gaussian() * 3.0);
        let proba = model.predict_proba(&x).unwrap();
        for i in 0..proba.rows() {
            let sum: f64 = proba.row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_loss_is_ln_num_classes() {
        let model = MlpModel {
            layers: vec![],
            head: Layer::Single {
                weights: Matrix::zeros(2, 2),
                bias: vec![0.0; 2],
                activation: Activation::Linear,
            },
        };
        let x = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let (loss, _) = loss_and_grads(&model, &x, &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logits_drive_loss_to_zero() {
        let model = MlpModel {
            layers: vec![],
            head: Layer::Single {
                weights: Matrix::from_rows(&[vec![100.0], vec![-100.0]]).unwrap(),
                bias: vec![0.0; 2],
                activation: Activation::Linear,
            },
        };
        let x = Matrix::from_rows(&[vec![1.0]]).unwrap();
        let loss = loss_only(&model, &x, &[0]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let model = tiny_model(11);
        assert!(model.param_count() <= 100, "keep the toy model small");
        let mut rng = Rng::new(12);
        let x = Matrix::from_fn(5, 3, |_, _| rng.next_gaussian());
        let labels = vec![0, 1, 2, 1, 0];

        let (_, grads) = loss_and_grads(&model, &x, &labels).unwrap();
        let flat_grads = grads.flatten();
        let params = model.flatten_params();
        assert_eq!(flat_grads.len(), params.len());

        let h = 1e-5;
        for i in 0..params.len() {
            let mut plus = model.clone();
            let mut p = params.clone();
            p[i] += h;
            plus.assign_params(&p);
            let lp = loss_only(&plus, &x, &labels).unwrap();

            let mut minus = model.clone();
            let mut p = params.clone();
            p[i] -= h;
            minus.assign_params(&p);
            let lm = loss_only(&minus, &x, &labels).unwrap();

            let numeric = (lp - lm) / (2.0 * h);
            let analytic = flat_grads[i];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            assert!(
                ((numeric - analytic) / denom).abs() <= 1e-6,
                "param {i}: numeric {numeric} analytic {analytic}"
            );
        }
    }

    #[test]
    fn double_layer_rank_is_capped() {
        let mut rng = Rng::new(9);
        let model = MlpModel::new(
            6,
            &[LayerSpec::double(6, 3, Activation::Relu)],
            2,
            InitScheme::DoubleProduct { p: 2 },
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap();
        let eff = model.layers[0].effective_weights();
        let curve = crate::linalg::singular_value_curve(&eff).unwrap();
        assert_eq!(curve.iter().filter(|s| **s > 1e-9).count(), 3);
    }

    #[test]
    fn param_count_formulas() {
        // The 3072 -> 100/100/100 -> 10 architectures.
        let mut rng = Rng::new(1);
        let double = MlpModel::new(
            3072,
            &[
                LayerSpec::double(100, 18, Activation::Relu),
                LayerSpec::double(100, 8, Activation::Relu),
                LayerSpec::double(100, 6, Activation::Relu),
            ],
            10,
            InitScheme::DoubleProduct { p: 1 },
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap();
        assert_eq!(double.param_count(), 61_206);

        let single = MlpModel::new(
            3072,
            &[
                LayerSpec::single(100, Activation::Relu),
                LayerSpec::single(100, Activation::Relu),
                LayerSpec::single(100, Activation::Relu),
            ],
            10,
            InitScheme::Glorot,
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap();
        assert_eq!(single.param_count(), 328_510);
    }

    #[test]
    fn param_threshold_sweep() {
        // double < single exactly when k < mn/(m+n), in integers.
        for m in 1..=30usize {
            for n in 1..=30usize {
                for k in 1..=m.min(n) {
                    let single = m * n + m;
                    let double = k * (m + n) + m;
                    let fewer = double < single;
                    let threshold = (k * (m + n)) < m * n;
                    assert_eq!(fewer, threshold, "m={m} n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn training_learns_separable_blobs() {
        let dataset = synth_blobs(2, 2, 200, 10.0, 31);
        let mut rng = Rng::new(32);
        let model = MlpModel::new(
            2,
            &[LayerSpec::single(8, Activation::Relu)],
            2,
            InitScheme::Glorot,
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap();
        let run = train(
            model,
            &dataset,
            &TrainConfig {
                num_steps: 2000,
                seed: 33,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let acc = accuracy(&run.model, &dataset, Split::Train).unwrap();
        assert!(acc >= 0.99, "train accuracy {acc}");
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let dataset = synth_blobs(2, 3, 50, 5.0, 8);
        let model = tiny_model(21);
        let before = model.flatten_params();
        let run = train(
            model,
            &dataset,
            &TrainConfig {
                num_steps: 50,
                learning_rate: 0.0,
                checkpoint_every: 10,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(run.model.flatten_params(), before);
        for cp in &run.checkpoints {
            assert_eq!(cp.model.flatten_params(), before);
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let dataset = synth_blobs(3, 3, 60, 6.0, 2);
        let cfg = TrainConfig {
            num_steps: 120,
            seed: 77,
            ..TrainConfig::default()
        };
        let r1 = train(tiny_model(5), &dataset, &cfg).unwrap();
        let r2 = train(tiny_model(5), &dataset, &cfg).unwrap();
        assert_eq!(r1.model.flatten_params(), r2.model.flatten_params());
    }

    #[test]
    fn checkpoint_cadence() {
        let dataset = synth_blobs(3, 3, 60, 6.0, 2);
        let run = train(
            tiny_model(5),
            &dataset,
            &TrainConfig {
                num_steps: 25,
                checkpoint_every: 10,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let steps: Vec<usize> = run.checkpoints.iter().map(|c| c.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);

        let run = train(
            tiny_model(5),
            &dataset,
            &TrainConfig {
                num_steps: 0,
                checkpoint_every: 10,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        assert_eq!(run.checkpoints.len(), 1);
        assert_eq!(run.checkpoints[0].step, 0);
    }

    #[test]
    fn random_model_near_half_accuracy_on_balanced_data() {
        let dataset = synth_blobs(2, 4, 500, 4.0, 13);
        let model = tiny_model_with_dims(4, 2, 19);
        let acc = accuracy(&model, &dataset, Split::Train).unwrap();
        let n = dataset.indices_of(Split::Train).len() as f64;
        let se = (0.5 * 0.5 / n).sqrt();
        assert!((acc - 0.5).abs() <= 5.0 * se, "acc {acc}");
    }

    fn tiny_model_with_dims(input: usize, classes: usize, seed: u64) -> MlpModel {
        let mut rng = Rng::new(seed);
        MlpModel::new(
            input,
            &[LayerSpec::single(6, Activation::Relu)],
            classes,
            InitScheme::Glorot,
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn correctness_split_properties() {
        let dataset = synth_blobs(2, 2, 300, 1.0, 3); // weakly separated: plenty of errors
        let model = tiny_model_with_dims(2, 2, 41);
        let mut rng = Rng::new(6);
        let (correct, incorrect) =
            split_by_correctness(&model, &dataset, Split::Train, 20, &mut rng).unwrap();
        assert_eq!(correct.len(), 20);
        assert_eq!(incorrect.len(), 20);

        // Every correct-subset row classifies correctly, and vice versa.
        let check = |set: &EvalSet, want_correct: bool| {
            let preds = model.predict(set.points()).unwrap();
            let features = dataset.features_of(Split::Train);
            let labels = dataset.labels_of(Split::Train);
            for (row_idx, p) in preds.iter().enumerate() {
                // Find the dataset row matching this subset row.
                let target = set.points().row(row_idx);
                let mut found = None;
                for i in 0..features.rows() {
                    if features.row(i) == target {
                        found = Some(i);
                        break;
                    }
                }
                let i = found.expect("subset rows come from the split");
                assert_eq!(*p == labels[i], want_correct);
            }
        };
        check(&correct, true);
        check(&incorrect, false);
    }

    #[test]
    fn perfect_model_reports_shortfall() {
        let dataset = synth_blobs(2, 2, 100, 12.0, 3);
        let mut rng = Rng::new(50);
        let model = MlpModel::new(
            2,
            &[LayerSpec::single(8, Activation::Relu)],
            2,
            InitScheme::Glorot,
            ProductDenom::InPlusIn,
            &mut rng,
        )
        .unwrap();
        let trained = train(
            model,
            &dataset,
            &TrainConfig {
                num_steps: 1500,
                seed: 51,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let err = split_by_correctness(&trained.model, &dataset, Split::Train, 10, &mut rng)
            .unwrap_err();
        assert!(matches!(err, NnetError::SubsetShortfall { .. }));
    }
}
