//! ReLU layer evaluation and numerical upper bounds on its singular values.
//!
//! A ReLU layer `x -> act(Ax + b)` is nonnegatively homogeneous when `b = 0`,
//! and its k-th singular value generalizes the linear one: the smallest
//! worst-case deviation from the layer achievable by a rank-k replacement of
//! `A`. The exact value is intractable, but any rank-k candidate yields an
//! upper bound. [`rsv_upper_bound_curve`] produces one candidate per rank by
//! minimizing the squared deviation over an evaluation set with Adam,
//! starting from the truncated SVD so the bound never exceeds the linear
//! singular value scaled by the set radius.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm2, svd, LinalgError, Matrix};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("input of length {found} does not match layer input dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bias of length {found} does not match {expected} output rows")]
    BiasMismatch { expected: usize, found: usize },
    #[error("leaky slope must lie strictly between 0 and 1, got {0}")]
    InvalidSlope(f64),
    #[error("activation {0:?} is not a ReLU-family activation")]
    NotReluFamily(Activation),
    #[error("the mask identity is defined only for pure ReLU with zero bias")]
    MaskRequiresPureRelu,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("bound optimizer diverged at rank {k}, step {step}")]
    OptimizerDiverged { k: usize, step: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Componentwise activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    /// No activation; used by classification heads, not by [`ReluLayer`].
    Linear,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Linear => x,
        }
    }

    /// Subgradient used by backpropagation; ties at exactly 0 take the
    /// non-positive branch, matching the mask convention.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn validate(self) -> Result<Self, SpectraError> {
        if let Activation::LeakyRelu(slope) = self {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(SpectraError::InvalidSlope(slope));
            }
        }
        Ok(self)
    }

    pub fn apply_slice(self, xs: &mut [f64]) {
        for x in xs {
            *x = self.apply(*x);
        }
    }
}

/// `x -> act(Ax + b)` with `act` in the ReLU family.
#[derive(Debug, Clone)]
pub struct ReluLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl ReluLayer {
    pub fn new(
        weights: Matrix,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, SpectraError> {
        if matches!(activation, Activation::Linear) {
            return Err(SpectraError::NotReluFamily(activation));
        }
        activation.validate()?;
        if bias.len() != weights.rows() {
            return Err(SpectraError::BiasMismatch {
                expected: weights.rows(),
                found: bias.len(),
            });
        }
        Ok(ReluLayer {
            weights,
            bias,
            activation,
        })
    }

    /// Bias-free layer.
    pub fn linear_part(weights: Matrix, activation: Activation) -> Result<Self, SpectraError> {
        let bias = vec![0.0; weights.rows()];
        ReluLayer::new(weights, bias, activation)
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    /// `act(Ax + b)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, SpectraError> {
        if x.len() != self.in_dim() {
            return Err(SpectraError::DimensionMismatch {
                expected: self.in_dim(),
                found: x.len(),
            });
        }
        let mut y = self.weights.matvec(x);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v = self.activation.apply(*v + b);
        }
        Ok(y)
    }

    /// Apply the layer to every row of `xs` (one sample per row).
    pub fn apply_rows(&self, xs: &Matrix) -> Result<Matrix, SpectraError> {
        if xs.cols() != self.in_dim() {
            return Err(SpectraError::DimensionMismatch {
                expected: self.in_dim(),
                found: xs.cols(),
            });
        }
        let mut out = xs.matmul_nt(&self.weights);
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v = self.activation.apply(*v + b);
            }
        }
        Ok(out)
    }
}

/// 0/1 diagonal `d` with `diag(d) * Ax == relu(Ax)`; entries at exactly 0 map to 0.
///
/// Defined only for pure ReLU without bias, where `relu(Ax) = D_x U S V^T x`
/// for the SVD of `A`.
pub fn relu_mask(layer: &ReluLayer, x: &[f64]) -> Result<Vec<f64>, SpectraError> {
    if layer.activation != Activation::Relu || layer.bias.iter().any(|b| *b != 0.0) {
        return Err(SpectraError::MaskRequiresPureRelu);
    }
    if x.len() != layer.in_dim() {
        return Err(SpectraError::DimensionMismatch {
            expected: layer.in_dim(),
            found: x.len(),
        });
    }
    let ax = layer.weights.matvec(x);
    Ok(ax.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }).collect())
}

/// `(||relu(x) - relu(y)||, ||x - y||)`; the first never exceeds the second.
pub fn lipschitz_gap(x: &[f64], y: &[f64]) -> (f64, f64) {
    lipschitz_gap_with(Activation::Relu, x, y)
}

/// Same contraction gap for any ReLU-family activation.
pub fn lipschitz_gap_with(activation: Activation, x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len(), "lipschitz_gap requires equal lengths");
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (a, b) in x.iter().zip(y) {
        let da = activation.apply(*a) - activation.apply(*b);
        let db = a - b;
        lhs += da * da;
        rhs += db * db;
    }
    (lhs.sqrt(), rhs.sqrt())
}

/// Where an evaluation set came from; recorded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EvalOrigin {
    SphereSample { count: usize, seed: u64 },
    Dataset { name: String, subset: String },
}

/// Finite set of evaluation points, one per row.
#[derive(Debug, Clone)]
pub struct EvalSet {
    points: Matrix,
    origin: EvalOrigin,
}

impl EvalSet {
    /// `count` uniform samples of the unit sphere in `R^dim`.
    pub fn sphere_sample(dim: usize, count: usize, seed: u64) -> Self {
        assert!(dim >= 1 && count >= 1);
        let mut rng = Rng::new(seed);
        let points = Matrix::from_rows(
            &(0..count)
                .map(|_| rng.sphere_vector(dim))
                .collect::<Vec<_>>(),
        )
        .expect("sphere samples are finite");
        EvalSet {
            points,
            origin: EvalOrigin::SphereSample { count, seed },
        }
    }

    /// Default sphere sampling density: 256 samples per dimension, capped so
    /// high-dimensional probes stay tractable.
    pub fn default_sphere_count(dim: usize) -> usize {
        (256 * dim).clamp(256, 4096)
    }

    /// Wrap dataset-derived points (used as-is, no normalization).
    pub fn from_points(points: Matrix, name: &str, subset: &str) -> Self {
        EvalSet {
            points,
            origin: EvalOrigin::Dataset {
                name: name.to_string(),
                subset: subset.to_string(),
            },
        }
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn origin(&self) -> &EvalOrigin {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// Largest Euclidean norm over the set; scales the linear-bound comparison.
    pub fn radius(&self) -> f64 {
        self.points.max_row_norm()
    }
}

/// `max_{x in X} ||act(Ax + b)||`, the operator norm over a finite set.
pub fn operator_norm_over_set(layer: &ReluLayer, xs: &EvalSet) -> Result<f64, SpectraError> {
    if xs.is_empty() {
        return Err(SpectraError::EmptyEvalSet);
    }
    let out = layer.apply_rows(xs.points())?;
    Ok((0..out.rows())
        .map(|i| norm2(out.row(i)))
        .fold(0.0, f64::max))
}

/// How the per-rank factors are initialized before optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundInit {
    /// Truncated-SVD factors; guarantees the bound never exceeds the linear
    /// singular value scaled by the set radius.
    SvdWarmStart,
    /// Plain Gaussian factors (variance `2/(fan_in + fan_out)`).
    Random,
}

/// Adam settings for the per-rank bound optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// `None` means full batch over the evaluation set.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub init: BoundInit,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: 2000,
            learning_rate: 1e-3,
            batch_size: None,
            seed: 0,
            init: BoundInit::SvdWarmStart,
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Per-rank upper bounds on the layer's singular values over a set.
#[derive(Debug, Clone)]
pub struct RsvBoundCurve {
    /// Rank indices `0..min(m, n)`.
    pub k_values: Vec<usize>,
    /// Bound obtained at each rank independently.
    pub raw_bounds: Vec<f64>,
    /// Running minimum of `raw_bounds`; the true values are non-increasing,
    /// so the envelope repairs per-rank optimizer noise.
    pub monotone_bounds: Vec<f64>,
    /// Linear singular values of the weight matrix, for comparison.
    pub linear_curve: Vec<f64>,
    pub optimizer_config: OptimizerConfig,
}

impl RsvBoundCurve {
    /// CSV with columns `k,raw_bound,monotone_bound,linear_sigma`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,raw_bound,monotone_bound,linear_sigma\n");
        for (i, &k) in self.k_values.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                k, self.raw_bounds[i], self.monotone_bounds[i], self.linear_curve[i]
            ));
        }
        out
    }
}

/// Two-step upper bound on the ReLU singular values of `layer` over `xs`:
/// minimize the summed squared deviation from the layer with a rank-k
/// factorized candidate, then take the worst-case deviation over the set.
///
/// Rank 0 is closed form (the only rank-0 matrix is 0). With the default
/// SVD warm start, each bound is also evaluated at the initial factors and
/// the smaller value is kept, so `raw_bounds[k] <= sigma_k * radius(X)`.
pub fn rsv_upper_bound_curve(
    layer: &ReluLayer,
    xs: &EvalSet,
    config: &OptimizerConfig,
) -> Result<RsvBoundCurve, SpectraError> {
    if xs.is_empty() {
        return Err(SpectraError::EmptyEvalSet);
    }
    if xs.dim() != layer.in_dim() {
        return Err(SpectraError::DimensionMismatch {
            expected: layer.in_dim(),
            found: xs.dim(),
        });
    }
    assert!(config.steps >= 1, "optimizer needs at least one step");

    let decomposition = svd(layer.weights())?;
    let r = decomposition.sigma.len();
    let points = xs.points();
    // Target activations act(Ax + b), computed once.
    let targets = layer.apply_rows(points)?;

    let mut raw_bounds = Vec::with_capacity(r);
    // k = 0: L = 0 exactly, no optimization.
    let act_bias: Vec<f64> = layer
        .bias
        .iter()
        .map(|b| layer.activation.apply(*b))
        .collect();
    let bound0 = (0..targets.rows())
        .map(|i| {
            targets
                .row(i)
                .iter()
                .zip(&act_bias)
                .map(|(t, h)| (t - h) * (t - h))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    raw_bounds.push(bound0);

    for k in 1..r {
        let bound = optimize_rank_k(layer, points, &targets, &decomposition, k, config)?;
        raw_bounds.push(bound);
    }

    let mut monotone_bounds = Vec::with_capacity(r);
    let mut running = f64::INFINITY;
    for &b in &raw_bounds {
        running = running.min(b);
        monotone_bounds.push(running);
    }

    Ok(RsvBoundCurve {
        k_values: (0..r).collect(),
        raw_bounds,
        monotone_bounds,
        linear_curve: decomposition.sigma.clone(),
        optimizer_config: *config,
    })
}

/// Worst-case deviation of the factorized candidate from the targets.
fn max_deviation(
    layer: &ReluLayer,
    points: &Matrix,
    targets: &Matrix,
    w: &Matrix,
    m: &Matrix,
) -> f64 {
    let hidden = points.matmul_nt(m); // |X| x k
    let z = hidden.matmul_nt(w); // |X| x out
    let mut worst = 0.0f64;
    for i in 0..z.rows() {
        let mut acc = 0.0;
        for ((v, b), t) in z.row(i).iter().zip(&layer.bias).zip(targets.row(i)) {
            let y = layer.activation.apply(*v + b);
            acc += (y - t) * (y - t);
        }
        worst = worst.max(acc.sqrt());
    }
    worst
}

fn optimize_rank_k(
    layer: &ReluLayer,
    points: &Matrix,
    targets: &Matrix,
    decomposition: &crate::linalg::SvdResult,
    k: usize,
    config: &OptimizerConfig,
) -> Result<f64, SpectraError> {
    let m_out = layer.out_dim();
    let n_in = layer.in_dim();
    // Sub-stream per rank so ranks can be processed in any order.
    let mut rng = Rng::new(config.seed ^ k as u64);

    let (mut w, mut mm) = match config.init {
        BoundInit::SvdWarmStart => {
            let mut w = Matrix::zeros(m_out, k);
            let mut mm = Matrix::zeros(k, n_in);
            for l in 0..k {
                let root = decomposition.sigma[l].max(0.0).sqrt();
                for i in 0..m_out {
                    w.set(i, l, decomposition.u.get(i, l) * root);
                }
                for j in 0..n_in {
                    mm.set(l, j, decomposition.v.get(j, l) * root);
                }
            }
            (w, mm)
        }
        BoundInit::Random => {
            let sd_w = (2.0 / (m_out + k) as f64).sqrt();
            let sd_m = (2.0 / (k + n_in) as f64).sqrt();
            (
                Matrix::from_fn(m_out, k, |_, _| rng.next_gaussian() * sd_w),
                Matrix::from_fn(k, n_in, |_, _| rng.next_gaussian() * sd_m),
            )
        }
    };

    // With a warm start the initial candidate already satisfies the linear
    // bound; keep its deviation in case the optimizer wanders above it.
    let warm_bound = match config.init {
        BoundInit::SvdWarmStart => Some(max_deviation(layer, points, targets, &w, &mm)),
        BoundInit::Random => None,
    };

    let n_points = points.rows();
    let batch = config.batch_size.map_or(n_points, |b| b.clamp(1, n_points));
    let mut order: Vec<usize> = (0..n_points).collect();
    let mut cursor = n_points; // triggers an initial shuffle when mini-batching

    let mut adam_w = AdamState::new(m_out * k);
    let mut adam_m = AdamState::new(k * n_in);

    for step in 0..config.steps {
        let (batch_points, batch_targets) = if batch == n_points {
            (points.clone(), targets.clone())
        } else {
            if cursor + batch > n_points {
                rng.shuffle(&mut order);
                cursor = 0;
            }
            let idx = &order[cursor..cursor + batch];
            cursor += batch;
            let bp = Matrix::from_rows(
                &idx.iter().map(|&i| points.row(i).to_vec()).collect::<Vec<_>>(),
            )
            .expect("batch rows are finite");
            let bt = Matrix::from_rows(
                &idx.iter().map(|&i| targets.row(i).to_vec()).collect::<Vec<_>>(),
            )
            .expect("batch rows are finite");
            (bp, bt)
        };

        let hidden = batch_points.matmul_nt(&mm); // B x k
        let z = hidden.matmul_nt(&w); // B x m
        let mut loss = 0.0;
        let mut dz = Matrix::zeros(z.rows(), z.cols());
        for i in 0..z.rows() {
            let zr = z.row(i);
            let tr = batch_targets.row(i);
            for j in 0..m_out {
                let pre = zr[j] + layer.bias[j];
                let y = layer.activation.apply(pre);
                let rsd = y - tr[j];
                loss += rsd * rsd;
                dz.set(i, j, 2.0 * rsd * layer.activation.derivative(pre));
            }
        }
        if !loss.is_finite() {
            return Err(SpectraError::OptimizerDiverged { k, step });
        }

        let grad_w = dz.matmul_tn(&hidden); // m x k
        let dh = dz.matmul(&w); // B x k
        let grad_m = dh.matmul_tn(&batch_points); // k x n

        adam_w.update(w.data_mut(), grad_w.data(), config.learning_rate);
        adam_m.update(mm.data_mut(), grad_m.data(), config.learning_rate);
    }

    let final_bound = max_deviation(layer, points, targets, &w, &mm);
    Ok(match warm_bound {
        Some(wb) => wb.min(final_bound),
        None => final_bound,
    })
}

/// Flat Adam state with bias correction.
pub(crate) struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub(crate) fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub(crate) fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grads[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}
