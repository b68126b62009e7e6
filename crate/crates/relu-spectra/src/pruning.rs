//! Harmonic pruning: greedy rank reduction across layers.
//!
//! Each iteration scores every layer by the accuracy change from zeroing its
//! smallest nonzero singular value, rebuilds the least harmful layer as a
//! rank-reduced double layer (`W = U_k sqrt(S~)`, `M = sqrt(S~) V_k'`), and
//! retrains for a few batches when a criterion fires. Ranks only ever
//! decrease; the double form enforces the cap through later retraining.

use thiserror::Error;

use crate::datasets::{DataError, Dataset, Split};
use crate::linalg::{svd, LinalgError, Matrix, SvdResult};
use crate::nnet::{accuracy, train, Layer, MlpModel, NnetError, TrainConfig};

/// Singular values at or below this threshold count as zero.
pub const RANK_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("no layer has a nonzero singular value left to prune")]
    AllLayersExhausted,
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// When the pruning loop stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Keep going until no nonzero singular values remain anywhere.
    Exhaustion,
    MaxIterations(usize),
    /// Stop once the decision-split accuracy falls below this floor.
    AccuracyFloor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneConfig {
    pub retrain_batches: usize,
    pub retrain_batch_size: usize,
    /// Retrain when accuracy drops more than this below the baseline.
    pub accuracy_drop_threshold: f64,
    /// Retrain on every multiple of this iteration count.
    pub periodic_every: usize,
    /// Retrain whenever any layer's rank falls below this.
    pub low_rank_trigger: usize,
    pub stop: StopRule,
    /// Whether the classification head is pruned like the hidden layers.
    pub include_head: bool,
    /// Split on which pruning decisions and the drop criterion are measured;
    /// test accuracy is logged alongside but never drives decisions.
    pub decision_split: Split,
    pub retrain_learning_rate: f64,
    pub seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            retrain_batches: 50,
            retrain_batch_size: 1024,
            accuracy_drop_threshold: 0.005,
            periodic_every: 10,
            low_rank_trigger: 10,
            stop: StopRule::Exhaustion,
            include_head: true,
            decision_split: Split::Train,
            retrain_learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// One row of the pruning history.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneRecord {
    pub iteration: usize,
    /// Index of the pruned layer; the head counts as the last slot.
    pub layer: usize,
    pub rank_after: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub param_count: usize,
    pub retrained: bool,
}

/// The evolving model plus its pruning trajectory.
#[derive(Debug, Clone)]
pub struct PruneState {
    pub model: MlpModel,
    pub iteration: usize,
    pub history: Vec<PruneRecord>,
    /// Decision-split accuracy of the initially trained network.
    pub baseline_accuracy: f64,
}

impl PruneState {
    pub fn new(model: MlpModel, dataset: &Dataset, config: &PruneConfig) -> Result<Self, PruneError> {
        let baseline_accuracy = accuracy(&model, dataset, config.decision_split)?;
        Ok(PruneState {
            model,
            iteration: 0,
            history: Vec::new(),
            baseline_accuracy,
        })
    }

    /// Number of prunable slots (hidden layers, plus the head if included).
    pub fn slot_count(&self, config: &PruneConfig) -> usize {
        self.model.layers.len() + usize::from(config.include_head)
    }

    fn slot_layer(&self, slot: usize) -> &Layer {
        if slot < self.model.layers.len() {
            &self.model.layers[slot]
        } else {
            &self.model.head
        }
    }

    fn set_slot_layer(model: &mut MlpModel, slot: usize, layer: Layer) {
        if slot < model.layers.len() {
            model.layers[slot] = layer;
        } else {
            model.head = layer;
        }
    }

    /// CSV with columns
    /// `iteration,layer,rank_after,train_acc,test_acc,params,retrained`.
    pub fn history_to_csv_string(&self) -> String {
        let mut out = String::from("iteration,layer,rank_after,train_acc,test_acc,params,retrained\n");
        for r in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.iteration,
                r.layer,
                r.rank_after,
                r.train_accuracy,
                r.test_accuracy,
                r.param_count,
                r.retrained
            ));
        }
        out
    }
}

/// Index of the smallest singular value above [`RANK_EPS`], if any. With the
/// values sorted decreasingly this is also the rank after zeroing it.
fn smallest_nonzero_index(sigma: &[f64]) -> Option<usize> {
    sigma.iter().rposition(|s| *s > RANK_EPS)
}

/// Rebuild a layer as a double layer with its smallest nonzero singular
/// value removed: `W` takes the first k columns of `U sqrt(S~)` and `M` the
/// first k rows of `sqrt(S~) V'`, so `W M` reproduces the rank-reduced
/// matrix.
fn split_rank_reduced(dec: &SvdResult, template: &Layer) -> Option<Layer> {
    let k = smallest_nonzero_index(&dec.sigma)?;
    let out_dim = template.out_dim();
    let in_dim = template.in_dim();
    let factors = if k == 0 {
        None
    } else {
        let mut w = Matrix::zeros(out_dim, k);
        let mut m = Matrix::zeros(k, in_dim);
        for l in 0..k {
            let root = dec.sigma[l].sqrt();
            for i in 0..out_dim {
                w.set(i, l, dec.u.get(i, l) * root);
            }
            for j in 0..in_dim {
                m.set(l, j, dec.v.get(j, l) * root);
            }
        }
        Some((w, m))
    };
    Some(Layer::Double {
        factors,
        out_dim,
        in_dim,
        bias: template.bias().to_vec(),
        activation: template.activation(),
    })
}

/// Accuracy delta per slot from zeroing that slot's smallest nonzero
/// singular value; `None` for slots with nothing left to prune. The model
/// itself is untouched.
pub fn candidate_scores(
    state: &PruneState,
    dataset: &Dataset,
    config: &PruneConfig,
) -> Result<Vec<Option<f64>>, PruneError> {
    Ok(scored_candidates(state, dataset, config)?
        .into_iter()
        .map(|c| c.map(|(delta, _)| delta))
        .collect())
}

fn scored_candidates(
    state: &PruneState,
    dataset: &Dataset,
    config: &PruneConfig,
) -> Result<Vec<Option<(f64, Layer)>>, PruneError> {
    let current = accuracy(&state.model, dataset, config.decision_split)?;
    let mut out = Vec::with_capacity(state.slot_count(config));
    for slot in 0..state.slot_count(config) {
        let layer = state.slot_layer(slot);
        let dec = svd(&layer.effective_weights())?;
        let Some(candidate) = split_rank_reduced(&dec, layer) else {
            out.push(None);
            continue;
        };
        let mut trial = state.model.clone();
        PruneState::set_slot_layer(&mut trial, slot, candidate.clone());
        let acc = accuracy(&trial, dataset, config.decision_split)?;
        out.push(Some((acc - current, candidate)));
    }
    Ok(out)
}

/// One greedy pruning step: rebuild the layer whose smallest nonzero
/// singular value costs the least accuracy (ties to the lowest index) and
/// append a history record.
pub fn prune_step(
    state: &mut PruneState,
    dataset: &Dataset,
    config: &PruneConfig,
) -> Result<(), PruneError> {
    let candidates = scored_candidates(state, dataset, config)?;
    apply_best_candidate(state, candidates, dataset)
}

fn apply_best_candidate(
    state: &mut PruneState,
    candidates: Vec<Option<(f64, Layer)>>,
    dataset: &Dataset,
) -> Result<(), PruneError> {
    let mut best: Option<(usize, f64)> = None;
    for (slot, cand) in candidates.iter().enumerate() {
        if let Some((delta, _)) = cand {
            if best.is_none_or(|(_, b)| *delta > b) {
                best = Some((slot, *delta));
            }
        }
    }
    let Some((slot, _)) = best else {
        return Err(PruneError::AllLayersExhausted);
    };
    let (_, layer) = candidates.into_iter().nth(slot).unwrap().unwrap();
    let rank_after = layer.rank_cap();
    PruneState::set_slot_layer(&mut state.model, slot, layer);
    state.iteration += 1;
    let record = PruneRecord {
        iteration: state.iteration,
        layer: slot,
        rank_after,
        train_accuracy: accuracy(&state.model, dataset, Split::Train)?,
        test_accuracy: accuracy(&state.model, dataset, Split::Test)?,
        param_count: state.model.param_count(),
        retrained: false,
    };
    state.history.push(record);
    Ok(())
}

/// Retrain for a few batches when a criterion fires: accuracy fell more than
/// the threshold below the baseline, the iteration count hit the periodic
/// cadence, or some layer rank dropped below the trigger. Returns whether a
/// retrain ran. Factors are trained separately, so ranks cannot grow back.
pub fn maybe_retrain(
    state: &mut PruneState,
    dataset: &Dataset,
    config: &PruneConfig,
) -> Result<bool, PruneError> {
    let current = accuracy(&state.model, dataset, config.decision_split)?;
    let dropped = current < state.baseline_accuracy - config.accuracy_drop_threshold;
    let periodic = state.iteration > 0 && state.iteration % config.periodic_every.max(1) == 0;
    let low_rank = (0..state.slot_count(config))
        .any(|slot| state.slot_layer(slot).rank_cap() < config.low_rank_trigger);
    if !(dropped || periodic || low_rank) {
        return Ok(false);
    }

    let train_config = TrainConfig {
        batch_size: config.retrain_batch_size,
        num_steps: config.retrain_batches,
        learning_rate: config.retrain_learning_rate,
        seed: config.seed ^ state.iteration as u64,
        checkpoint_every: config.retrain_batches.max(1),
        ..TrainConfig::default()
    };
    let run = train(state.model.clone(), dataset, &train_config)?;
    state.model = run.model;
    if let Some(last) = state.history.last_mut() {
        last.retrained = true;
        last.train_accuracy = accuracy(&state.model, dataset, Split::Train)?;
        last.test_accuracy = accuracy(&state.model, dataset, Split::Test)?;
    }
    Ok(true)
}

/// Full pruning loop: score, prune, maybe retrain, until the stop rule (or
/// exhaustion) is reached.
pub fn harmonic_prune(
    model: MlpModel,
    dataset: &Dataset,
    config: &PruneConfig,
) -> Result<PruneState, PruneError> {
    let mut state = PruneState::new(model, dataset, config)?;
    loop {
        match config.stop {
            StopRule::MaxIterations(n) if state.iteration >= n => break,
            StopRule::AccuracyFloor(floor) => {
                let acc = accuracy(&state.model, dataset, config.decision_split)?;
                if acc < floor {
                    break;
                }
            }
            _ => {}
        }
        let candidates = scored_candidates(&state, dataset, config)?;
        if candidates.iter().all(Option::is_none) {
            break; // exhausted regardless of the stop rule
        }
        apply_best_candidate(&mut state, candidates, dataset)?;
        maybe_retrain(&mut state, dataset, config)?;
    }
    Ok(state)
}
