//! The five batch commands. All file outputs are written atomically and are
//! pure functions of the config and master seed.

use std::path::{Path, PathBuf};

use crate::datasets::{
    binarize_by_median, load_cifar10_binary, load_csv_labeled, load_csv_unlabeled, load_idx,
    synth_blobs, synth_lowrank, Dataset, Split,
};
use crate::fsio::write_atomic;
use crate::linalg::Matrix;
use crate::meanwidth::{gmw_set, PointSet};
use crate::nnet::{
    accuracy, load_checkpoint, loss_only, save_checkpoint, split_by_correctness, train,
    CheckpointMeta, InitScheme, LayerSpec, MlpModel, NnetError, ProductDenom, TrainConfig,
};
use crate::pruning::{harmonic_prune, PruneConfig, StopRule};
use crate::rng::Rng;
use crate::spectra::{rsv_upper_bound_curve, Activation, BoundInit, EvalSet, OptimizerConfig, ReluLayer};

use super::config::ExperimentConfig;
use super::report::{report_from_csv, CsvTable};
use super::CliError;

// Fixed tags folded into the master seed; every stream in a pipeline run is
// a pure function of the master seed and its role.
const SEED_DATASET: u64 = 0x00da7a;
const SEED_MODEL: u64 = 0x00c0de;
const SEED_TRAIN: u64 = 0x007a1b;
const SEED_SUBSET: u64 = 0x005b5e;
const SEED_PROBE: u64 = 0x00b0b0;
const SEED_GMW: u64 = 0x009a09;
const SEED_PRUNE: u64 = 0x00994e;

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn resolve_in_data_dir(cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, CliError> {
    let dir = cfg.data_dir().ok_or_else(|| {
        CliError::Usage(
            "this dataset needs a data directory (--data-dir, data_dir key, or RELU_SPECTRA_DATA_DIR)"
                .into(),
        )
    })?;
    Ok(dir.join(name))
}

/// Build the dataset named by the config. Synthetic datasets derive their
/// seed from the master seed, so every command in a pipeline sees the same
/// data.
pub(crate) fn resolve_dataset(cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    let master = cfg.master_seed()?;
    let seed = master ^ SEED_DATASET;
    match cfg.require("dataset")? {
        "blobs" => Ok(synth_blobs(
            cfg.get_usize("blobs_classes", 4)?,
            cfg.get_usize("blobs_dim", 10)?,
            cfg.get_usize("blobs_per_class", 200)?,
            cfg.get_f64("blobs_separation", 3.0)?,
            seed,
        )),
        "lowrank" => Ok(synth_lowrank(
            cfg.get_usize("lowrank_classes", 4)?,
            cfg.get_usize("lowrank_dim", 8)?,
            cfg.get_usize("lowrank_rank", 2)?,
            cfg.get_usize("lowrank_samples", 2000)?,
            cfg.get_f64("lowrank_noise", 0.0)?,
            seed,
        )
        .0),
        "csv" => {
            let path = PathBuf::from(cfg.require("csv_path")?);
            let path = if path.is_absolute() || path.exists() {
                path
            } else {
                resolve_in_data_dir(cfg, &path.to_string_lossy())?
            };
            let dataset = if let Some(col) = cfg.get("csv_binarize_column") {
                let col: usize = col.parse().map_err(|_| {
                    CliError::Usage(format!("csv_binarize_column: expected integer, got {col:?}"))
                })?;
                let staged = load_csv_unlabeled(&path, seed)?;
                binarize_by_median(&staged, col)?
            } else {
                let label_column = cfg.get_usize("csv_label_column", 0)?;
                let num_classes = cfg.get_usize("csv_num_classes", 2)?;
                load_csv_labeled(&path, label_column, num_classes, seed)?
            };
            if cfg.get_bool("standardize", true)? {
                Ok(dataset.standardized())
            } else {
                Ok(dataset)
            }
        }
        "idx" => {
            let train_ds = load_idx(
                &resolve_in_data_dir(cfg, cfg.require("idx_train_images")?)?,
                &resolve_in_data_dir(cfg, cfg.require("idx_train_labels")?)?,
            )?;
            let test_ds = load_idx(
                &resolve_in_data_dir(cfg, cfg.require("idx_test_images")?)?,
                &resolve_in_data_dir(cfg, cfg.require("idx_test_labels")?)?,
            )?;
            Ok(Dataset::merge_train_test(train_ds, test_ds)?)
        }
        "mnist" | "fashion_mnist" => {
            let sub = if cfg.require("dataset")? == "mnist" {
                "mnist"
            } else {
                "fashion-mnist"
            };
            let base = resolve_in_data_dir(cfg, sub)?;
            let train_ds = load_idx(
                &base.join("train-images-idx3-ubyte"),
                &base.join("train-labels-idx1-ubyte"),
            )?;
            let test_ds = load_idx(
                &base.join("t10k-images-idx3-ubyte"),
                &base.join("t10k-labels-idx1-ubyte"),
            )?;
            Ok(Dataset::merge_train_test(train_ds, test_ds)?)
        }
        "cifar10" => {
            let base = resolve_in_data_dir(cfg, "cifar-10-batches-bin")?;
            let train_paths: Vec<PathBuf> = (1..=5)
                .map(|i| base.join(format!("data_batch_{i}.bin")))
                .collect();
            let train_ds = load_cifar10_binary(&train_paths)?;
            let test_ds = load_cifar10_binary(&[base.join("test_batch.bin")])?;
            Ok(Dataset::merge_train_test(train_ds, test_ds)?)
        }
        other => Err(CliError::Usage(format!(
            "unknown dataset {other:?}; expected blobs|lowrank|csv|idx|mnist|fashion_mnist|cifar10"
        ))),
    }
}

fn parse_activation(cfg: &ExperimentConfig) -> Result<Activation, CliError> {
    match cfg.get("activation").unwrap_or("relu") {
        "relu" => Ok(Activation::Relu),
        spec => {
            if let Some(slope) = spec.strip_prefix("leaky:") {
                let slope: f64 = slope.parse().map_err(|_| {
                    CliError::Usage(format!("activation: bad leaky slope in {spec:?}"))
                })?;
                Ok(Activation::LeakyRelu(slope))
            } else {
                Err(CliError::Usage(format!(
                    "activation: expected relu or leaky:<slope>, got {spec:?}"
                )))
            }
        }
    }
}

pub(crate) fn build_model(
    cfg: &ExperimentConfig,
    input_dim: usize,
    num_classes: usize,
) -> Result<MlpModel, CliError> {
    let hidden = cfg
        .get_usize_list("hidden")?
        .unwrap_or_else(|| vec![20, 20, 20]);
    let activation = parse_activation(cfg)?;
    let kind = cfg.get("layer_kind").unwrap_or("single");
    let specs: Vec<LayerSpec> = match kind {
        "single" => hidden
            .iter()
            .map(|&w| LayerSpec::single(w, activation))
            .collect(),
        "double" => {
            let ranks = cfg.get_usize_list("double_ranks")?.ok_or_else(|| {
                CliError::Usage("layer_kind = double needs double_ranks".into())
            })?;
            if ranks.len() != hidden.len() {
                return Err(CliError::Usage(format!(
                    "double_ranks has {} entries for {} hidden layers",
                    ranks.len(),
                    hidden.len()
                )));
            }
            hidden
                .iter()
                .zip(&ranks)
                .map(|(&w, &k)| LayerSpec::double(w, k, activation))
                .collect()
        }
        other => {
            return Err(CliError::Usage(format!(
                "layer_kind: expected single or double, got {other:?}"
            )))
        }
    };
    let init = match cfg.get("init").unwrap_or("glorot") {
        "glorot" => InitScheme::Glorot,
        spec => {
            if let Some(p) = spec.strip_prefix("double_p:") {
                let p: usize = p
                    .parse()
                    .map_err(|_| CliError::Usage(format!("init: bad p in {spec:?}")))?;
                InitScheme::DoubleProduct { p }
            } else {
                return Err(CliError::Usage(format!(
                    "init: expected glorot or double_p:<p>, got {spec:?}"
                )));
            }
        }
    };
    let denom = match cfg.get("product_denom").unwrap_or("in_in") {
        "in_in" => ProductDenom::InPlusIn,
        "out_in" => ProductDenom::OutPlusIn,
        other => {
            return Err(CliError::Usage(format!(
                "product_denom: expected in_in or out_in, got {other:?}"
            )))
        }
    };
    let mut rng = Rng::new(cfg.master_seed()? ^ SEED_MODEL);
    MlpModel::new(input_dim, &specs, num_classes, init, denom, &mut rng).map_err(Into::into)
}

fn parse_split(cfg: &ExperimentConfig, key: &str, default: Split) -> Result<Split, CliError> {
    match cfg.get(key) {
        None => Ok(default),
        Some("train") => Ok(Split::Train),
        Some("test") => Ok(Split::Test),
        Some(other) => Err(CliError::Usage(format!(
            "{key}: expected train or test, got {other:?}"
        ))),
    }
}

fn checkpoint_file_name(step: usize) -> String {
    format!("checkpoint_step_{step:08}.json")
}

fn list_checkpoints(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("checkpoint_step_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!(
            "no checkpoint_step_*.json files in {}",
            dir.display()
        )));
    }
    Ok(paths)
}

fn load_model_for(cfg: &ExperimentConfig) -> Result<MlpModel, CliError> {
    let path = match cfg.get("checkpoint") {
        Some(p) => PathBuf::from(p),
        None => list_checkpoints(&cfg.out_dir())?.pop().unwrap(),
    };
    let (model, _) = load_checkpoint(&path)?;
    Ok(model)
}

/// `train`: fit the configured model and emit checkpoints plus a metrics
/// CSV (`step,loss,train_acc,test_acc`) at the checkpoint cadence.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = ensure_out_dir(cfg)?;
    let master = cfg.master_seed()?;
    let dataset = resolve_dataset(cfg)?;
    let model = build_model(cfg, dataset.dim(), dataset.num_classes())?;

    let train_config = TrainConfig {
        batch_size: cfg.get_usize("batch_size", 32)?,
        num_steps: cfg.get_usize("steps", 2000)?,
        learning_rate: cfg.get_f64("learning_rate", 1e-3)?,
        seed: master ^ SEED_TRAIN,
        checkpoint_every: cfg.get_usize("checkpoint_every", 500)?,
        ..TrainConfig::default()
    };
    let run = train(model, &dataset, &train_config)?;

    let mut metrics = String::from("step,loss,train_acc,test_acc\n");
    let train_features = dataset.features_of(Split::Train);
    let train_labels = dataset.labels_of(Split::Train);
    for cp in &run.checkpoints {
        save_checkpoint(
            &cp.model,
            CheckpointMeta {
                seed: master,
                step: cp.step as u64,
            },
            &out.join(checkpoint_file_name(cp.step)),
        )?;
        let loss = loss_only(&cp.model, &train_features, &train_labels)?;
        let train_acc = accuracy(&cp.model, &dataset, Split::Train)?;
        let test_acc = accuracy(&cp.model, &dataset, Split::Test)?;
        metrics.push_str(&format!("{},{},{},{}\n", cp.step, loss, train_acc, test_acc));
    }
    write_out(&out.join("metrics.csv"), metrics.as_bytes())?;
    println!(
        "trained {} steps on {} ({} checkpoints) -> {}",
        train_config.num_steps,
        dataset.name(),
        run.checkpoints.len(),
        out.display()
    );
    Ok(())
}

/// Equal-size correct/incorrect subsets of the probe split. With no explicit
/// `subset_size` the size is `min(pool sizes, 256)`.
fn correctness_subsets(
    cfg: &ExperimentConfig,
    model: &MlpModel,
    dataset: &Dataset,
) -> Result<(EvalSet, EvalSet), CliError> {
    let split = parse_split(cfg, "probe_split", Split::Train)?;
    let subset_size = match cfg.get("subset_size") {
        Some(_) => cfg.get_usize("subset_size", 256)?,
        None => {
            let features = dataset.features_of(split);
            let labels = dataset.labels_of(split);
            let predictions = model.predict(&features).map_err(CliError::from)?;
            let correct = predictions.iter().zip(&labels).filter(|(p, l)| p == l).count();
            let incorrect = labels.len() - correct;
            correct.min(incorrect).min(256).max(1)
        }
    };
    let mut rng = Rng::new(cfg.master_seed()? ^ SEED_SUBSET);
    split_by_correctness(model, dataset, split, subset_size, &mut rng).map_err(Into::into)
}

/// Points pushed through the first `depth` layers (0 = the inputs).
fn propagate(model: &MlpModel, points: &Matrix, depth: usize) -> Result<Matrix, NnetError> {
    if depth == 0 {
        return Ok(points.clone());
    }
    let pass = model.forward(points)?;
    Ok(pass.activations[depth - 1].clone())
}

/// `rsv`: per-layer bound curves on correct and incorrect subsets, each
/// propagated through the preceding layers, one CSV per (layer, subset).
pub fn cmd_rsv(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = ensure_out_dir(cfg)?;
    let master = cfg.master_seed()?;
    let dataset = resolve_dataset(cfg)?;
    let model = load_model_for(cfg)?;
    let (correct, incorrect) = correctness_subsets(cfg, &model, &dataset)?;

    let steps = cfg.get_usize("rsv_steps", 2000)?;
    let learning_rate = cfg.get_f64("rsv_learning_rate", 1e-3)?;
    let batch = cfg.get_usize("rsv_batch", 0)?;

    for (layer_idx, layer) in model.layers.iter().enumerate() {
        let relu_layer = ReluLayer::new(
            layer.effective_weights(),
            layer.bias().to_vec(),
            layer.activation(),
        )?;
        for (subset_tag, subset) in [(0u64, &correct), (1u64, &incorrect)] {
            let name = if subset_tag == 0 { "correct" } else { "incorrect" };
            let points = propagate(&model, subset.points(), layer_idx).map_err(CliError::from)?;
            let eval = EvalSet::from_points(points, dataset.name(), name);
            let opt = OptimizerConfig {
                steps,
                learning_rate,
                batch_size: if batch == 0 { None } else { Some(batch) },
                seed: master ^ SEED_PROBE ^ ((layer_idx as u64) << 8) ^ subset_tag,
                init: BoundInit::SvdWarmStart,
            };
            let curve = rsv_upper_bound_curve(&relu_layer, &eval, &opt)?;
            let path = out.join(format!("rsv_layer{layer_idx}_{name}.csv"));
            write_out(&path, curve.to_csv_string().as_bytes())?;
        }
    }
    println!(
        "wrote bound curves for {} layers -> {}",
        model.layers.len(),
        out.display()
    );
    Ok(())
}

/// `gmw`: Gaussian mean width of the propagated correct/incorrect subsets
/// for every checkpoint and layer (layer 0 is the input set itself). The
/// subsets are fixed by the final checkpoint's classifications so the trace
/// measures processing, not set membership churn.
pub fn cmd_gmw(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = ensure_out_dir(cfg)?;
    let master = cfg.master_seed()?;
    let dataset = resolve_dataset(cfg)?;
    let dir = cfg
        .get("checkpoint_dir")
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.out_dir());
    let paths = list_checkpoints(&dir)?;
    let mut checkpoints = Vec::with_capacity(paths.len());
    for p in &paths {
        let (model, meta) = load_checkpoint(p)?;
        checkpoints.push((meta.step, model));
    }
    let final_model = &checkpoints.last().unwrap().1;
    let (correct, incorrect) = correctness_subsets(cfg, final_model, &dataset)?;
    let num_g = cfg.get_usize("num_g", 100)?;

    let mut csv = String::from("step,layer,subset,gmw,stderr\n");
    for (step, model) in &checkpoints {
        for layer in 0..=model.layers.len() {
            for (subset_tag, subset) in [(0u64, &correct), (1u64, &incorrect)] {
                let name = if subset_tag == 0 { "correct" } else { "incorrect" };
                let points = propagate(model, subset.points(), layer).map_err(CliError::from)?;
                let seed = master ^ SEED_GMW ^ (step << 20) ^ ((layer as u64) << 4) ^ subset_tag;
                let estimate = gmw_set(&PointSet::new(points), num_g, &Rng::new(seed))?;
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    step,
                    layer,
                    name,
                    estimate.value,
                    estimate.stderr()
                ));
            }
        }
    }
    write_out(&out.join("gmw_trace.csv"), csv.as_bytes())?;
    println!(
        "traced {} checkpoints x {} layers -> {}",
        checkpoints.len(),
        checkpoints.last().unwrap().1.layers.len() + 1,
        out.join("gmw_trace.csv").display()
    );
    Ok(())
}

/// `prune`: run harmonic pruning from a checkpoint, emitting the pruned
/// model and the iteration history CSV.
pub fn cmd_prune(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = ensure_out_dir(cfg)?;
    let master = cfg.master_seed()?;
    let dataset = resolve_dataset(cfg)?;
    let model = load_model_for(cfg)?;

    let stop = match cfg.get("stop").unwrap_or("exhaustion") {
        "exhaustion" => StopRule::Exhaustion,
        spec => {
            if let Some(n) = spec.strip_prefix("max_iters:") {
                StopRule::MaxIterations(n.parse().map_err(|_| {
                    CliError::Usage(format!("stop: bad iteration count in {spec:?}"))
                })?)
            } else if let Some(a) = spec.strip_prefix("floor:") {
                StopRule::AccuracyFloor(a.parse().map_err(|_| {
                    CliError::Usage(format!("stop: bad accuracy floor in {spec:?}"))
                })?)
            } else {
                return Err(CliError::Usage(format!(
                    "stop: expected exhaustion, max_iters:<n> or floor:<a>, got {spec:?}"
                )));
            }
        }
    };
    let prune_config = PruneConfig {
        retrain_batches: cfg.get_usize("retrain_batches", 50)?,
        retrain_batch_size: cfg.get_usize("retrain_batch_size", 1024)?,
        accuracy_drop_threshold: cfg.get_f64("accuracy_drop_threshold", 0.005)?,
        periodic_every: cfg.get_usize("periodic_every", 10)?,
        low_rank_trigger: cfg.get_usize("low_rank_trigger", 10)?,
        stop,
        include_head: cfg.get_bool("include_head", true)?,
        decision_split: parse_split(cfg, "prune_split", Split::Train)?,
        retrain_learning_rate: cfg.get_f64("learning_rate", 1e-3)?,
        seed: master ^ SEED_PRUNE,
    };
    let state = harmonic_prune(model, &dataset, &prune_config)?;

    save_checkpoint(
        &state.model,
        CheckpointMeta {
            seed: master,
            step: state.iteration as u64,
        },
        &out.join("pruned_model.json"),
    )?;
    write_out(
        &out.join("prune_history.csv"),
        state.history_to_csv_string().as_bytes(),
    )?;
    println!(
        "pruned for {} iterations (baseline accuracy {:.4}) -> {}",
        state.iteration,
        state.baseline_accuracy,
        out.display()
    );
    Ok(())
}

/// `report`: render an SVG line plot from any of the artifact's CSVs.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = ensure_out_dir(cfg)?;
    let input = PathBuf::from(cfg.require("report_input")?);
    let input = if input.exists() || input.is_absolute() {
        input
    } else {
        out.join(&input)
    };
    let table = CsvTable::read(&input)?;
    let series: Option<Vec<String>> = cfg
        .get("report_series")
        .map(|s| s.split(',').map(|c| c.trim().to_string()).collect());
    let window = cfg.get_usize("report_window", 0)?;
    let svg = report_from_csv(&table, cfg.get("report_x"), series.as_deref(), window)?;

    let output = match cfg.get("report_output") {
        Some(name) => out.join(name),
        None => out.join(
            input
                .file_stem()
                .map(|s| format!("{}.svg", s.to_string_lossy()))
                .unwrap_or_else(|| "report.svg".into()),
        ),
    };
    write_out(&output, svg.as_bytes())?;
    println!("rendered {} -> {}", input.display(), output.display());
    Ok(())
}
