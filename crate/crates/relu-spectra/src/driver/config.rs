//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are rejected
//! so typos surface as usage errors instead of silently applied defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::CliError;

/// Every key the config file understands.
const ALLOWED_KEYS: &[&str] = &[
    // common
    "dataset",
    "out_dir",
    "data_dir",
    "seed",
    "standardize",
    // synthetic blobs
    "blobs_classes",
    "blobs_dim",
    "blobs_per_class",
    "blobs_separation",
    // synthetic low-rank
    "lowrank_classes",
    "lowrank_dim",
    "lowrank_rank",
    "lowrank_samples",
    "lowrank_noise",
    // csv datasets
    "csv_path",
    "csv_label_column",
    "csv_num_classes",
    "csv_binarize_column",
    // idx datasets
    "idx_train_images",
    "idx_train_labels",
    "idx_test_images",
    "idx_test_labels",
    // model
    "hidden",
    "layer_kind",
    "double_ranks",
    "activation",
    "init",
    "product_denom",
    // training
    "batch_size",
    "steps",
    "learning_rate",
    "checkpoint_every",
    // probes
    "num_g",
    "subset_size",
    "probe_split",
    "rsv_steps",
    "rsv_learning_rate",
    "rsv_batch",
    "checkpoint",
    "checkpoint_dir",
    // pruning
    "retrain_batches",
    "retrain_batch_size",
    "accuracy_drop_threshold",
    "periodic_every",
    "low_rank_trigger",
    "stop",
    "include_head",
    "prune_split",
    // report
    "report_input",
    "report_output",
    "report_x",
    "report_series",
    "report_window",
];

/// Parsed experiment configuration with CLI overrides applied.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    map: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected `key = value`, got {:?}",
                    lineno + 1,
                    raw
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !ALLOWED_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key {:?}",
                    lineno + 1,
                    key
                )));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(CliError::Usage(format!(
                    "config line {}: duplicate key {:?}",
                    lineno + 1,
                    key
                )));
            }
        }
        Ok(ExperimentConfig { map })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("{key}: expected an integer, got {v:?}"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("{key}: expected an integer, got {v:?}"))),
        }
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("{key}: expected a number, got {v:?}"))),
        }
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.map.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(v) => Err(CliError::Usage(format!(
                "{key}: expected true/false, got {v:?}"
            ))),
        }
    }

    /// Comma-separated list of integers, e.g. `hidden = 20,20,20`.
    pub fn get_usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        CliError::Usage(format!("{key}: expected integers, got {s:?}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Master seed; every derived stream folds a fixed tag into it.
    pub fn master_seed(&self) -> Result<u64, CliError> {
        self.get_u64("seed", 0)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out_dir").unwrap_or("out"))
    }

    /// Data directory: config key, overridden by the CLI flag, with the
    /// `RELU_SPECTRA_DATA_DIR` environment variable as the fallback.
    pub fn data_dir(&self) -> Option<PathBuf> {
        if let Some(d) = self.get("data_dir") {
            return Some(PathBuf::from(d));
        }
        std::env::var_os("RELU_SPECTRA_DATA_DIR").map(PathBuf::from)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("missing required config key {key:?}")))
    }
}
