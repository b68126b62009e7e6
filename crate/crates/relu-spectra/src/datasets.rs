//! Data ingestion and synthesis: IDX and CSV loaders, the CIFAR-10 binary
//! record format, label binarization, and seeded synthetic generators.
//!
//! Real datasets are optional everywhere; the test suite and the examples
//! run on the synthetic generators alone.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: expected magic {expected:#010x}, found {found:#010x}")]
    WrongMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: truncated at byte offset {offset} (needed {needed} more bytes)")]
    Truncated {
        path: PathBuf,
        offset: usize,
        needed: usize,
    },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("non-numeric cell at data row {row}, column {col}: {cell:?}")]
    NonNumericCell { row: usize, col: usize, cell: String },
    #[error("label {value} at data row {row} is not an integer in 0..{num_classes}")]
    InvalidLabel {
        row: usize,
        value: f64,
        num_classes: usize,
    },
    #[error("column index {col} out of range for {cols} columns")]
    ColumnOutOfRange { col: usize, cols: usize },
    #[error("label byte {value} at record {record} exceeds 9")]
    InvalidLabelByte { record: usize, value: u8 },
    #[error("dataset has no samples")]
    Empty,
    #[error("class {class} has no samples in the train split")]
    MissingTrainClass { class: usize },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which side of the train/test partition a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Feature matrix with integer labels and per-sample split tags.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    num_classes: usize,
    features: Matrix,
    labels: Vec<usize>,
    splits: Vec<Split>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        features: Matrix,
        labels: Vec<usize>,
        splits: Vec<Split>,
    ) -> Result<Self, DataError> {
        if features.rows() != labels.len() || features.rows() != splits.len() {
            return Err(DataError::CountMismatch {
                images: features.rows(),
                labels: labels.len(),
            });
        }
        if let Some((row, &value)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(DataError::InvalidLabel {
                row,
                value: value as f64,
                num_classes,
            });
        }
        Ok(Dataset {
            name: name.into(),
            num_classes,
            features,
            labels,
            splits,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Feature rows of one split, in dataset order.
    pub fn features_of(&self, split: Split) -> Matrix {
        let idx = self.indices_of(split);
        Matrix::from_rows(
            &idx.iter()
                .map(|&i| self.features.row(i).to_vec())
                .collect::<Vec<_>>(),
        )
        .expect("dataset features are finite")
    }

    pub fn labels_of(&self, split: Split) -> Vec<usize> {
        self.indices_of(split)
            .into_iter()
            .map(|i| self.labels[i])
            .collect()
    }

    /// Every class must appear in the train split before training on it.
    pub fn validate_training_ready(&self) -> Result<(), DataError> {
        let mut seen = vec![false; self.num_classes];
        for i in self.indices_of(Split::Train) {
            seen[self.labels[i]] = true;
        }
        if let Some(class) = seen.iter().position(|s| !s) {
            return Err(DataError::MissingTrainClass { class });
        }
        Ok(())
    }

    /// Per-column z-score using train-split statistics only. Columns with
    /// (near-)zero spread are left centered but unscaled.
    pub fn standardized(mut self) -> Dataset {
        let train_rows = self.indices_of(Split::Train);
        let n = train_rows.len().max(1) as f64;
        let cols = self.features.cols();
        for j in 0..cols {
            let mean = train_rows.iter().map(|&i| self.features.get(i, j)).sum::<f64>() / n;
            let var = train_rows
                .iter()
                .map(|&i| {
                    let d = self.features.get(i, j) - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            let sd = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
            for i in 0..self.features.rows() {
                let v = (self.features.get(i, j) - mean) / sd;
                self.features.set(i, j, v);
            }
        }
        self
    }

    /// Concatenate a train-tagged and a test-tagged dataset (same schema).
    pub fn merge_train_test(train: Dataset, test: Dataset) -> Result<Dataset, DataError> {
        if train.dim() != test.dim() {
            return Err(DataError::CountMismatch {
                images: train.dim(),
                labels: test.dim(),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(train.len() + test.len());
        let mut labels = Vec::with_capacity(train.len() + test.len());
        let mut splits = Vec::with_capacity(train.len() + test.len());
        for i in 0..train.len() {
            rows.push(train.features.row(i).to_vec());
            labels.push(train.labels[i]);
            splits.push(Split::Train);
        }
        for i in 0..test.len() {
            rows.push(test.features.row(i).to_vec());
            labels.push(test.labels[i]);
            splits.push(Split::Test);
        }
        Dataset::new(
            train.name.clone(),
            train.num_classes.max(test.num_classes),
            Matrix::from_rows(&rows)?,
            labels,
            splits,
        )
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, DataError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DataError::Truncated {
            path: path.to_path_buf(),
            offset: bytes.len(),
            needed: end - bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parse a big-endian IDX image/label file pair (the MNIST container
/// format). Pixels are scaled from bytes into `[0, 1]`; all samples are
/// tagged train, use [`Dataset::merge_train_test`] for the canonical split.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let img = read_file(images_path)?;
    let magic = read_u32_be(&img, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(DataError::WrongMagic {
            path: images_path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(&img, 4, images_path)? as usize;
    let rows = read_u32_be(&img, 8, images_path)? as usize;
    let cols = read_u32_be(&img, 12, images_path)? as usize;
    let pixel_count = count * rows * cols;
    if img.len() < 16 + pixel_count {
        return Err(DataError::Truncated {
            path: images_path.to_path_buf(),
            offset: img.len(),
            needed: 16 + pixel_count - img.len(),
        });
    }

    let lab = read_file(labels_path)?;
    let magic = read_u32_be(&lab, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(DataError::WrongMagic {
            path: labels_path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let label_count = read_u32_be(&lab, 4, labels_path)? as usize;
    if lab.len() < 8 + label_count {
        return Err(DataError::Truncated {
            path: labels_path.to_path_buf(),
            offset: lab.len(),
            needed: 8 + label_count - lab.len(),
        });
    }
    if label_count != count {
        return Err(DataError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let dim = rows * cols;
    let data: Vec<f64> = img[16..16 + pixel_count]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    let labels: Vec<usize> = lab[8..8 + label_count].iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    Dataset::new(
        "idx",
        num_classes,
        Matrix::new(count.max(1), dim.max(1), data)?,
        labels,
        vec![Split::Train; count],
    )
}

const CIFAR_RECORD: usize = 3073; // 1 label byte + 32*32*3 pixels

/// Parse CIFAR-10 binary batch files (1 label byte + 3072 pixel bytes per
/// record). Pixels are scaled into `[0, 1]`; all samples are tagged train.
pub fn load_cifar10_binary(paths: &[PathBuf]) -> Result<Dataset, DataError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for path in paths {
        let bytes = read_file(path)?;
        if bytes.len() % CIFAR_RECORD != 0 {
            let complete = bytes.len() / CIFAR_RECORD;
            return Err(DataError::Truncated {
                path: path.clone(),
                offset: complete * CIFAR_RECORD,
                needed: CIFAR_RECORD - bytes.len() % CIFAR_RECORD,
            });
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            let label = record[0];
            if label > 9 {
                return Err(DataError::InvalidLabelByte {
                    record: labels.len(),
                    value: label,
                });
            }
            labels.push(label as usize);
            rows.push(record[1..].iter().map(|&b| f64::from(b) / 255.0).collect());
        }
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let count = rows.len();
    Dataset::new(
        "cifar10",
        10,
        Matrix::from_rows(&rows)?,
        labels,
        vec![Split::Train; count],
    )
}

fn seeded_80_20_split(count: usize, seed: u64) -> Vec<Split> {
    let mut idx: Vec<usize> = (0..count).collect();
    Rng::new(seed).shuffle(&mut idx);
    let train_count = (count * 4) / 5;
    let mut splits = vec![Split::Test; count];
    for &i in idx.iter().take(train_count) {
        splits[i] = Split::Train;
    }
    splits
}

/// Load a labeled numeric CSV (RFC 4180, header row). `label_column` indexes
/// the header; remaining columns become features. Datasets in this format
/// carry no canonical split, so an 80/20 split is drawn from `seed`.
pub fn load_csv_labeled(
    path: &Path,
    label_column: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    let (rows, _) = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let cols = rows[0].len();
    if label_column >= cols {
        return Err(DataError::ColumnOutOfRange {
            col: label_column,
            cols,
        });
    }
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let value = row[label_column];
        if value.fract() != 0.0 || value < 0.0 || value >= num_classes as f64 {
            return Err(DataError::InvalidLabel {
                row: r,
                value,
                num_classes,
            });
        }
        labels.push(value as usize);
        features.push(
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != label_column)
                .map(|(_, v)| *v)
                .collect::<Vec<f64>>(),
        );
    }
    let count = rows.len();
    Dataset::new(
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into()),
        num_classes,
        Matrix::from_rows(&features)?,
        labels,
        seeded_80_20_split(count, seed),
    )
}

/// Load a numeric CSV with no label column: a staging dataset (all labels 0)
/// for subsequent [`binarize_by_median`].
pub fn load_csv_unlabeled(path: &Path, seed: u64) -> Result<Dataset, DataError> {
    let (rows, _) = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    let count = rows.len();
    Dataset::new(
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into()),
        1,
        Matrix::from_rows(&rows)?,
        vec![0; count],
        seeded_80_20_split(count, seed),
    )
}

fn read_numeric_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<String>), DataError> {
    let file = fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader
        .headers()?
        .iter()
        .map(|h| h.to_string())
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| DataError::NonNumericCell {
                row: r,
                col: c,
                cell: cell.to_string(),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok((rows, headers))
}

/// Turn a continuous feature column into a binary label: strictly greater
/// than the train-split median maps to 1, everything else to 0. The target
/// column is removed from the features so the label cannot leak back in.
pub fn binarize_by_median(dataset: &Dataset, column: usize) -> Result<Dataset, DataError> {
    let cols = dataset.features.cols();
    if column >= cols {
        return Err(DataError::ColumnOutOfRange { col: column, cols });
    }
    let train_rows = dataset.indices_of(Split::Train);
    let mut train_values: Vec<f64> = train_rows
        .iter()
        .map(|&i| dataset.features.get(i, column))
        .collect();
    if train_values.is_empty() {
        return Err(DataError::Empty);
    }
    train_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = train_values.len() / 2;
    let median = if train_values.len() % 2 == 1 {
        train_values[mid]
    } else {
        0.5 * (train_values[mid - 1] + train_values[mid])
    };

    let labels: Vec<usize> = (0..dataset.len())
        .map(|i| usize::from(dataset.features.get(i, column) > median))
        .collect();
    let features: Vec<Vec<f64>> = (0..dataset.len())
        .map(|i| {
            dataset
                .features
                .row(i)
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != column)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect();
    Dataset::new(
        format!("{}-binarized", dataset.name),
        2,
        Matrix::from_rows(&features)?,
        labels,
        dataset.splits.clone(),
    )
}

/// Gaussian blobs around well-separated deterministic centroids; a
/// nearest-centroid rule classifies them perfectly once `separation` clears
/// the unit noise. Split 80/20 by seeded shuffle.
pub fn synth_blobs(
    num_classes: usize,
    dim: usize,
    per_class: usize,
    separation: f64,
    seed: u64,
) -> Dataset {
    assert!(num_classes >= 1 && dim >= 1 && per_class >= 1);
    let mut rng = Rng::new(seed);
    let centroids: Vec<Vec<f64>> = (0..num_classes)
        .map(|c| {
            let axis = c % dim;
            let ring = (c / (2 * dim)) as f64;
            let sign = if (c / dim) % 2 == 0 { 1.0 } else { -1.0 };
            let mut v = vec![0.0; dim];
            v[axis] = sign * separation * (1.0 + ring);
            v
        })
        .collect();
    let count = num_classes * per_class;
    let mut rows = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for c in 0..num_classes {
        for _ in 0..per_class {
            let noise = rng.gaussian_vector(dim);
            rows.push(
                centroids[c]
                    .iter()
                    .zip(&noise)
                    .map(|(m, e)| m + e)
                    .collect::<Vec<f64>>(),
            );
            labels.push(c);
        }
    }
    let splits = seeded_80_20_split(count, rng.next_u64());
    Dataset::new(
        "blobs",
        num_classes,
        Matrix::from_rows(&rows).expect("blob rows are finite"),
        labels,
        splits,
    )
    .expect("synthetic blobs are valid")
}

/// Labels planted by a rank-`rank` linear score map: `argmax(P x + noise)`.
/// Sampling is stratified so classes balance exactly, which pins the
/// guessing baseline at `1/num_classes` for pruning experiments. Returns the
/// dataset together with the planted matrix.
pub fn synth_lowrank(
    num_classes: usize,
    dim: usize,
    rank: usize,
    samples: usize,
    noise: f64,
    seed: u64,
) -> (Dataset, Matrix) {
    assert!(num_classes >= 2 && rank >= 1 && rank <= dim.min(num_classes));
    let mut attempt_seed = seed;
    loop {
        let mut rng = Rng::new(attempt_seed);
        let scale = 1.0 / ((rank * dim) as f64).sqrt();
        let left = Matrix::from_fn(num_classes, rank, |_, _| rng.next_gaussian());
        let right = Matrix::from_fn(rank, dim, |_, _| rng.next_gaussian());
        let planted = left.matmul(&right).scale(scale);

        let mut quota = vec![samples / num_classes; num_classes];
        for extra in quota.iter_mut().take(samples % num_classes) {
            *extra += 1;
        }
        let mut rows = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        let mut attempts = 0usize;
        let cap = 500 * samples.max(1);
        while rows.len() < samples && attempts < cap {
            attempts += 1;
            let x = rng.gaussian_vector(dim);
            let mut scores = planted.matvec(&x);
            if noise > 0.0 {
                for s in scores.iter_mut() {
                    *s += noise * rng.next_gaussian();
                }
            }
            let label = argmax(&scores);
            if quota[label] > 0 {
                quota[label] -= 1;
                rows.push(x);
                labels.push(label);
            }
        }
        if rows.len() < samples {
            // A pathologically small decision region starved a class; retry
            // with a re-derived planted matrix.
            attempt_seed = Rng::new(attempt_seed).next_u64();
            continue;
        }
        let splits = seeded_80_20_split(samples, rng.next_u64());
        let dataset = Dataset::new(
            "lowrank",
            num_classes,
            Matrix::from_rows(&rows).expect("planted samples are finite"),
            labels,
            splits,
        )
        .expect("synthetic lowrank dataset is valid");
        return (dataset, planted);
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate().skip(1) {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_fixture(dir: &Path, labels: &[u8], side: u32) -> (PathBuf, PathBuf) {
        let n = labels.len() as u32;
        let img_path = dir.join("images.idx");
        let lab_path = dir.join("labels.idx");
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&n.to_be_bytes());
        img.extend_from_slice(&side.to_be_bytes());
        img.extend_from_slice(&side.to_be_bytes());
        for i in 0..(n * side * side) {
            img.push((i % 256) as u8);
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lab.extend_from_slice(&n.to_be_bytes());
        lab.extend_from_slice(labels);
        fs::File::create(&img_path).unwrap().write_all(&img).unwrap();
        fs::File::create(&lab_path).unwrap().write_all(&lab).unwrap();
        (img_path, lab_path)
    }

    #[test]
    fn idx_fixture_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = write_idx_fixture(dir.path(), &[0, 1, 2, 1], 28);
        let ds = load_idx(&img, &lab).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.dim(), 784);
        assert_eq!(ds.labels(), &[0, 1, 2, 1]);
        for v in ds.features().data() {
            assert!((0.0..=1.0).contains(v));
        }
        // byte 255 scales to exactly 1.0
        assert_eq!(ds.features().get(0, 255), 1.0);
    }

    #[test]
    fn idx_magic_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = write_idx_fixture(dir.path(), &[0, 1], 2);
        // Feed the labels file into the images slot.
        let err = load_idx(&lab, &img).unwrap_err();
        assert!(matches!(err, DataError::WrongMagic { expected, .. } if expected == IDX_IMAGES_MAGIC));
    }

    #[test]
    fn idx_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = write_idx_fixture(dir.path(), &[0, 1, 2], 2);
        let (_, lab2) = {
            let d2 = dir.path().join("other");
            fs::create_dir(&d2).unwrap();
            write_idx_fixture(&d2, &[0, 1], 2)
        };
        assert!(matches!(
            load_idx(&img, &lab2),
            Err(DataError::CountMismatch { images: 3, labels: 2 })
        ));
    }

    #[test]
    fn cifar_fixture_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.bin");
        let mut bytes = Vec::new();
        for label in [3u8, 9u8] {
            bytes.push(label);
            bytes.extend(std::iter::repeat_n(128u8, 3072));
        }
        fs::File::create(&path).unwrap().write_all(&bytes).unwrap();
        let ds = load_cifar10_binary(&[path.clone()]).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 3072);
        assert_eq!(ds.labels(), &[3, 9]);

        // Chop the last record short.
        let truncated = dir.path().join("short.bin");
        fs::File::create(&truncated)
            .unwrap()
            .write_all(&bytes[..CIFAR_RECORD + 100])
            .unwrap();
        let err = load_cifar10_binary(&[truncated]).unwrap_err();
        assert!(matches!(err, DataError::Truncated { offset, .. } if offset == CIFAR_RECORD));
    }

    #[test]
    fn csv_fixture_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, "a,b,label\n0.5,1.5,0\n-1.0,2.0,1\n3.0,4.0,1\n").unwrap();
        let ds = load_csv_labeled(&path, 2, 2, 7).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.labels(), &[0, 1, 1]);
        assert_eq!(ds.features().row(1), &[-1.0, 2.0]);

        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "a,b\n1.0,oops\n").unwrap();
        let err = load_csv_unlabeled(&bad, 0).unwrap_err();
        assert!(matches!(err, DataError::NonNumericCell { row: 0, col: 1, .. }));
    }

    #[test]
    fn binarize_by_median_strictly_greater() {
        // Targets [1, 2, 3, 4, 100] with everything in the train split:
        // median 3, so only 4 and 100 map to 1.
        let features = Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![0.0, 2.0],
            vec![0.0, 3.0],
            vec![0.0, 4.0],
            vec![0.0, 100.0],
        ])
        .unwrap();
        let ds = Dataset::new("t", 1, features, vec![0; 5], vec![Split::Train; 5]).unwrap();
        let binary = binarize_by_median(&ds, 1).unwrap();
        assert_eq!(binary.labels(), &[0, 0, 0, 1, 1]);
        assert_eq!(binary.dim(), 1);
        assert_eq!(binary.num_classes(), 2);

        // All-equal targets: nothing is strictly greater.
        let features = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let ds = Dataset::new("t", 1, features, vec![0; 3], vec![Split::Train; 3]).unwrap();
        let binary = binarize_by_median(&ds, 1).unwrap();
        assert_eq!(binary.labels(), &[0, 0, 0]);
    }

    #[test]
    fn median_uses_train_rows_only() {
        let features = Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![0.0, 2.0],
            vec![0.0, 3.0],
            vec![0.0, 1000.0], // test row must not move the median
        ])
        .unwrap();
        let splits = vec![Split::Train, Split::Train, Split::Train, Split::Test];
        let ds = Dataset::new("t", 1, features, vec![0; 4], splits).unwrap();
        let binary = binarize_by_median(&ds, 1).unwrap();
        // train median 2: labels are x > 2
        assert_eq!(binary.labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn blobs_are_separated_and_deterministic() {
        let ds = synth_blobs(3, 2, 50, 10.0, 42);
        assert_eq!(ds.len(), 150);
        ds.validate_training_ready().unwrap();
        // Nearest-centroid check: recover centroids from the labels, then
        // classify every point.
        let mut centroids = vec![vec![0.0; ds.dim()]; 3];
        let mut counts = [0usize; 3];
        for i in 0..ds.len() {
            let c = ds.labels()[i];
            counts[c] += 1;
            for (j, v) in ds.features().row(i).iter().enumerate() {
                centroids[c][j] += v;
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            for v in centroid.iter_mut() {
                *v /= counts[c] as f64;
            }
        }
        let mut correct = 0;
        for i in 0..ds.len() {
            let x = ds.features().row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d: f64 = x.iter().zip(centroid).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            correct += usize::from(best == ds.labels()[i]);
        }
        assert_eq!(correct, ds.len());

        let ds2 = synth_blobs(3, 2, 50, 10.0, 42);
        assert_eq!(ds.features().data(), ds2.features().data());
        assert_eq!(ds.labels(), ds2.labels());
    }

    #[test]
    fn lowrank_planted_rank_and_balance() {
        let (ds, planted) = synth_lowrank(4, 8, 2, 400, 0.0, 11);
        let curve = crate::linalg::singular_value_curve(&planted).unwrap();
        let significant = curve.iter().filter(|s| **s > 1e-9).count();
        assert_eq!(significant, 2);
        let mut counts = [0usize; 4];
        for &l in ds.labels() {
            counts[l] += 1;
        }
        assert_eq!(counts, [100, 100, 100, 100]);
        // Labels really are the planted argmax.
        for i in 0..ds.len() {
            let scores = planted.matvec(ds.features().row(i));
            assert_eq!(argmax(&scores), ds.labels()[i]);
        }
    }

    #[test]
    fn split_tags_partition_samples() {
        let ds = synth_blobs(2, 3, 100, 5.0, 9);
        let train = ds.indices_of(Split::Train).len();
        let test = ds.indices_of(Split::Test).len();
        assert_eq!(train + test, ds.len());
        assert_eq!(train, 160);
    }

    #[test]
    fn standardize_uses_train_statistics() {
        let features = Matrix::from_rows(&[vec![1.0], vec![3.0], vec![100.0]]).unwrap();
        let splits = vec![Split::Train, Split::Train, Split::Test];
        let ds = Dataset::new("t", 1, features, vec![0; 3], splits).unwrap();
        let z = ds.standardized();
        // train mean 2, sd 1
        assert!((z.features().get(0, 0) + 1.0).abs() < 1e-12);
        assert!((z.features().get(1, 0) - 1.0).abs() < 1e-12);
        assert!((z.features().get(2, 0) - 98.0).abs() < 1e-12);
    }
}
