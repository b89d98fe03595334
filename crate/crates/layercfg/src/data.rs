//! Dataset ingestion: CSV loading, z-score normalization, top-k row
//! selection, and seeded train/test splits.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A tabular regression/classification dataset: feature matrix plus a target
/// per row.
#[derive(Debug, Clone)]
pub struct SupervisedDataset {
    pub features: Tensor,
    pub targets: Tensor,
    pub column_names: Vec<String>,
}

/// Per-column mean and population (1/n) standard deviation.
#[derive(Debug, Clone)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Which target column to extract from a CSV file.
#[derive(Debug, Clone)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl SupervisedDataset {
    pub fn rows(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn feature_row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.features.data()[r * c..(r + 1) * c]
    }
}

/// Loads a CSV file. Non-numeric target cells (e.g. iris species) are
/// label-encoded as 0, 1, 2, ... in first-appearance order; non-numeric
/// feature cells are a hard error.
pub fn load_csv(path: &Path, target: &TargetColumn, has_header: bool) -> Result<SupervisedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_path(path)?;

    let header: Vec<String> = if has_header {
        reader.headers()?.iter().map(|s| s.to_string()).collect()
    } else {
        Vec::new()
    };

    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::Empty("csv file"));
    }
    let n_cols = records[0].len();

    let target_idx = match target {
        TargetColumn::Index(i) => {
            if *i >= n_cols {
                return Err(Error::MissingTargetColumn(i.to_string()));
            }
            *i
        }
        TargetColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingTargetColumn(name.clone()))?,
    };

    let column_names: Vec<String> = if has_header {
        header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target_idx)
            .map(|(_, h)| h.clone())
            .collect()
    } else {
        (0..n_cols)
            .filter(|i| *i != target_idx)
            .map(|i| format!("col{}", i))
            .collect()
    };

    let mut features = Vec::with_capacity(records.len() * (n_cols - 1));
    let mut targets = Vec::with_capacity(records.len());
    let mut labels: HashMap<String, f64> = HashMap::new();
    for (r, record) in records.iter().enumerate() {
        for (c, cell) in record.iter().enumerate() {
            if c == target_idx {
                match cell.trim().parse::<f64>() {
                    Ok(v) => targets.push(v),
                    Err(_) => {
                        let next = labels.len() as f64;
                        let v = *labels.entry(cell.trim().to_string()).or_insert(next);
                        targets.push(v);
                    }
                }
            } else {
                let v = cell.trim().parse::<f64>().map_err(|e| Error::CsvCell {
                    row: r,
                    col: c,
                    msg: e.to_string(),
                })?;
                features.push(v);
            }
        }
    }

    Ok(SupervisedDataset {
        features: Tensor::from_vec(&[records.len(), n_cols - 1], features)?,
        targets: Tensor::from_vec(&[records.len()], targets)?,
        column_names,
    })
}

/// First `k` rows in original file order.
pub fn take_top(ds: &SupervisedDataset, k: usize) -> Result<SupervisedDataset> {
    if k == 0 || k > ds.rows() {
        return Err(Error::InvalidArgument(format!(
            "take_top k={} outside [1, {}]",
            k,
            ds.rows()
        )));
    }
    let c = ds.cols();
    Ok(SupervisedDataset {
        features: Tensor::from_vec(&[k, c], ds.features.data()[..k * c].to_vec())?,
        targets: Tensor::from_vec(&[k], ds.targets.data()[..k].to_vec())?,
        column_names: ds.column_names.clone(),
    })
}

/// Contiguous row slice `[start, start + len)`.
pub fn slice_rows(ds: &SupervisedDataset, start: usize, len: usize) -> Result<SupervisedDataset> {
    if len == 0 || start + len > ds.rows() {
        return Err(Error::InvalidArgument(format!(
            "slice_rows [{start}, {}) outside [0, {}]",
            start + len,
            ds.rows()
        )));
    }
    let c = ds.cols();
    Ok(SupervisedDataset {
        features: Tensor::from_vec(
            &[len, c],
            ds.features.data()[start * c..(start + len) * c].to_vec(),
        )?,
        targets: Tensor::from_vec(&[len], ds.targets.data()[start..start + len].to_vec())?,
        column_names: ds.column_names.clone(),
    })
}

/// Z-scores each feature column with population std; zero-variance columns
/// map to all zeros. Targets are left unchanged.
pub fn normalize(ds: &SupervisedDataset) -> (SupervisedDataset, NormStats) {
    let (rows, cols) = (ds.rows(), ds.cols());
    let stats = column_stats(ds.features.data(), rows, cols);
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = ds.features.data()[r * cols + c];
            out[r * cols + c] = if stats.std[c] > 0.0 {
                (v - stats.mean[c]) / stats.std[c]
            } else {
                0.0
            };
        }
    }
    (
        SupervisedDataset {
            features: Tensor::from_vec(&[rows, cols], out).expect("same size"),
            targets: ds.targets.clone(),
            column_names: ds.column_names.clone(),
        },
        stats,
    )
}

pub fn column_stats(data: &[f64], rows: usize, cols: usize) -> NormStats {
    let mut mean = vec![0.0; cols];
    let mut std = vec![0.0; cols];
    for c in 0..cols {
        let mut sum = 0.0;
        for r in 0..rows {
            sum += data[r * cols + c];
        }
        mean[c] = sum / rows as f64;
        let mut var = 0.0;
        for r in 0..rows {
            let d = data[r * cols + c] - mean[c];
            var += d * d;
        }
        std[c] = (var / rows as f64).sqrt();
    }
    NormStats { mean, std }
}

/// Deterministic seeded shuffle followed by a split; the two parts together
/// hold exactly the original rows.
pub fn split(
    ds: &SupervisedDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(SupervisedDataset, SupervisedDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_fraction {} outside (0, 1)",
            test_fraction
        )));
    }
    let rows = ds.rows();
    let n_test = ((rows as f64) * test_fraction).round() as usize;
    let n_test = n_test.clamp(1, rows - 1);
    let mut order: Vec<usize> = (0..rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let pick = |idx: &[usize]| -> SupervisedDataset {
        let c = ds.cols();
        let mut f = Vec::with_capacity(idx.len() * c);
        let mut t = Vec::with_capacity(idx.len());
        for &r in idx {
            f.extend_from_slice(ds.feature_row(r));
            t.push(ds.targets.data()[r]);
        }
        SupervisedDataset {
            features: Tensor::from_vec(&[idx.len(), c], f).expect("same size"),
            targets: Tensor::from_vec(&[idx.len()], t).expect("same size"),
            column_names: ds.column_names.clone(),
        }
    };

    let (test_idx, train_idx) = order.split_at(n_test);
    Ok((pick(train_idx), pick(test_idx)))
}
