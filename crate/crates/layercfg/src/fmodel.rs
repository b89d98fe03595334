//! Stage one: encode a raw dataset into a fixed grid and regress it to a
//! layer-count estimate with a three-conv / three-pool / three-FC network.
//! Pretrained against fixed integer targets, then updated online from
//! (dataset, best layer) pairs found by the controller.

use std::path::Path;

use crate::data::{self, SupervisedDataset};
use crate::env::LayerCount;
use crate::error::{Error, Result};
use crate::nn::{conv_out_dim, Activation, LayerSpec, Network};
use crate::tensor::Tensor;

pub const GRID_ROWS: usize = 100;
pub const GRID_COLS: usize = 13;

/// A dataset packed into the fixed `1 x GRID_ROWS x GRID_COLS` input grid.
/// Filled cells are z-scored per column; everything else is exactly zero.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    pub grid: Tensor,
    pub row_count: usize,
    pub col_count: usize,
}

/// Encodes features only (no target column): first `min(rows, 100)` rows and
/// first `min(cols, 13)` columns, z-scored per column over the filled rows,
/// zero-padded elsewhere. Constant columns map to zero.
pub fn encode_dataset(raw: &SupervisedDataset) -> Result<EncodedDataset> {
    encode_dataset_with(raw, true)
}

/// Same placement without the per-column z-score; kept for comparison runs
/// against the normalized path.
pub fn encode_dataset_raw(raw: &SupervisedDataset) -> Result<EncodedDataset> {
    encode_dataset_with(raw, false)
}

fn encode_dataset_with(raw: &SupervisedDataset, normalize: bool) -> Result<EncodedDataset> {
    if raw.rows() == 0 || raw.cols() == 0 {
        return Err(Error::Empty("dataset to encode"));
    }
    let rows = raw.rows().min(GRID_ROWS);
    let cols = raw.cols().min(GRID_COLS);

    // stats over the filled region only
    let mut filled = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            filled[r * cols + c] = raw.feature_row(r)[c];
        }
    }
    let stats = data::column_stats(&filled, rows, cols);

    let mut grid = vec![0.0; GRID_ROWS * GRID_COLS];
    for r in 0..rows {
        for c in 0..cols {
            let v = filled[r * cols + c];
            grid[r * GRID_COLS + c] = if !normalize {
                v
            } else if stats.std[c] > 0.0 {
                (v - stats.mean[c]) / stats.std[c]
            } else {
                0.0
            };
        }
    }
    Ok(EncodedDataset {
        grid: Tensor::from_vec(&[1, GRID_ROWS, GRID_COLS], grid)?,
        row_count: rows,
        col_count: cols,
    })
}

/// Architecture knobs for the depth predictor.
#[derive(Debug, Clone)]
pub struct FModelConfig {
    pub conv_channels: [usize; 3],
    pub kernel: usize,
    pub padding: usize,
    pub pool: usize,
    pub fc_dims: [usize; 2],
    pub lr: f64,
    /// Collapse the remaining spatial extent with one max-pool before the FC
    /// stack. This makes the estimate invariant to how many grid rows are
    /// filled, so a model fitted on a large encoding transfers to a smaller
    /// zero-padded one.
    pub global_pool: bool,
}

impl Default for FModelConfig {
    fn default() -> Self {
        FModelConfig {
            conv_channels: [8, 16, 32],
            kernel: 3,
            padding: 1,
            pool: 2,
            fc_dims: [64, 16],
            lr: 1e-3,
            global_pool: false,
        }
    }
}

impl FModelConfig {
    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        let mut specs = Vec::new();
        let mut ch = 1usize;
        let (mut h, mut w) = (GRID_ROWS, GRID_COLS);
        for &out_ch in &self.conv_channels {
            specs.push(LayerSpec::Conv2D {
                in_ch: ch,
                out_ch,
                kernel: (self.kernel, self.kernel),
                stride: 1,
                padding: self.padding,
            });
            h = conv_out_dim(h, self.kernel, 1, self.padding)
                .ok_or_else(|| Error::BadLayerSpec("conv collapses height".into()))?;
            w = conv_out_dim(w, self.kernel, 1, self.padding)
                .ok_or_else(|| Error::BadLayerSpec("conv collapses width".into()))?;
            specs.push(LayerSpec::MaxPool2D {
                window: (self.pool, self.pool),
            });
            h = conv_out_dim(h, self.pool, self.pool, 0)
                .ok_or_else(|| Error::BadLayerSpec("pool collapses height".into()))?;
            w = conv_out_dim(w, self.pool, self.pool, 0)
                .ok_or_else(|| Error::BadLayerSpec("pool collapses width".into()))?;
            ch = out_ch;
        }
        if self.global_pool && (h > 1 || w > 1) {
            specs.push(LayerSpec::MaxPool2D { window: (h, w) });
            (h, w) = (1, 1);
        }
        let mut in_dim = ch * h * w;
        for &out_dim in &self.fc_dims {
            specs.push(LayerSpec::Dense {
                in_dim,
                out_dim,
                activation: Activation::Relu,
            });
            in_dim = out_dim;
        }
        specs.push(LayerSpec::Dense {
            in_dim,
            out_dim: 1,
            activation: Activation::Identity,
        });
        Ok(specs)
    }
}

/// The convolutional depth predictor.
pub struct FModel {
    pub net: Network,
}

impl FModel {
    pub fn new(cfg: &FModelConfig, seed: u64) -> Result<FModel> {
        let net = Network::new(&[1, GRID_ROWS, GRID_COLS], &cfg.layer_specs()?, cfg.lr, seed)?;
        Ok(FModel { net })
    }

    /// Unrounded layer estimate for one encoding.
    pub fn predict(&mut self, e: &EncodedDataset) -> Result<f64> {
        let x = e.grid.reshape(&[1, 1, GRID_ROWS, GRID_COLS])?;
        Ok(self.net.forward(&x)?.data()[0])
    }

    fn predict_batch(&mut self, encodings: &[&EncodedDataset]) -> Result<Tensor> {
        let data: Vec<f64> = encodings
            .iter()
            .flat_map(|e| e.grid.data().iter().copied())
            .collect();
        let x = Tensor::from_vec(&[encodings.len(), 1, GRID_ROWS, GRID_COLS], data)?;
        self.net.forward(&x)
    }

    /// Rounded, clamped layer count for seeding the controller.
    pub fn init_layer(&mut self, e: &EncodedDataset, layer_max: u32) -> Result<LayerCount> {
        let pred = self.predict(e)?;
        let rounded = pred.round().clamp(1.0, layer_max as f64) as u32;
        LayerCount::new(rounded, layer_max)
    }

    /// `steps` Adam iterations pulling the prediction for `e` toward
    /// `best_layer`; returns the final squared error.
    pub fn update(&mut self, e: &EncodedDataset, best_layer: LayerCount, steps: usize) -> Result<f64> {
        if steps == 0 {
            return Err(Error::InvalidArgument("update requires steps >= 1".into()));
        }
        self.fit(&[e], best_layer.get() as f64, steps, 0.0)
    }

    /// Shared regression loop: Adam steps minimizing
    /// `mean((predict(e_i) - target)^2)` over the given encodings. Stops
    /// early once the loss drops below `stop_loss`. Returns the final loss.
    pub fn fit(
        &mut self,
        encodings: &[&EncodedDataset],
        target: f64,
        steps: usize,
        stop_loss: f64,
    ) -> Result<f64> {
        if encodings.is_empty() {
            return Err(Error::Empty("encoding batch"));
        }
        let n = encodings.len() as f64;
        for _ in 0..steps {
            let preds = self.predict_batch(encodings)?;
            let loss = preds
                .data()
                .iter()
                .map(|p| (p - target) * (p - target))
                .sum::<f64>()
                / n;
            if loss <= stop_loss {
                return Ok(loss);
            }
            let upstream = Tensor::from_vec(
                preds.shape(),
                preds.data().iter().map(|p| 2.0 * (p - target) / n).collect(),
            )?;
            let grads = self.net.backward(&upstream)?;
            self.net.adam_step(&grads)?;
        }
        let preds = self.predict_batch(encodings)?;
        let loss = preds
            .data()
            .iter()
            .map(|p| (p - target) * (p - target))
            .sum::<f64>()
            / n;
        Ok(loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.net.save(path)
    }

    pub fn load(path: &Path) -> Result<FModel> {
        Ok(FModel {
            net: Network::load(path)?,
        })
    }
}

/// One pretraining outcome: predictions around training a single integer
/// target on one dataset.
#[derive(Debug, Clone)]
pub struct PretrainRow {
    pub dataset: String,
    pub target: f64,
    /// Prediction before this target's training (carried over from the
    /// previous target, or the random init for the first).
    pub initial: f64,
    pub train_pred: f64,
    pub test_pred: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub rows: Vec<PretrainRow>,
}

/// Trains the model on each integer target in sequence, carrying weights
/// over between targets, and records train/test-split predictions per
/// dataset. Splits are 80/20 and seeded. The train split is encoded as
/// several disjoint grids with the same row count as the test split, so
/// train and test encodings have identical fill geometry; otherwise the
/// zero-padding asymmetry alone shifts the test prediction.
pub fn pretrain_experiment(
    f: &mut FModel,
    datasets: &[(String, SupervisedDataset)],
    targets: &[i64],
    epochs: usize,
    split_seed: u64,
) -> Result<PretrainReport> {
    if targets.is_empty() {
        return Err(Error::Empty("target list"));
    }
    if datasets.is_empty() {
        return Err(Error::Empty("dataset list"));
    }
    struct Entry {
        name: String,
        train_chunks: Vec<EncodedDataset>,
        test: EncodedDataset,
    }
    let mut encoded = Vec::new();
    for (name, ds) in datasets {
        let (train, test) = data::split(ds, 0.2, split_seed)?;
        let chunk = test.rows().min(train.rows());
        let mut train_chunks = Vec::new();
        for start in (0..train.rows()).step_by(chunk) {
            if start + chunk > train.rows() {
                break; // drop the ragged remainder so all grids match
            }
            train_chunks.push(encode_dataset(&data::slice_rows(&train, start, chunk)?)?);
        }
        encoded.push(Entry {
            name: name.clone(),
            train_chunks,
            test: encode_dataset(&test)?,
        });
    }
    let train_refs: Vec<&EncodedDataset> = encoded
        .iter()
        .flat_map(|e| e.train_chunks.iter())
        .collect();

    let mean_pred = |f: &mut FModel, chunks: &[EncodedDataset]| -> Result<f64> {
        let mut sum = 0.0;
        for c in chunks {
            sum += f.predict(c)?;
        }
        Ok(sum / chunks.len() as f64)
    };

    let mut rows = Vec::new();
    for &target in targets {
        let mut initials = Vec::with_capacity(encoded.len());
        for e in &encoded {
            initials.push(mean_pred(f, &e.train_chunks)?);
        }
        f.fit(&train_refs, target as f64, epochs, 1e-6)?;
        for (i, e) in encoded.iter().enumerate() {
            rows.push(PretrainRow {
                dataset: e.name.clone(),
                target: target as f64,
                initial: initials[i],
                train_pred: mean_pred(f, &e.train_chunks)?,
                test_pred: f.predict(&e.test)?,
            });
        }
    }
    Ok(PretrainReport { rows })
}
