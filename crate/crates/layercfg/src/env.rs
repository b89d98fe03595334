//! The RL environment: rebuild the target network at a given depth, train it
//! a fixed number of full-batch Adam iterations, and hand back the final
//! training loss as the state signal.

use crate::data::SupervisedDataset;
use crate::error::{Error, Result};
use crate::nn::{Activation, LayerSpec, Network};
use crate::seeding;
use crate::tensor::{mse_grad, mse_loss};

/// Hidden-layer count of the target network, always within `[1, layer_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LayerCount(u32);

impl LayerCount {
    pub fn new(value: u32, layer_max: u32) -> Result<LayerCount> {
        if value >= 1 && value <= layer_max {
            Ok(LayerCount(value))
        } else {
            Err(Error::LayerOutOfBounds {
                value: value as i64,
                max: layer_max,
            })
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub nodes_per_layer: usize,
    /// Full-batch Adam iterations per environment step.
    pub train_iters: usize,
    pub lr: f64,
    pub layer_max: u32,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            nodes_per_layer: 100,
            train_iters: 100,
            lr: 0.001,
            layer_max: 15,
            seed: 0,
        }
    }
}

/// Loss returned when target-network training produced NaN/Inf; keeps the
/// control loop total while flagging the step.
pub const FAULT_LOSS: f64 = 1e6;

/// One environment evaluation: the loss (state) plus a divergence flag.
#[derive(Debug, Clone, Copy)]
pub struct EnvResult {
    pub loss: f64,
    pub fault: bool,
}

/// Anything the controller can query for a loss at a given depth. The real
/// target-network environment and the analytic surrogates both implement it.
pub trait Environment {
    fn evaluate(&mut self, layer_count: LayerCount, nonce: u64) -> EnvResult;
    fn layer_max(&self) -> u32;
}

/// Fresh target network: `input_dim -> [nodes, ReLU] x layer_count -> 1`.
/// Weights are seeded from `(cfg.seed, layer_count, nonce)` so every rebuild
/// is reproducible.
pub fn build_target(
    layer_count: LayerCount,
    input_dim: usize,
    cfg: &EnvConfig,
    nonce: u64,
) -> Result<Network> {
    if layer_count.get() > cfg.layer_max {
        return Err(Error::LayerOutOfBounds {
            value: layer_count.get() as i64,
            max: cfg.layer_max,
        });
    }
    let mut specs = Vec::with_capacity(layer_count.get() as usize + 1);
    let mut in_dim = input_dim;
    for _ in 0..layer_count.get() {
        specs.push(LayerSpec::Dense {
            in_dim,
            out_dim: cfg.nodes_per_layer,
            activation: Activation::Relu,
        });
        in_dim = cfg.nodes_per_layer;
    }
    specs.push(LayerSpec::Dense {
        in_dim,
        out_dim: 1,
        activation: Activation::Identity,
    });
    let seed = seeding::combine(cfg.seed, &[layer_count.get() as u64, nonce]);
    Network::new(&[input_dim], &specs, cfg.lr, seed)
}

/// Rebuilds the target at `layer_count`, trains it `cfg.train_iters`
/// full-batch Adam steps on MSE, and returns the final training loss.
pub fn evaluate(
    layer_count: LayerCount,
    dataset: &SupervisedDataset,
    cfg: &EnvConfig,
    nonce: u64,
) -> Result<EnvResult> {
    if dataset.rows() == 0 {
        return Err(Error::Empty("dataset"));
    }
    let mut net = build_target(layer_count, dataset.cols(), cfg, nonce)?;
    let x = dataset.features.clone();
    let y = dataset.targets.reshape(&[dataset.rows(), 1])?;

    let train = |net: &mut Network| -> Result<f64> {
        for _ in 0..cfg.train_iters {
            let pred = net.forward(&x)?;
            let g = mse_grad(&pred, &y)?;
            let grads = net.backward(&g)?;
            net.adam_step(&grads)?;
        }
        let pred = net.forward(&x)?;
        mse_loss(&pred, &y)
    };
    match train(&mut net) {
        Ok(loss) if loss.is_finite() => Ok(EnvResult { loss, fault: false }),
        Ok(_) | Err(Error::NonFinite { .. }) => Ok(EnvResult {
            loss: FAULT_LOSS,
            fault: true,
        }),
        Err(e) => Err(e),
    }
}

/// The real environment: owns the task dataset and its config.
pub struct TargetEnv {
    pub cfg: EnvConfig,
    pub dataset: SupervisedDataset,
}

impl Environment for TargetEnv {
    fn evaluate(&mut self, layer_count: LayerCount, nonce: u64) -> EnvResult {
        match evaluate(layer_count, &self.dataset, &self.cfg, nonce) {
            Ok(r) => r,
            Err(_) => EnvResult {
                loss: FAULT_LOSS,
                fault: true,
            },
        }
    }

    fn layer_max(&self) -> u32 {
        self.cfg.layer_max
    }
}
