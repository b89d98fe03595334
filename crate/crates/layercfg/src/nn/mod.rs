//! Minimal neural-network engine: dense/conv/pool layers, exact
//! backpropagation, and Adam. Everything runs on `f64` tensors, full batch,
//! single thread.

mod adam;
mod conv;
mod dense;
mod io;
mod pool;

pub use adam::AdamState;
pub use conv::{conv_out_dim, Conv2DLayer, ConvCache};
pub use dense::{Activation, DenseCache, DenseLayer};
pub use pool::{MaxPool2DLayer, PoolCache};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Declarative layer description used to build and serialize networks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    },
    Conv2D {
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
    },
    MaxPool2D {
        window: (usize, usize),
    },
}

#[derive(Debug, Clone)]
pub enum Layer {
    Dense(DenseLayer),
    Conv2D(Conv2DLayer),
    MaxPool2D(MaxPool2DLayer),
}

impl Layer {
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Dense(l) => vec![&l.weights, &l.bias],
            Layer::Conv2D(l) => vec![&l.kernels, &l.bias],
            Layer::MaxPool2D(_) => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Dense(l) => vec![&mut l.weights, &mut l.bias],
            Layer::Conv2D(l) => vec![&mut l.kernels, &mut l.bias],
            Layer::MaxPool2D(_) => vec![],
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(l) => LayerSpec::Dense {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                activation: l.activation,
            },
            Layer::Conv2D(l) => LayerSpec::Conv2D {
                in_ch: l.in_ch,
                out_ch: l.out_ch,
                kernel: (l.kh, l.kw),
                stride: l.stride,
                padding: l.padding,
            },
            Layer::MaxPool2D(l) => LayerSpec::MaxPool2D { window: l.window },
        }
    }
}

enum LayerCache {
    Dense(DenseCache),
    Conv(ConvCache),
    Pool(PoolCache),
}

/// Per-layer parameter gradients, same grouping as `Layer::params`.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub per_layer: Vec<Vec<Tensor>>,
}

impl Gradients {
    pub fn iter_flat(&self) -> impl Iterator<Item = &Tensor> {
        self.per_layer.iter().flatten()
    }
}

/// An ordered layer stack with its Adam state and forward cache.
pub struct Network {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    adam: AdamState,
    cache: Option<Vec<LayerCache>>,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Network {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            adam: self.adam.clone(),
            cache: None,
        }
    }
}

impl Network {
    /// Builds a network with Glorot-uniform weights and zero biases,
    /// deterministic in `seed`. Validates that adjacent layer shapes compose
    /// for the declared `input_shape` (without the batch dim).
    pub fn new(input_shape: &[usize], specs: &[LayerSpec], lr: f64, seed: u64) -> Result<Network> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input_shape.to_vec();
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Dense {
                    in_dim,
                    out_dim,
                    activation,
                } => {
                    let flat: usize = shape.iter().product();
                    if flat != in_dim {
                        return Err(Error::BadLayerSpec(format!(
                            "dense expects {} inputs, previous layer provides {:?}",
                            in_dim, shape
                        )));
                    }
                    let mut l = DenseLayer::new_zeroed(in_dim, out_dim, activation);
                    glorot_fill(&mut l.weights, in_dim, out_dim, &mut rng);
                    shape = vec![out_dim];
                    Layer::Dense(l)
                }
                LayerSpec::Conv2D {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    padding,
                } => {
                    let l = {
                        let mut l = Conv2DLayer::new_zeroed(in_ch, out_ch, kernel, stride, padding);
                        let fan_in = in_ch * kernel.0 * kernel.1;
                        let fan_out = out_ch * kernel.0 * kernel.1;
                        glorot_fill(&mut l.kernels, fan_in, fan_out, &mut rng);
                        l
                    };
                    shape = l.out_shape(&shape)?;
                    Layer::Conv2D(l)
                }
                LayerSpec::MaxPool2D { window } => {
                    let l = MaxPool2DLayer::new(window);
                    shape = l.out_shape(&shape)?;
                    Layer::MaxPool2D(l)
                }
            };
            layers.push(layer);
        }
        let param_shapes: Vec<Vec<Vec<usize>>> = layers
            .iter()
            .map(|l| l.params().iter().map(|t| t.shape().to_vec()).collect())
            .collect();
        Ok(Network {
            input_shape: input_shape.to_vec(),
            layers,
            adam: AdamState::new(&param_shapes, lr),
            cache: None,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            shape = match layer {
                Layer::Dense(l) => vec![l.out_dim],
                Layer::Conv2D(l) => l.out_shape(&shape)?,
                Layer::MaxPool2D(l) => l.out_shape(&shape)?,
            };
        }
        Ok(shape)
    }

    /// Forward a batch shaped `[batch, ..input_shape]`; caches intermediates
    /// for `backward`.
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        if input.shape().len() != self.input_shape.len() + 1
            || input.shape()[1..] != self.input_shape[..]
        {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape.clone(),
                got: input.shape().to_vec(),
            });
        }
        input.check_finite("network input")?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = match layer {
                Layer::Dense(l) => {
                    let (y, c) = l.forward(&x)?;
                    caches.push(LayerCache::Dense(c));
                    y
                }
                Layer::Conv2D(l) => {
                    let (y, c) = l.forward(&x)?;
                    caches.push(LayerCache::Conv(c));
                    y
                }
                Layer::MaxPool2D(l) => {
                    let (y, c) = l.forward(&x)?;
                    caches.push(LayerCache::Pool(c));
                    y
                }
            };
            x.check_finite(&format!("layer {} output", i))?;
        }
        self.cache = Some(caches);
        Ok(x)
    }

    /// Backpropagates `loss_grad` (d loss / d output) through the cached
    /// forward pass and returns exact parameter gradients.
    pub fn backward(&mut self, loss_grad: &Tensor) -> Result<Gradients> {
        let caches = self.cache.as_ref().ok_or(Error::NoForwardCache)?;
        let mut per_layer: Vec<Vec<Tensor>> = vec![Vec::new(); self.layers.len()];
        let mut g = loss_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            match (layer, &caches[i]) {
                (Layer::Dense(l), LayerCache::Dense(c)) => {
                    let (gin, grads) = l.backward(c, &g)?;
                    per_layer[i] = grads;
                    g = gin;
                }
                (Layer::Conv2D(l), LayerCache::Conv(c)) => {
                    let (gin, grads) = l.backward(c, &g)?;
                    per_layer[i] = grads;
                    g = gin;
                }
                (Layer::MaxPool2D(l), LayerCache::Pool(c)) => {
                    g = l.backward(c, &g)?;
                    per_layer[i] = Vec::new();
                }
                _ => unreachable!("cache kind matches layer kind"),
            }
            g.check_finite(&format!("layer {} input grad", i))?;
        }
        Ok(Gradients { per_layer })
    }

    /// One Adam step over every trainable parameter.
    pub fn adam_step(&mut self, grads: &Gradients) -> Result<()> {
        if grads.per_layer.len() != self.layers.len() {
            return Err(Error::InvalidArgument(
                "gradient set does not match layer count".into(),
            ));
        }
        self.adam.step_count += 1;
        let step = self.adam.step_count;
        let hyper = self.adam.hyper();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let params = layer.params_mut();
            for (j, param) in params.into_iter().enumerate() {
                hyper.update_tensor(
                    param,
                    &grads.per_layer[i][j],
                    &mut self.adam.m[i][j],
                    &mut self.adam.v[i][j],
                    step,
                )?;
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|t| t.len())
            .sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .flat_map(|t| t.data().iter().copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for param in layer.params_mut() {
                let n = param.len();
                param.data_mut().copy_from_slice(&values[offset..offset + n]);
                offset += n;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        io::save_network(self, path)
    }

    pub fn load(path: &std::path::Path) -> Result<Network> {
        io::load_network(path)
    }
}

fn glorot_fill(t: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in t.data_mut() {
        *v = rng.gen_range(-a..a);
    }
}
