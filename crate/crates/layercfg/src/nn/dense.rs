use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

/// Fully connected layer: `y = act(x W + b)`, weights shaped `[in_dim, out_dim]`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    /// Input flattened to `[batch, in_dim]`.
    pub input: Tensor,
    /// Shape the input arrived with, for un-flattening the input gradient.
    pub orig_shape: Vec<usize>,
    /// Pre-activation `x W + b`.
    pub z: Tensor,
}

impl DenseLayer {
    pub fn new_zeroed(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: Tensor::zeros(&[in_dim, out_dim]),
            bias: Tensor::zeros(&[out_dim]),
            activation,
        }
    }

    /// Forward over a batch. Inputs with more than 2 dims are flattened to
    /// `[batch, rest]` first.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        let batch = input.shape()[0];
        let rest: usize = input.shape()[1..].iter().product();
        if rest != self.in_dim {
            return Err(Error::ShapeMismatch {
                expected: vec![batch, self.in_dim],
                got: input.shape().to_vec(),
            });
        }
        let orig_shape = input.shape().to_vec();
        let x = input.reshape(&[batch, self.in_dim])?;

        let w = self.weights.data();
        let b = self.bias.data();
        let xd = x.data();
        let mut z = vec![0.0; batch * self.out_dim];
        for bi in 0..batch {
            let xrow = &xd[bi * self.in_dim..(bi + 1) * self.in_dim];
            let zrow = &mut z[bi * self.out_dim..(bi + 1) * self.out_dim];
            zrow.copy_from_slice(b);
            for (i, &xv) in xrow.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &w[i * self.out_dim..(i + 1) * self.out_dim];
                for (o, &wv) in wrow.iter().enumerate() {
                    zrow[o] += xv * wv;
                }
            }
        }
        let z = Tensor::from_vec(&[batch, self.out_dim], z)?;
        let y = self.apply_activation(&z);
        Ok((
            y,
            DenseCache {
                input: x,
                orig_shape,
                z,
            },
        ))
    }

    fn apply_activation(&self, z: &Tensor) -> Tensor {
        match self.activation {
            Activation::Identity => z.clone(),
            Activation::Relu => {
                let data = z.data().iter().map(|&v| v.max(0.0)).collect();
                Tensor::from_vec(z.shape(), data).expect("same size")
            }
            Activation::Softmax => {
                let batch = z.shape()[0];
                let n = self.out_dim;
                let mut out = vec![0.0; batch * n];
                for bi in 0..batch {
                    let row = &z.data()[bi * n..(bi + 1) * n];
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
                    let sum: f64 = exps.iter().sum();
                    for (o, e) in exps.iter().enumerate() {
                        out[bi * n + o] = e / sum;
                    }
                }
                Tensor::from_vec(z.shape(), out).expect("same size")
            }
        }
    }

    /// Returns `(input_grad, [weight_grad, bias_grad])`. `grad` is d(loss)/dy.
    pub fn backward(&self, cache: &DenseCache, grad: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let batch = cache.input.shape()[0];
        grad.same_shape(&cache.z)?;

        // d(loss)/dz
        let dz: Vec<f64> = match self.activation {
            Activation::Identity => grad.data().to_vec(),
            Activation::Relu => grad
                .data()
                .iter()
                .zip(cache.z.data())
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect(),
            Activation::Softmax => {
                let n = self.out_dim;
                let y = self.apply_activation(&cache.z);
                let mut dz = vec![0.0; batch * n];
                for bi in 0..batch {
                    let yrow = &y.data()[bi * n..(bi + 1) * n];
                    let grow = &grad.data()[bi * n..(bi + 1) * n];
                    let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for o in 0..n {
                        dz[bi * n + o] = yrow[o] * (grow[o] - dot);
                    }
                }
                dz
            }
        };

        let xd = cache.input.data();
        let w = self.weights.data();
        let mut dw = vec![0.0; self.in_dim * self.out_dim];
        let mut db = vec![0.0; self.out_dim];
        let mut dx = vec![0.0; batch * self.in_dim];
        for bi in 0..batch {
            let xrow = &xd[bi * self.in_dim..(bi + 1) * self.in_dim];
            let dzrow = &dz[bi * self.out_dim..(bi + 1) * self.out_dim];
            for (o, &g) in dzrow.iter().enumerate() {
                db[o] += g;
            }
            for i in 0..self.in_dim {
                let xv = xrow[i];
                let wrow = &w[i * self.out_dim..(i + 1) * self.out_dim];
                let dwrow = &mut dw[i * self.out_dim..(i + 1) * self.out_dim];
                let mut acc = 0.0;
                for o in 0..self.out_dim {
                    dwrow[o] += xv * dzrow[o];
                    acc += dzrow[o] * wrow[o];
                }
                dx[bi * self.in_dim + i] = acc;
            }
        }

        let input_grad = Tensor::from_vec(&cache.orig_shape, dx)?;
        Ok((
            input_grad,
            vec![
                Tensor::from_vec(&[self.in_dim, self.out_dim], dw)?,
                Tensor::from_vec(&[self.out_dim], db)?,
            ],
        ))
    }
}
