use crate::error::{Error, Result};
use crate::nn::conv::conv_out_dim;
use crate::tensor::Tensor;

/// Max pooling over `[batch, ch, h, w]`. Stride defaults to the window, so
/// remainder rows/columns that do not fill a window are dropped.
#[derive(Debug, Clone)]
pub struct MaxPool2DLayer {
    pub window: (usize, usize),
    pub stride: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    pub in_shape: Vec<usize>,
    /// Flat input index of the max element for each output element.
    pub argmax: Vec<usize>,
}

impl MaxPool2DLayer {
    pub fn new(window: (usize, usize)) -> Self {
        MaxPool2DLayer {
            window,
            stride: window,
        }
    }

    pub fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>> {
        if in_shape.len() != 3 {
            return Err(Error::ShapeMismatch {
                expected: vec![0, 0, 0],
                got: in_shape.to_vec(),
            });
        }
        let oh = conv_out_dim(in_shape[1], self.window.0, self.stride.0, 0);
        let ow = conv_out_dim(in_shape[2], self.window.1, self.stride.1, 0);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok(vec![in_shape[0], oh, ow]),
            _ => Err(Error::BadLayerSpec(format!(
                "pool window {:?} larger than input {:?}",
                self.window, in_shape
            ))),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, PoolCache)> {
        let batch = input.shape()[0];
        let out_sp = self.out_shape(&input.shape()[1..])?;
        let ch = input.shape()[1];
        let (h, w) = (input.shape()[2], input.shape()[3]);
        let (oh, ow) = (out_sp[1], out_sp[2]);

        let xd = input.data();
        let mut out = vec![0.0; batch * ch * oh * ow];
        let mut argmax = vec![0usize; out.len()];
        for b in 0..batch {
            for c in 0..ch {
                let base = (b * ch + c) * h * w;
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_i = 0usize;
                        for wy in 0..self.window.0 {
                            let iy = oy * self.stride.0 + wy;
                            for wx in 0..self.window.1 {
                                let ix = ox * self.stride.1 + wx;
                                let i = base + iy * w + ix;
                                if xd[i] > best {
                                    best = xd[i];
                                    best_i = i;
                                }
                            }
                        }
                        let oi = ((b * ch + c) * oh + oy) * ow + ox;
                        out[oi] = best;
                        argmax[oi] = best_i;
                    }
                }
            }
        }
        let y = Tensor::from_vec(&[batch, ch, oh, ow], out)?;
        Ok((
            y,
            PoolCache {
                in_shape: input.shape().to_vec(),
                argmax,
            },
        ))
    }

    /// Routes each output gradient back to the input element that won the max.
    pub fn backward(&self, cache: &PoolCache, grad: &Tensor) -> Result<Tensor> {
        let mut dx = vec![0.0; cache.in_shape.iter().product()];
        for (g, &i) in grad.data().iter().zip(&cache.argmax) {
            dx[i] += g;
        }
        Tensor::from_vec(&cache.in_shape, dx)
    }
}
