use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Direct 2D convolution, kernels shaped `[out_ch, in_ch, kh, kw]`.
///
/// Output spatial dims follow `floor((in + 2*padding - k) / stride) + 1`.
#[derive(Debug, Clone)]
pub struct Conv2DLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    pub input: Tensor,
}

pub fn conv_out_dim(input: usize, k: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < k {
        return None;
    }
    let out = (padded - k) / stride + 1;
    if out >= 1 {
        Some(out)
    } else {
        None
    }
}

impl Conv2DLayer {
    pub fn new_zeroed(
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
    ) -> Self {
        Conv2DLayer {
            in_ch,
            out_ch,
            kh: kernel.0,
            kw: kernel.1,
            stride,
            padding,
            kernels: Tensor::zeros(&[out_ch, in_ch, kernel.0, kernel.1]),
            bias: Tensor::zeros(&[out_ch]),
        }
    }

    pub fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>> {
        if in_shape.len() != 3 || in_shape[0] != self.in_ch {
            return Err(Error::ShapeMismatch {
                expected: vec![self.in_ch, 0, 0],
                got: in_shape.to_vec(),
            });
        }
        let oh = conv_out_dim(in_shape[1], self.kh, self.stride, self.padding);
        let ow = conv_out_dim(in_shape[2], self.kw, self.stride, self.padding);
        match (oh, ow) {
            (Some(oh), Some(ow)) => Ok(vec![self.out_ch, oh, ow]),
            _ => Err(Error::BadLayerSpec(format!(
                "conv output collapses to zero for input {:?}",
                in_shape
            ))),
        }
    }

    /// Forward over a batch `[batch, in_ch, h, w]`.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ConvCache)> {
        let batch = input.shape()[0];
        let out_sp = self.out_shape(&input.shape()[1..])?;
        let (h, w) = (input.shape()[2], input.shape()[3]);
        let (oh, ow) = (out_sp[1], out_sp[2]);

        let xd = input.data();
        let kd = self.kernels.data();
        let bd = self.bias.data();
        let mut out = vec![0.0; batch * self.out_ch * oh * ow];
        let pad = self.padding as isize;
        for b in 0..batch {
            for oc in 0..self.out_ch {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bd[oc];
                        for ic in 0..self.in_ch {
                            let xbase = (b * self.in_ch + ic) * h * w;
                            let kbase = ((oc * self.in_ch + ic) * self.kh) * self.kw;
                            for ky in 0..self.kh {
                                let iy = (oy * self.stride + ky) as isize - pad;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..self.kw {
                                    let ix = (ox * self.stride + kx) as isize - pad;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    acc += xd[xbase + iy as usize * w + ix as usize]
                                        * kd[kbase + ky * self.kw + kx];
                                }
                            }
                        }
                        out[((b * self.out_ch + oc) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        let y = Tensor::from_vec(&[batch, self.out_ch, oh, ow], out)?;
        Ok((
            y,
            ConvCache {
                input: input.clone(),
            },
        ))
    }

    /// Returns `(input_grad, [kernel_grad, bias_grad])`.
    pub fn backward(&self, cache: &ConvCache, grad: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let input = &cache.input;
        let batch = input.shape()[0];
        let (h, w) = (input.shape()[2], input.shape()[3]);
        let (oh, ow) = (grad.shape()[2], grad.shape()[3]);

        let xd = input.data();
        let kd = self.kernels.data();
        let gd = grad.data();
        let mut dk = vec![0.0; self.kernels.len()];
        let mut db = vec![0.0; self.out_ch];
        let mut dx = vec![0.0; input.len()];
        let pad = self.padding as isize;
        for b in 0..batch {
            for oc in 0..self.out_ch {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = gd[((b * self.out_ch + oc) * oh + oy) * ow + ox];
                        if g == 0.0 {
                            continue;
                        }
                        db[oc] += g;
                        for ic in 0..self.in_ch {
                            let xbase = (b * self.in_ch + ic) * h * w;
                            let kbase = ((oc * self.in_ch + ic) * self.kh) * self.kw;
                            for ky in 0..self.kh {
                                let iy = (oy * self.stride + ky) as isize - pad;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..self.kw {
                                    let ix = (ox * self.stride + kx) as isize - pad;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let xi = xbase + iy as usize * w + ix as usize;
                                    dk[kbase + ky * self.kw + kx] += g * xd[xi];
                                    dx[xi] += g * kd[kbase + ky * self.kw + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok((
            Tensor::from_vec(input.shape(), dx)?,
            vec![
                Tensor::from_vec(self.kernels.shape(), dk)?,
                Tensor::from_vec(&[self.out_ch], db)?,
            ],
        ))
    }
}
