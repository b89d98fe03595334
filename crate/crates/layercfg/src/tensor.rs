//! Dense n-dimensional `f64` array, row-major. The single value carrier for
//! networks and datasets.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                got: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Reinterpret with a new shape of the same total size.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                got: self.shape.clone(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    pub fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                got: other.shape.clone(),
            })
        }
    }
}

/// Mean squared error over all elements.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    pred.same_shape(target)?;
    if pred.is_empty() {
        return Err(Error::Empty("tensor in mse_loss"));
    }
    let n = pred.len() as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Gradient of `mse_loss` with respect to `pred`: `2 (pred - target) / n`.
pub fn mse_grad(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    pred.same_shape(target)?;
    let n = pred.len() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Tensor::from_vec(pred.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_identical_inputs_is_zero() {
        let a = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mse_single_element() {
        let p = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let t = Tensor::from_vec(&[1], vec![2.0]).unwrap();
        assert_eq!(mse_loss(&p, &t).unwrap(), 4.0);
    }

    #[test]
    fn mse_mean_over_elements() {
        let p = Tensor::from_vec(&[2], vec![1.0, 3.0]).unwrap();
        let t = Tensor::from_vec(&[2], vec![2.0, 5.0]).unwrap();
        assert_eq!(mse_loss(&p, &t).unwrap(), 2.5);
    }

    #[test]
    fn mse_shape_mismatch_is_error() {
        let p = Tensor::from_vec(&[2], vec![1.0, 3.0]).unwrap();
        let t = Tensor::from_vec(&[1], vec![2.0]).unwrap();
        assert!(mse_loss(&p, &t).is_err());
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Tensor::from_vec(&[3], vec![1.0]).is_err());
    }

    #[test]
    fn check_finite_catches_nan() {
        let t = Tensor::from_vec(&[1], vec![f64::NAN]).unwrap();
        assert!(t.check_finite("test").is_err());
    }
}
