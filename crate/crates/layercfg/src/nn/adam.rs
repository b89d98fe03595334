use crate::error::Result;
use crate::tensor::Tensor;

/// Adam optimizer state over one network's parameter tensors, grouped per
/// layer in the same order as `Layer::params`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Vec<Tensor>>,
    pub v: Vec<Vec<Tensor>>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_shapes: &[Vec<Vec<usize>>], lr: f64) -> Self {
        let zeros = |shapes: &[Vec<Vec<usize>>]| {
            shapes
                .iter()
                .map(|layer| layer.iter().map(|s| Tensor::zeros(s)).collect())
                .collect()
        };
        AdamState {
            m: zeros(param_shapes),
            v: zeros(param_shapes),
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn hyper(&self) -> AdamHyper {
        AdamHyper {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// The scalar Adam hyperparameters, detached from the moment buffers.
#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    /// One bias-corrected Adam update of `param` in place.
    pub fn update_tensor(
        &self,
        param: &mut Tensor,
        grad: &Tensor,
        m: &mut Tensor,
        v: &mut Tensor,
        step: u64,
    ) -> Result<()> {
        param.same_shape(grad)?;
        let bc1 = 1.0 - self.beta1.powi(step as i32);
        let bc2 = 1.0 - self.beta2.powi(step as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let md = m.data_mut();
        let vd = v.data_mut();
        for ((p, &g), (mi, vi)) in param
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(md.iter_mut().zip(vd.iter_mut()))
        {
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
