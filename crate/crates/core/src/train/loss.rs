use crate::error::{Result, VeError};
use crate::numeric::Tensor3;

/// Mean squared error over every element and its gradient `2 (pred - target) / N`.
pub fn mse_loss(pred: &Tensor3, target: &Tensor3) -> Result<(f64, Tensor3)> {
    if pred.dims() != target.dims() {
        return Err(VeError::shape(format!(
            "prediction {:?} and target {:?} differ",
            pred.dims(),
            target.dims()
        )));
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return Err(VeError::shape("empty prediction"));
    }
    let scale = 2.0 / n as f64;
    let mut grad = pred.clone();
    let mut sum = 0.0;
    for (g, &t) in grad.as_mut_slice().iter_mut().zip(target.as_slice()) {
        let d = *g - t;
        sum += d * d;
        *g = d * scale;
    }
    Ok((sum / n as f64, grad))
}
