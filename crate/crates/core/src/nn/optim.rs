use super::tensor::Scalar;
use crate::error::{Error, Result};

/// One SGD-with-momentum update:
/// `v ← momentum·v − lr·(g + l2·w)`, `w ← w + v`.
/// Pass `l2 = 0` for biases and batch-norm affine parameters.
pub fn sgdm_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    velocity: &mut [T],
    lr: f64,
    momentum: f64,
    l2: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::shape(format!(
            "sgdm: {} params, {} grads, {} velocity entries",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    let (lr, mom, l2) = (T::of(lr), T::of(momentum), T::of(l2));
    for ((w, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = mom * *v - lr * (*g + l2 * *w);
        *w += *v;
    }
    Ok(())
}
