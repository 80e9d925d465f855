use super::network::{Network, ParamSet};
use super::Scalar;
use crate::error::{Error, Result};

/// SGD with classical momentum:
/// `v = momentum * v - lr * grad / batch_count; p += v`.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub lr: T,
    pub momentum: T,
    velocity: Option<ParamSet<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: T, momentum: T) -> Self {
        Self {
            lr,
            momentum,
            velocity: None,
        }
    }

    /// `grads` holds the sum over `batch_count` examples.
    pub fn step(&mut self, net: &mut Network<T>, grads: &ParamSet<T>, batch_count: usize) -> Result<()> {
        if batch_count == 0 {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        let velocity = self.velocity.get_or_insert_with(|| ParamSet::zeros_like(net));
        velocity.check_like(grads)?;
        let mut params = net.params_mut();
        if params.len() != grads.tensors.len()
            || params.iter().zip(&grads.tensors).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape("gradient set does not match network".into()));
        }
        let n = T::of(batch_count as f64);
        for ((p, g), v) in params.iter_mut().zip(&grads.tensors).zip(velocity.tensors.iter_mut()) {
            for ((pi, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                *vi = self.momentum * *vi - self.lr * (gi / n);
                *pi = *pi + *vi;
            }
        }
        Ok(())
    }
}
