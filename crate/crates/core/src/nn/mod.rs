//! Minimal sequential-stack neural network toolkit.
//!
//! Networks are one or more input branches whose outputs are concatenated
//! along channels and fed to a shared head. Layers are valid (unpadded)
//! stride-1 convolution, ReLU, 2x2/2 max pooling and fully connected; the
//! loss is softmax cross-entropy. Everything is generic over [`Scalar`] so
//! training runs in f32 and gradient checking in f64.

mod checkpoint;
mod gradcheck;
mod layer;
mod network;
mod sgd;
mod tensor;

pub use checkpoint::{load_network, network_from_bytes, network_to_bytes, save_network};
pub(crate) use checkpoint::{ByteReader, ByteWriter};
pub use gradcheck::{grad_check, GradCheckReport, ParamSelection};
pub use layer::{Conv2d, Dense, Layer};
pub use network::{argmax, softmax, softmax_channels, Network, ParamSet};
pub use sgd::Sgd;
pub use tensor::{Shape, Tensor};

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of tensors and parameters.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to any float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
