//! The two classifier architectures and their fully convolutional form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::nn::{Conv2d, Layer, Network, Scalar, Shape, Tensor};

pub const GROUND_ARCH: &str = "ground_v1";
pub const FUSION_ARCH: &str = "fusion_v1";
pub const FCN_PREFIX: &str = "fcn_";

/// LeNet-style patch classifier over the texture map:
/// conv 5x5x20, relu, pool, conv 3x3x20, relu, pool, fc 500, relu, fc 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundNetSpec {
    pub patch: usize,
    pub conv1: usize,
    pub conv2: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for GroundNetSpec {
    fn default() -> Self {
        Self {
            patch: 32,
            conv1: 20,
            conv2: 20,
            hidden: 500,
            classes: 2,
        }
    }
}

impl GroundNetSpec {
    /// Spatial size entering the first fully connected layer.
    pub fn pre_fc_side(&self) -> usize {
        ((self.patch - 4) / 2 - 2) / 2
    }

    pub fn build<T: Scalar>(&self, seed: u64) -> Result<Network<T>> {
        let side = self.pre_fc_side();
        let branch = vec![
            Layer::conv(1, self.conv1, 5),
            Layer::Relu,
            Layer::MaxPool,
            Layer::conv(self.conv1, self.conv2, 3),
            Layer::Relu,
            Layer::MaxPool,
        ];
        let head = vec![
            Layer::dense(self.conv2 * side * side, self.hidden),
            Layer::Relu,
            Layer::dense(self.hidden, self.classes),
        ];
        let net = Network::new(
            GROUND_ARCH,
            seed,
            vec![Shape::new(1, self.patch, self.patch)],
            vec![branch],
            head,
        )?;
        Ok(initialize(net, seed))
    }
}

/// Two-path late-fusion classifier: each path is
/// (conv 3x3, relu, conv 1x1, relu, pool) twice; paths are concatenated by
/// channel and fed to fc 1000, relu, fc 2. Paths do not share weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionNetSpec {
    pub patch: usize,
    pub conv3: usize,
    pub conv1x1: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Default for FusionNetSpec {
    fn default() -> Self {
        Self {
            patch: 30,
            conv3: 32,
            conv1x1: 16,
            hidden: 1000,
            classes: 2,
        }
    }
}

impl FusionNetSpec {
    pub fn pre_fc_side(&self) -> usize {
        ((self.patch - 2) / 2 - 2) / 2
    }

    /// Length of the fused vector entering the first fully connected layer.
    pub fn fused_len(&self) -> usize {
        2 * self.conv1x1 * self.pre_fc_side() * self.pre_fc_side()
    }

    fn path<T: Scalar>(&self, in_channels: usize) -> Vec<Layer<T>> {
        vec![
            Layer::conv(in_channels, self.conv3, 3),
            Layer::Relu,
            Layer::conv(self.conv3, self.conv1x1, 1),
            Layer::Relu,
            Layer::MaxPool,
            Layer::conv(self.conv1x1, self.conv3, 3),
            Layer::Relu,
            Layer::conv(self.conv3, self.conv1x1, 1),
            Layer::Relu,
            Layer::MaxPool,
        ]
    }

    /// Inputs are `[rgb (3 channels), texture (1 channel)]`.
    pub fn build<T: Scalar>(&self, seed: u64) -> Result<Network<T>> {
        let p = self.patch;
        let net = Network::new(
            FUSION_ARCH,
            seed,
            vec![Shape::new(3, p, p), Shape::new(1, p, p)],
            vec![self.path(3), self.path(1)],
            vec![
                Layer::dense(self.fused_len(), self.hidden),
                Layer::Relu,
                Layer::dense(self.hidden, self.classes),
            ],
        )?;
        Ok(initialize(net, seed))
    }
}

pub fn build_ground_net(seed: u64) -> Network<f32> {
    GroundNetSpec::default().build(seed).expect("default ground net is well-formed")
}

pub fn build_fusion_net(seed: u64) -> Network<f32> {
    FusionNetSpec::default().build(seed).expect("default fusion net is well-formed")
}

/// Weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases zero.
fn initialize<T: Scalar>(mut net: Network<T>, seed: u64) -> Network<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fans: Vec<(usize, usize)> = net.layers().filter_map(Layer::fans).collect();
    let mut params = net.params_mut();
    for (i, (fan_in, fan_out)) in fans.into_iter().enumerate() {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bounds");
        for w in params[2 * i].iter_mut() {
            *w = T::of(dist.sample(&mut rng));
        }
        params[2 * i + 1].fill(T::zero());
    }
    net
}

/// A network whose fully connected layers have been rewritten as
/// convolutions, so it slides over inputs larger than its training patch.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnNet<T> {
    net: Network<T>,
    patch: Vec<Shape>,
    stride: usize,
}

impl<T: Scalar> FcnNet<T> {
    /// Wraps an already-converted network (e.g. loaded from a checkpoint).
    pub fn from_network(net: Network<T>) -> Result<Self> {
        if !net.arch().starts_with(FCN_PREFIX) || net.has_dense() {
            return Err(Error::UnsupportedNetwork(format!(
                "'{}' is not a fully convolutional network",
                net.arch()
            )));
        }
        let stride = 1 << net.branches()[0].iter().filter(|l| matches!(l, Layer::MaxPool)).count();
        Ok(Self {
            patch: net.input_shapes().to_vec(),
            net,
            stride,
        })
    }

    pub fn network(&self) -> &Network<T> {
        &self.net
    }

    pub fn into_network(self) -> Network<T> {
        self.net
    }

    /// Patch shapes the source network was trained on.
    pub fn patch_shapes(&self) -> &[Shape] {
        &self.patch
    }

    /// Input pixels between adjacent output locations.
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Class score map `(classes, rows, cols)`.
    pub fn scores(&self, inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
        self.net.forward(inputs)
    }
}

/// Reinterprets fully connected layers as convolutions: the first becomes a
/// kernel covering the whole pre-fc map, later ones become 1x1. Parameter
/// values are reused unchanged.
pub fn fcn_convert<T: Scalar>(net: &Network<T>) -> Result<FcnNet<T>> {
    if !net.has_dense() {
        return Err(Error::UnsupportedNetwork(format!(
            "'{}' has no fully connected layers to convert",
            net.arch()
        )));
    }
    if net.branches().iter().flatten().any(|l| matches!(l, Layer::Dense(_))) {
        return Err(Error::UnsupportedNetwork(
            "fully connected layers inside a branch are not supported".into(),
        ));
    }
    // Shape entering the head on the declared patch size.
    let mut shapes = Vec::new();
    for (branch, &s) in net.branches().iter().zip(net.input_shapes()) {
        shapes.push(branch.iter().try_fold(s, |s, l| l.output_shape(s))?);
    }
    let mut shape = Shape::new(
        shapes.iter().map(|s| s.channels).sum(),
        shapes[0].height,
        shapes[0].width,
    );
    let mut head = Vec::with_capacity(net.head().len());
    for layer in net.head() {
        let next = layer.output_shape(shape)?;
        head.push(match layer {
            Layer::Dense(d) => Layer::Conv(Conv2d {
                in_channels: shape.channels,
                out_channels: d.outputs,
                kernel_h: shape.height,
                kernel_w: shape.width,
                weight: d.weight.clone(),
                bias: d.bias.clone(),
            }),
            other => other.clone(),
        });
        shape = next;
    }
    let fcn = Network::new(
        format!("{FCN_PREFIX}{}", net.arch()),
        net.seed(),
        net.input_shapes().to_vec(),
        net.branches().to_vec(),
        head,
    )?;
    FcnNet::from_network(fcn)
}
