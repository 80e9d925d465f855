use super::tensor::{Shape, Tensor};
use super::Scalar;
use crate::error::{Error, Result};

/// Valid cross-correlation, stride 1, no padding, one bias per output
/// channel. Weights are laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Affine map on the flattened input. Weights are laid out `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    Relu,
    /// 2x2 window, stride 2; spatial dims must be even.
    MaxPool,
    Dense(Dense<T>),
}

impl<T: Scalar> Conv2d<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            weight: vec![T::zero(); out_channels * in_channels * kernel_h * kernel_w],
            bias: vec![T::zero(); out_channels],
        }
    }

    fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }
}

impl<T: Scalar> Layer<T> {
    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Layer::Conv(Conv2d::zeros(in_channels, out_channels, kernel, kernel))
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Layer::Dense(Dense::zeros(inputs, outputs))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::Relu => "relu",
            Layer::MaxPool => "maxpool",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Conv(_) | Layer::Dense(_))
    }

    /// `(fan_in, fan_out)` for weight initialization.
    pub(crate) fn fans(&self) -> Option<(usize, usize)> {
        match self {
            Layer::Conv(c) => Some((c.fan_in(), c.out_channels * c.kernel_h * c.kernel_w)),
            Layer::Dense(d) => Some((d.inputs, d.outputs)),
            _ => None,
        }
    }

    pub fn params(&self) -> Option<(&[T], &[T])> {
        match self {
            Layer::Conv(c) => Some((&c.weight, &c.bias)),
            Layer::Dense(d) => Some((&d.weight, &d.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut [T], &mut [T])> {
        match self {
            Layer::Conv(c) => Some((&mut c.weight, &mut c.bias)),
            Layer::Dense(d) => Some((&mut d.weight, &mut d.bias)),
            _ => None,
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            Layer::Conv(c) => {
                if input.channels != c.in_channels {
                    return Err(Error::Shape(format!(
                        "conv expects {} input channels, got {input}",
                        c.in_channels
                    )));
                }
                if input.height < c.kernel_h || input.width < c.kernel_w {
                    return Err(Error::Shape(format!(
                        "conv {}x{} kernel does not fit a {input} input",
                        c.kernel_h, c.kernel_w
                    )));
                }
                Ok(Shape::new(
                    c.out_channels,
                    input.height - c.kernel_h + 1,
                    input.width - c.kernel_w + 1,
                ))
            }
            Layer::Relu => Ok(input),
            Layer::MaxPool => {
                if !input.height.is_multiple_of(2) || !input.width.is_multiple_of(2) || input.height == 0 || input.width == 0 {
                    return Err(Error::Shape(format!(
                        "maxpool 2x2 needs even non-zero spatial dims, got {input}"
                    )));
                }
                Ok(Shape::new(input.channels, input.height / 2, input.width / 2))
            }
            Layer::Dense(d) => {
                if input.len() != d.inputs {
                    return Err(Error::Shape(format!(
                        "dense layer expects {} inputs, got {input} = {}",
                        d.inputs,
                        input.len()
                    )));
                }
                Ok(Shape::vector(d.outputs))
            }
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out_shape = self.output_shape(x.shape())?;
        let data = match self {
            Layer::Conv(c) => conv_forward(c, x, out_shape),
            Layer::Relu => x
                .data()
                .iter()
                .map(|&v| if v > T::zero() { v } else { T::zero() })
                .collect(),
            Layer::MaxPool => {
                let (vals, _) = maxpool_forward(x, out_shape);
                vals
            }
            Layer::Dense(d) => dense_forward(d, x.data()),
        };
        Tensor::from_vec(out_shape, data)
    }

    /// Backpropagates `grad_out` through the layer evaluated at `input`.
    ///
    /// Parameter gradients are added into `param_grads` (weight, bias) when
    /// the layer has parameters. Returns the input gradient when
    /// `need_input_grad` is set.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
        param_grads: Option<(&mut [T], &mut [T])>,
        need_input_grad: bool,
    ) -> Option<Tensor<T>> {
        let in_shape = input.shape();
        match self {
            Layer::Conv(c) => {
                let (gw, gb) = param_grads.expect("conv layer needs parameter gradients");
                conv_backward_params(c, input, grad_out, gw, gb);
                need_input_grad.then(|| conv_backward_input(c, in_shape, grad_out))
            }
            Layer::Dense(d) => {
                let (gw, gb) = param_grads.expect("dense layer needs parameter gradients");
                let g = grad_out.data();
                let x = input.data();
                for o in 0..d.outputs {
                    gb[o] = gb[o] + g[o];
                    let row = &mut gw[o * d.inputs..(o + 1) * d.inputs];
                    for (w, &xi) in row.iter_mut().zip(x) {
                        *w = *w + g[o] * xi;
                    }
                }
                need_input_grad.then(|| {
                    let mut dx = vec![T::zero(); d.inputs];
                    for (row, &go) in d.weight.chunks_exact(d.inputs).zip(g.iter()) {
                        for (dxi, &w) in dx.iter_mut().zip(row) {
                            *dxi = *dxi + w * go;
                        }
                    }
                    Tensor::from_vec(in_shape, dx).expect("shape matches input")
                })
            }
            Layer::Relu => need_input_grad.then(|| {
                let data = input
                    .data()
                    .iter()
                    .zip(grad_out.data())
                    .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                    .collect();
                Tensor::from_vec(in_shape, data).expect("shape matches input")
            }),
            Layer::MaxPool => need_input_grad.then(|| {
                let (_, argmax) = maxpool_forward(input, grad_out.shape());
                let mut dx = vec![T::zero(); in_shape.len()];
                for (&src, &g) in argmax.iter().zip(grad_out.data()) {
                    dx[src] = dx[src] + g;
                }
                Tensor::from_vec(in_shape, dx).expect("shape matches input")
            }),
        }
    }

    /// Discrete state of the layer's nonlinearity at `input`: ReLU sign
    /// classes (0 negative, 1 exactly zero, 2 positive) or pooling argmax
    /// indices. Empty for affine layers.
    pub(crate) fn signature(&self, input: &Tensor<T>, out: &mut Vec<u32>) -> Result<()> {
        match self {
            Layer::Relu => out.extend(input.data().iter().map(|&v| {
                if v < T::zero() {
                    0
                } else if v == T::zero() {
                    1
                } else {
                    2
                }
            })),
            Layer::MaxPool => {
                let s = self.output_shape(input.shape())?;
                let (_, argmax) = maxpool_forward(input, s);
                out.extend(argmax.into_iter().map(|i| i as u32));
            }
            _ => {}
        }
        Ok(())
    }
}

fn conv_forward<T: Scalar>(c: &Conv2d<T>, x: &Tensor<T>, out_shape: Shape) -> Vec<T> {
    let s = x.shape();
    let (oh, ow) = (out_shape.height, out_shape.width);
    let (kh, kw) = (c.kernel_h, c.kernel_w);
    let xd = x.data();
    let mut out = vec![T::zero(); out_shape.len()];
    // Each output pixel accumulates bias, then input channel, kernel row,
    // kernel column in that order: the same order as a dense layer over the
    // flattened window, which keeps fc-as-conv outputs bit-identical.
    for o in 0..c.out_channels {
        let plane = &mut out[o * oh * ow..(o + 1) * oh * ow];
        plane.fill(c.bias[o]);
        for i in 0..c.in_channels {
            let input = &xd[i * s.plane()..(i + 1) * s.plane()];
            let kernel = &c.weight[(o * c.in_channels + i) * kh * kw..][..kh * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = kernel[ky * kw + kx];
                    for y in 0..oh {
                        let src = &input[(y + ky) * s.width + kx..][..ow];
                        let dst = &mut plane[y * ow..(y + 1) * ow];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d = *d + wv * v;
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward_params<T: Scalar>(
    c: &Conv2d<T>,
    x: &Tensor<T>,
    grad_out: &Tensor<T>,
    gw: &mut [T],
    gb: &mut [T],
) {
    let s = x.shape();
    let g = grad_out.shape();
    let (oh, ow) = (g.height, g.width);
    let (kh, kw) = (c.kernel_h, c.kernel_w);
    let xd = x.data();
    let gd = grad_out.data();
    for o in 0..c.out_channels {
        let gplane = &gd[o * oh * ow..(o + 1) * oh * ow];
        gb[o] = gb[o] + gplane.iter().copied().sum::<T>();
        for i in 0..c.in_channels {
            let input = &xd[i * s.plane()..(i + 1) * s.plane()];
            let kgrad = &mut gw[(o * c.in_channels + i) * kh * kw..][..kh * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let mut acc = T::zero();
                    for y in 0..oh {
                        let src = &input[(y + ky) * s.width + kx..][..ow];
                        let gr = &gplane[y * ow..(y + 1) * ow];
                        for (&v, &gv) in src.iter().zip(gr) {
                            acc = acc + v * gv;
                        }
                    }
                    kgrad[ky * kw + kx] = kgrad[ky * kw + kx] + acc;
                }
            }
        }
    }
}

fn conv_backward_input<T: Scalar>(c: &Conv2d<T>, in_shape: Shape, grad_out: &Tensor<T>) -> Tensor<T> {
    let g = grad_out.shape();
    let (oh, ow) = (g.height, g.width);
    let (kh, kw) = (c.kernel_h, c.kernel_w);
    let gd = grad_out.data();
    let mut dx = vec![T::zero(); in_shape.len()];
    for i in 0..c.in_channels {
        let dplane = &mut dx[i * in_shape.plane()..(i + 1) * in_shape.plane()];
        for o in 0..c.out_channels {
            let gplane = &gd[o * oh * ow..(o + 1) * oh * ow];
            let kernel = &c.weight[(o * c.in_channels + i) * kh * kw..][..kh * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = kernel[ky * kw + kx];
                    for y in 0..oh {
                        let dst = &mut dplane[(y + ky) * in_shape.width + kx..][..ow];
                        let gr = &gplane[y * ow..(y + 1) * ow];
                        for (d, &gv) in dst.iter_mut().zip(gr) {
                            *d = *d + wv * gv;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(in_shape, dx).expect("shape matches input")
}

/// Max over disjoint 2x2 windows; ties resolve to the first element in
/// row-major scan order. Returns values and flat source indices.
fn maxpool_forward<T: Scalar>(x: &Tensor<T>, out_shape: Shape) -> (Vec<T>, Vec<usize>) {
    let s = x.shape();
    let xd = x.data();
    let mut vals = Vec::with_capacity(out_shape.len());
    let mut idx = Vec::with_capacity(out_shape.len());
    for ch in 0..s.channels {
        let base = ch * s.plane();
        for y in 0..out_shape.height {
            for xo in 0..out_shape.width {
                let mut best = base + 2 * y * s.width + 2 * xo;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * y + dy) * s.width + 2 * xo + dx;
                    if xd[j] > xd[best] {
                        best = j;
                    }
                }
                vals.push(xd[best]);
                idx.push(best);
            }
        }
    }
    (vals, idx)
}

fn dense_forward<T: Scalar>(d: &Dense<T>, x: &[T]) -> Vec<T> {
    (0..d.outputs)
        .map(|o| {
            let row = &d.weight[o * d.inputs..(o + 1) * d.inputs];
            let mut acc = d.bias[o];
            for (&w, &v) in row.iter().zip(x) {
                acc = acc + w * v;
            }
            acc
        })
        .collect()
}
