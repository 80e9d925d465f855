use super::layer::Layer;
use super::tensor::{Shape, Tensor};
use super::Scalar;
use crate::error::{Error, Result};

/// Gradients (or any per-parameter values) in network parameter order:
/// branches first, then head; within a layer weight then bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn zeros_like(net: &Network<T>) -> Self {
        Self {
            tensors: net.params().iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elementwise `self += other`; shapes must agree.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_like(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    pub(crate) fn check_like(&self, other: &Self) -> Result<()> {
        let same = self.tensors.len() == other.tensors.len()
            && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.len() == b.len());
        if same {
            Ok(())
        } else {
            Err(Error::Shape("parameter sets have different layouts".into()))
        }
    }
}

/// Branches run on their own inputs; their outputs are concatenated along
/// channels and passed through `head`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    arch: String,
    seed: u64,
    inputs: Vec<Shape>,
    branches: Vec<Vec<Layer<T>>>,
    head: Vec<Layer<T>>,
}

struct Trace<T> {
    /// Per branch: the input followed by every layer output.
    branches: Vec<Vec<Tensor<T>>>,
    /// Fused tensor followed by every head layer output.
    head: Vec<Tensor<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(
        arch: impl Into<String>,
        seed: u64,
        inputs: Vec<Shape>,
        branches: Vec<Vec<Layer<T>>>,
        head: Vec<Layer<T>>,
    ) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != branches.len() {
            return Err(Error::Shape(format!(
                "{} input shapes for {} branches",
                inputs.len(),
                branches.len()
            )));
        }
        let net = Self {
            arch: arch.into(),
            seed,
            inputs,
            branches,
            head,
        };
        net.output_shape(&net.inputs)?;
        Ok(net)
    }

    pub fn arch(&self) -> &str {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_shapes(&self) -> &[Shape] {
        &self.inputs
    }

    pub fn branches(&self) -> &[Vec<Layer<T>>] {
        &self.branches
    }

    pub fn head(&self) -> &[Layer<T>] {
        &self.head
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer<T>> {
        self.branches.iter().flatten().chain(&self.head)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Layer<T>> {
        self.branches.iter_mut().flatten().chain(self.head.iter_mut())
    }

    /// True when any layer is fully connected, which pins the input size.
    pub fn has_dense(&self) -> bool {
        self.layers().any(|l| matches!(l, Layer::Dense(_)))
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&[T]> {
        self.layers()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.layers_mut()
            .filter_map(Layer::params_mut)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let conv = |l: &Layer<T>| -> Layer<U> {
            let c = |v: &[T]| v.iter().map(|&x| U::of(x.as_f64())).collect::<Vec<U>>();
            match l {
                Layer::Conv(k) => Layer::Conv(super::Conv2d {
                    in_channels: k.in_channels,
                    out_channels: k.out_channels,
                    kernel_h: k.kernel_h,
                    kernel_w: k.kernel_w,
                    weight: c(&k.weight),
                    bias: c(&k.bias),
                }),
                Layer::Dense(d) => Layer::Dense(super::Dense {
                    inputs: d.inputs,
                    outputs: d.outputs,
                    weight: c(&d.weight),
                    bias: c(&d.bias),
                }),
                Layer::Relu => Layer::Relu,
                Layer::MaxPool => Layer::MaxPool,
            }
        };
        Network {
            arch: self.arch.clone(),
            seed: self.seed,
            inputs: self.inputs.clone(),
            branches: self.branches.iter().map(|b| b.iter().map(conv).collect()).collect(),
            head: self.head.iter().map(conv).collect(),
        }
    }

    fn check_inputs(&self, shapes: &[Shape]) -> Result<()> {
        if shapes.len() != self.inputs.len() {
            return Err(Error::Shape(format!(
                "network takes {} inputs, got {}",
                self.inputs.len(),
                shapes.len()
            )));
        }
        let exact = self.has_dense();
        for (&got, &want) in shapes.iter().zip(&self.inputs) {
            let ok = if exact { got == want } else { got.channels == want.channels };
            if !ok {
                return Err(Error::Shape(format!("input {got} does not match declared {want}")));
            }
        }
        Ok(())
    }

    fn fused_shape(outs: &[Shape]) -> Result<Shape> {
        let first = outs[0];
        if outs.iter().any(|s| s.height != first.height || s.width != first.width) {
            return Err(Error::Shape("branch outputs differ in spatial size".into()));
        }
        Ok(Shape::new(
            outs.iter().map(|s| s.channels).sum(),
            first.height,
            first.width,
        ))
    }

    /// Output shape for the given input shapes, or the first shape error.
    pub fn output_shape(&self, shapes: &[Shape]) -> Result<Shape> {
        self.check_inputs(shapes)?;
        let mut outs = Vec::with_capacity(shapes.len());
        for (branch, &s) in self.branches.iter().zip(shapes) {
            outs.push(branch.iter().try_fold(s, |s, l| l.output_shape(s))?);
        }
        let fused = Self::fused_shape(&outs)?;
        self.head.iter().try_fold(fused, |s, l| l.output_shape(s))
    }

    fn trace(&self, inputs: &[&Tensor<T>]) -> Result<Trace<T>> {
        let shapes: Vec<Shape> = inputs.iter().map(|t| t.shape()).collect();
        self.output_shape(&shapes)?;
        let mut branches = Vec::with_capacity(inputs.len());
        for (branch, x) in self.branches.iter().zip(inputs) {
            let mut acts = Vec::with_capacity(branch.len() + 1);
            acts.push((*x).clone());
            for layer in branch {
                let next = layer.forward(acts.last().expect("non-empty"))?;
                acts.push(next);
            }
            branches.push(acts);
        }
        let fused = if branches.len() == 1 {
            branches[0].last().expect("non-empty").clone()
        } else {
            let outs: Vec<&Tensor<T>> = branches.iter().map(|a| a.last().expect("non-empty")).collect();
            let shape = Self::fused_shape(&outs.iter().map(|t| t.shape()).collect::<Vec<_>>())?;
            let data = outs.iter().flat_map(|t| t.data().iter().copied()).collect();
            Tensor::from_vec(shape, data)?
        };
        let mut head = Vec::with_capacity(self.head.len() + 1);
        head.push(fused);
        for layer in &self.head {
            let next = layer.forward(head.last().expect("non-empty"))?;
            head.push(next);
        }
        Ok(Trace { branches, head })
    }

    /// Raw class scores (logits). For fully convolutional networks on
    /// larger inputs this is a `(classes, h, w)` score map.
    pub fn forward(&self, inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
        let mut trace = self.trace(inputs)?;
        Ok(trace.head.pop().expect("non-empty"))
    }

    /// Class probabilities for a single-location output.
    pub fn predict_proba(&self, inputs: &[&Tensor<T>]) -> Result<Vec<T>> {
        let logits = self.forward(inputs)?;
        if logits.shape().plane() != 1 {
            return Err(Error::Shape(format!(
                "expected a single-location output, got {}",
                logits.shape()
            )));
        }
        Ok(softmax(logits.data()))
    }

    /// Cross-entropy loss `-ln p(label)`.
    pub fn loss(&self, inputs: &[&Tensor<T>], label: usize) -> Result<T> {
        let logits = self.forward(inputs)?;
        xent(logits.data(), label).map(|(loss, _)| loss)
    }

    /// Loss and parameter gradients for one example.
    pub fn backward(&self, inputs: &[&Tensor<T>], label: usize) -> Result<(T, ParamSet<T>)> {
        let mut grads = ParamSet::zeros_like(self);
        let (loss, _) = self.accumulate_gradients(inputs, label, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds this example's gradients into `grads`; returns its loss and
    /// the predicted class (first maximal logit).
    pub fn accumulate_gradients(
        &self,
        inputs: &[&Tensor<T>],
        label: usize,
        grads: &mut ParamSet<T>,
    ) -> Result<(T, usize)> {
        let params = self.params();
        if grads.tensors.len() != params.len()
            || grads.tensors.iter().zip(&params).any(|(g, p)| g.len() != p.len())
        {
            return Err(Error::Shape("gradient set does not match network".into()));
        }
        let trace = self.trace(inputs)?;
        let logits = trace.head.last().expect("non-empty");
        let (loss, dlogits) = xent(logits.data(), label)?;
        let predicted = argmax(logits.data());
        let mut g = Tensor::from_vec(logits.shape(), dlogits)?;

        // Parameter slots, in params() order.
        let mut slots: Vec<&mut Vec<T>> = grads.tensors.iter_mut().collect();
        let branch_slots: Vec<usize> = self
            .branches
            .iter()
            .map(|b| 2 * b.iter().filter(|l| l.has_params()).count())
            .collect();
        let head_start: usize = branch_slots.iter().sum();
        let mut head_slots = slots.split_off(head_start);

        let mut slot = head_slots.len();
        for (i, layer) in self.head.iter().enumerate().rev() {
            let pg = if layer.has_params() {
                slot -= 2;
                let (w, b) = head_slots[slot..slot + 2].split_at_mut(1);
                Some((w[0].as_mut_slice(), b[0].as_mut_slice()))
            } else {
                None
            };
            g = layer
                .backward(&trace.head[i], &g, pg, true)
                .expect("input gradient requested");
        }

        // Split the fused gradient back into branch gradients.
        let mut offset = 0;
        let mut branch_base = 0;
        for ((branch, acts), &nslots) in self.branches.iter().zip(&trace.branches).zip(&branch_slots) {
            let out_shape = acts.last().expect("non-empty").shape();
            let mut gb = Tensor::from_vec(out_shape, g.data()[offset..offset + out_shape.len()].to_vec())?;
            offset += out_shape.len();
            let mine = &mut slots[branch_base..branch_base + nslots];
            let mut slot = nslots;
            for (i, layer) in branch.iter().enumerate().rev() {
                let pg = if layer.has_params() {
                    slot -= 2;
                    let (w, b) = mine[slot..slot + 2].split_at_mut(1);
                    Some((w[0].as_mut_slice(), b[0].as_mut_slice()))
                } else {
                    None
                };
                match layer.backward(&acts[i], &gb, pg, i > 0) {
                    Some(next) => gb = next,
                    None => break,
                }
            }
            branch_base += nslots;
        }
        Ok((loss, predicted))
    }

    /// Discrete activation pattern (ReLU signs and pooling argmaxes). Two
    /// parameter settings with the same signature lie in the same smooth
    /// piece of the loss.
    pub fn activation_signature(&self, inputs: &[&Tensor<T>]) -> Result<Vec<u32>> {
        let trace = self.trace(inputs)?;
        let mut sig = Vec::new();
        for (branch, acts) in self.branches.iter().zip(&trace.branches) {
            for (layer, x) in branch.iter().zip(acts) {
                layer.signature(x, &mut sig)?;
            }
        }
        for (layer, x) in self.head.iter().zip(&trace.head) {
            layer.signature(x, &mut sig)?;
        }
        Ok(sig)
    }
}

/// Index of the first maximal value.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max subtraction).
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax over channels at every spatial location.
pub fn softmax_channels<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let s = t.shape();
    let mut out = Tensor::zeros(s);
    let mut buf = vec![T::zero(); s.channels];
    for p in 0..s.plane() {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = t.data()[c * s.plane() + p];
        }
        for (c, v) in softmax(&buf).into_iter().enumerate() {
            out.data_mut()[c * s.plane() + p] = v;
        }
    }
    out
}

/// Softmax cross-entropy loss and its gradient w.r.t. the logits.
fn xent<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::InvalidParameter(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
    let loss = lse - logits[label];
    let mut g = softmax(logits);
    g[label] = g[label] - T::one();
    Ok((loss, g))
}
