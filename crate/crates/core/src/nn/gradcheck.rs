use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::Network;
use super::tensor::Tensor;
use crate::error::Result;

/// Which parameters to perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSelection {
    All,
    /// Up to `per_tensor` seeded random entries from each weight/bias tensor.
    Sample { per_tensor: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose ±ε perturbation crosses a ReLU kink or flips a
    /// pooling argmax; finite differences are meaningless there.
    pub excluded: usize,
    /// `(tensor, index, analytic, numeric)` of the largest error.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compares backprop gradients against central differences
/// `(L(θ+ε) − L(θ−ε)) / 2ε` with relative error
/// `|g − ĝ| / max(|g|, |ĝ|, 1e-8)`.
pub fn grad_check(
    net: &Network<f64>,
    inputs: &[&Tensor<f64>],
    label: usize,
    eps: f64,
    selection: ParamSelection,
) -> Result<GradCheckReport> {
    let (_, grads) = net.backward(inputs, label)?;
    let base_sig = net.activation_signature(inputs)?;
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut rng = match selection {
        ParamSelection::Sample { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        ParamSelection::All => None,
    };

    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        excluded: 0,
        worst: None,
    };
    for (t, &len) in sizes.iter().enumerate() {
        let indices: Vec<usize> = match (&selection, rng.as_mut()) {
            (ParamSelection::Sample { per_tensor, .. }, Some(rng)) if *per_tensor < len => {
                let mut v = sample(rng, len, *per_tensor).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..len).collect(),
        };
        for i in indices {
            let orig = probe.params()[t][i];
            let mut eval = |value: f64| -> Result<(f64, bool)> {
                probe.params_mut()[t][i] = value;
                let loss = probe.loss(inputs, label)?;
                let same = probe.activation_signature(inputs)? == base_sig;
                Ok((loss, same))
            };
            let (plus, same_plus) = eval(orig + eps)?;
            let (minus, same_minus) = eval(orig - eps)?;
            probe.params_mut()[t][i] = orig;
            if !(same_plus && same_minus) {
                report.excluded += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = grads.tensors[t][i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            report.checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(rel);
                report.worst = Some((t, i, analytic, numeric));
            }
        }
    }
    Ok(report)
}
