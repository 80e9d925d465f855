use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::samples::{GroundSample, RoadSampleSet};
use crate::error::{Error, Result};
use crate::nn::{argmax, Network, ParamSet, Sgd, Tensor};

/// Batch items are processed in fixed chunks of this size; chunk gradients
/// are summed in chunk order, so results do not depend on thread count.
const CHUNK: usize = 8;

/// Summed chunk gradient and per-item `(index, loss, correct)`.
type ChunkResult = (ParamSet<f32>, Vec<(usize, f32, bool)>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    /// Evaluate batch chunks on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 30,
            seed: 0,
            validation_fraction: 0.1,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        // Zero is allowed so a run can be replayed without updates.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be non-negative, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epoch count must be positive".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation fraction must be in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        Ok(())
    }
}

/// Labeled inputs a network can be trained on.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, i: usize) -> usize;

    fn inputs(&self, i: usize) -> Vec<Tensor<f32>>;
}

impl SampleSource for [GroundSample] {
    fn len(&self) -> usize {
        <[GroundSample]>::len(self)
    }

    fn label(&self, i: usize) -> usize {
        self[i].label
    }

    fn inputs(&self, i: usize) -> Vec<Tensor<f32>> {
        vec![self[i].patch.clone()]
    }
}

impl SampleSource for Vec<GroundSample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn label(&self, i: usize) -> usize {
        self[i].label
    }

    fn inputs(&self, i: usize) -> Vec<Tensor<f32>> {
        self.as_slice().inputs(i)
    }
}

impl SampleSource for RoadSampleSet {
    fn len(&self) -> usize {
        self.samples.len()
    }

    fn label(&self, i: usize) -> usize {
        self.samples[i].label
    }

    fn inputs(&self, i: usize) -> Vec<Tensor<f32>> {
        let (rgb, tex) = self.patches(i);
        vec![rgb, tex]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean loss and accuracy of training items, measured as each batch was
    /// presented (before its update).
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_accuracy,val_loss,val_accuracy";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            self.epoch, self.train_loss, self.train_accuracy, self.val_loss, self.val_accuracy
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network<f32>,
    pub trace: Vec<EpochMetrics>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Mean loss and accuracy of `net` on the given items.
pub fn evaluate<S: SampleSource + ?Sized>(
    net: &Network<f32>,
    data: &S,
    indices: &[usize],
    parallel: bool,
) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let one = |&i: &usize| -> Result<(f64, bool)> {
        let inputs = data.inputs(i);
        let refs: Vec<&Tensor<f32>> = inputs.iter().collect();
        let logits = net.forward(&refs)?;
        let p = crate::nn::softmax(logits.data());
        let label = data.label(i);
        Ok((-(p[label].max(f32::MIN_POSITIVE) as f64).ln(), argmax(logits.data()) == label))
    };
    let results: Vec<(f64, bool)> = if parallel {
        indices.par_iter().map(one).collect::<Result<_>>()?
    } else {
        indices.iter().map(one).collect::<Result<_>>()?
    };
    let n = results.len() as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let acc = results.iter().filter(|r| r.1).count() as f64 / n;
    Ok((loss, acc))
}

/// Seeded shuffled mini-batch SGD with a held-out validation split.
pub fn train<S: SampleSource + ?Sized>(
    mut net: Network<f32>,
    data: &S,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = data.len();
    if n < 2 {
        return Err(Error::Empty(format!("need at least 2 samples to train, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.validation_fraction).round() as usize).clamp(1, n - 1);
    let mut val_indices = order[..n_val].to_vec();
    val_indices.sort_unstable();
    let mut train_indices = order[n_val..].to_vec();
    train_indices.sort_unstable();

    let mut opt = Sgd::new(cfg.lr as f32, cfg.momentum as f32);
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut item_loss = vec![0.0f64; n];
    let mut item_hit = vec![false; n];
    let mut epoch_order = train_indices.clone();
    for epoch in 0..cfg.epochs {
        epoch_order.shuffle(&mut rng);
        for (b, batch) in epoch_order.chunks(cfg.batch_size).enumerate() {
            let chunk_step = |chunk: &[usize]| -> Result<ChunkResult> {
                let mut grads = ParamSet::zeros_like(&net);
                let mut stats = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let inputs = data.inputs(i);
                    let refs: Vec<&Tensor<f32>> = inputs.iter().collect();
                    let label = data.label(i);
                    let (loss, predicted) = net.accumulate_gradients(&refs, label, &mut grads)?;
                    stats.push((i, loss, predicted == label));
                }
                Ok((grads, stats))
            };
            let parts: Vec<ChunkResult> = if cfg.parallel {
                batch.par_chunks(CHUNK).map(chunk_step).collect::<Result<_>>()?
            } else {
                batch.chunks(CHUNK).map(chunk_step).collect::<Result<_>>()?
            };
            let mut parts = parts.into_iter();
            let (mut grads, first) = parts.next().expect("non-empty batch");
            let mut stats = first;
            for (g, s) in parts {
                grads.add_assign(&g)?;
                stats.extend(s);
            }
            let batch_loss: f64 = stats.iter().map(|s| s.1 as f64).sum::<f64>() / stats.len() as f64;
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    loss: batch_loss,
                });
            }
            for (i, loss, hit) in stats {
                item_loss[i] = loss as f64;
                item_hit[i] = hit;
            }
            opt.step(&mut net, &grads, batch.len())?;
        }
        let m = train_indices.len() as f64;
        let train_loss = train_indices.iter().map(|&i| item_loss[i]).sum::<f64>() / m;
        let train_accuracy = train_indices.iter().filter(|&&i| item_hit[i]).count() as f64 / m;
        let (val_loss, val_accuracy) = evaluate(&net, data, &val_indices, cfg.parallel)?;
        trace.push(EpochMetrics {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
    }
    Ok(TrainOutcome {
        network: net,
        trace,
        train_indices,
        val_indices,
    })
}
