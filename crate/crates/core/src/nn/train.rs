use rand::seq::SliceRandom;

use super::layers;
use super::network::{Network, ParamKind};
use super::spec::NetworkSpec;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};
use crate::rng;

/// SGDM options. Defaults follow the reference training schedule; the
/// initial learning rate is per network and defaults to 0.01.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub momentum: f64,
    pub epochs: usize,
    pub lr_initial: f64,
    /// The learning rate is multiplied by `lr_drop_factor` every
    /// `lr_drop_epoch` epochs.
    pub lr_drop_epoch: usize,
    pub lr_drop_factor: f64,
    pub minibatch: usize,
    pub l2: f64,
    pub rng_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            epochs: 60,
            lr_initial: 0.01,
            lr_drop_epoch: 40,
            lr_drop_factor: 0.1,
            minibatch: 256,
            l2: 1e-4,
            rng_seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn with_lr(lr_initial: f64) -> Self {
        Self {
            lr_initial,
            ..Self::default()
        }
    }

    /// Learning rate in effect during `epoch` (1-based).
    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        let drops = if self.lr_drop_epoch == 0 {
            0
        } else {
            epoch.saturating_sub(1) / self.lr_drop_epoch
        };
        self.lr_initial * self.lr_drop_factor.powi(drops as i32)
    }
}

/// Features `n × h × w × c` with one integer label per item.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<T = f32> {
    pub features: Tensor<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> LabeledSet<T> {
    pub fn new(features: Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        if features.shape().len() != 4 || features.batch() != labels.len() {
            return Err(Error::shape(format!(
                "{} labels for features of shape {:?}",
                labels.len(),
                features.shape()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn gather(&self, indices: &[usize]) -> (Tensor<T>, Vec<usize>) {
        let items: Vec<&[T]> = indices.iter().map(|&i| self.features.item(i)).collect();
        let x = Tensor::stack(&items, &self.features.shape()[1..]).expect("uniform items");
        (x, indices.iter().map(|&i| self.labels[i]).collect())
    }

    /// Fraction of items whose argmax prediction equals the label.
    pub fn accuracy(&self, net: &Network<T>) -> Result<f64> {
        if self.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0usize;
        let idx: Vec<usize> = (0..self.len()).collect();
        for chunk in idx.chunks(256) {
            let (x, labels) = self.gather(chunk);
            let preds = net.predict(&x)?;
            correct += preds.iter().zip(&labels).filter(|((p, _), l)| p == *l).count();
        }
        Ok(correct as f64 / self.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome<T = f32> {
    /// Weights after the final epoch, with batch-norm running statistics.
    pub network: Network<T>,
    pub history: Vec<EpochStats>,
}

/// Trains a freshly initialised network with shuffled minibatches.
///
/// When the set holds at least one full minibatch, the incomplete trailing
/// batch of each epoch is skipped. The final-epoch weights are returned.
pub fn train<T: Scalar>(
    spec: &NetworkSpec,
    data: &LabeledSet<T>,
    validation: Option<&LabeledSet<T>>,
    cfg: &TrainingConfig,
) -> Result<TrainingOutcome<T>> {
    if data.is_empty() {
        return Err(Error::domain("training set is empty"));
    }
    if data.features.shape()[1..] != spec.input_shape.dims() {
        return Err(Error::shape(format!(
            "training features {:?} do not match network input {}",
            &data.features.shape()[1..],
            spec.input_shape
        )));
    }
    if cfg.minibatch == 0 || cfg.epochs == 0 {
        return Err(Error::domain("minibatch size and epoch count must be positive"));
    }
    let classes = spec.classes()?;
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
        return Err(Error::domain(format!("label {bad} outside {classes} classes")));
    }

    let mut init_rng = rng::stream(cfg.rng_seed, 0);
    let mut net = Network::<T>::init(spec, &mut init_rng)?;
    let mut rng = rng::stream(cfg.rng_seed, 1);
    let mut velocity: Vec<Vec<T>> = net
        .params_mut()
        .iter()
        .map(|(p, _)| vec![T::zero(); p.len()])
        .collect();

    let batch = cfg.minibatch.min(data.len());
    let batches = data.len() / batch;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for b in 0..batches {
            let (x, labels) = data.gather(&order[b * batch..(b + 1) * batch]);
            let trace = net.forward_train(&x, &mut rng)?;
            let (loss, probs, grad) = layers::softmax_xent(&trace.logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss;
            let u = probs.item_len();
            correct += probs
                .data()
                .chunks_exact(u)
                .zip(&labels)
                .filter(|(row, &l)| {
                    let top = row
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, v)| if *v > row[best] { i } else { best });
                    top == l
                })
                .count();
            let grads = net.backward(trace, grad)?;
            let flat: Vec<&[T]> = grads.iter().flat_map(|g| g.slices()).collect();
            for (((param, kind), g), v) in net.params_mut().into_iter().zip(flat).zip(velocity.iter_mut()) {
                let l2 = if kind == ParamKind::Weight { cfg.l2 } else { 0.0 };
                super::optim::sgdm_step(param, g, v, lr, cfg.momentum, l2)?;
            }
        }
        let mean_loss = loss_sum / batches as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let val_accuracy = match validation {
            Some(v) => Some(v.accuracy(&net)?),
            None => None,
        };
        let stats = EpochStats {
            epoch,
            lr,
            mean_loss,
            train_accuracy: correct as f64 / (batches * batch) as f64,
            val_accuracy,
        };
        log::info!(
            "epoch {epoch:>3} lr {lr:.2e} loss {mean_loss:.4} train acc {:.4}{}",
            stats.train_accuracy,
            val_accuracy.map(|a| format!(" val acc {a:.4}")).unwrap_or_default()
        );
        history.push(stats);
    }
    Ok(TrainingOutcome { network: net, history })
}
