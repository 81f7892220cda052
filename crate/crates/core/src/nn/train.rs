use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::argmax;
use super::{split, Dataset, Network};
use crate::autograd::{sgd_step, Tape};
use crate::error::{arg_err, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Step size of each gradient update.
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of the data held out for testing, in `(0, 0.5)`.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.05, epochs: 20, batch_size: 16, test_fraction: 0.2, seed: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

/// Per-epoch learning curves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
}

impl Metrics {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_accuracy,test_loss,test_accuracy\n");
        for m in &self.epochs {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                m.epoch, m.train_loss, m.train_accuracy, m.test_loss, m.test_accuracy
            ));
        }
        s
    }
}

/// Mean loss and accuracy of `net` over `ds`, without touching any gradient.
pub fn evaluate(net: &Network, ds: &Dataset) -> Result<(f64, f64)> {
    let indices: Vec<usize> = (0..ds.len()).collect();
    let (mut loss_sum, mut correct) = (0.0, 0usize);
    for chunk in indices.chunks(64) {
        let tape = Tape::new();
        let (shape, data, labels) = ds.batch(chunk);
        let x = tape.constant(shape, data)?;
        let (loss, fwd) = net.loss(&tape, x, &labels)?;
        loss_sum += loss.item() * chunk.len() as f64;
        correct += count_correct(net, &fwd.output().value(), &labels);
    }
    Ok((loss_sum / ds.len() as f64, correct as f64 / ds.len() as f64))
}

/// `logits` is the raw output of [`Network::loss`]'s forward record.
fn count_correct(net: &Network, logits: &[f64], labels: &[usize]) -> usize {
    if net.is_binary() {
        logits.iter().zip(labels).filter(|(&z, &l)| usize::from(z > 0.0) == l).count()
    } else {
        let k = logits.len() / labels.len();
        logits.chunks_exact(k).zip(labels).filter(|(row, &l)| argmax(row) == l).count()
    }
}

/// Splits `ds` with the configured fraction and seed, then runs mini-batch
/// SGD on the training part, evaluating on the held-out part after every
/// epoch. Returns the learning curves and the `(train, test)` split used.
pub fn train(net: &mut Network, ds: &Dataset, cfg: &TrainConfig) -> Result<(Metrics, Dataset, Dataset)> {
    if cfg.lr.is_nan() || cfg.lr < 0.0 || !cfg.lr.is_finite() {
        return Err(arg_err(format!("learning rate must be finite and non-negative, got {}", cfg.lr)));
    }
    if cfg.batch_size == 0 {
        return Err(arg_err("batch size must be positive"));
    }
    let (train_set, test_set) = split(ds, cfg.test_fraction, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut metrics = Metrics::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let tape = Tape::new();
            let (shape, data, labels) = train_set.batch(chunk);
            let x = tape.constant(shape, data)?;
            let (loss, fwd) = net.loss(&tape, x, &labels)?;
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss: value });
            }
            loss.backward()?;
            net.zero_grad();
            net.absorb_grads(&fwd.params)?;
            sgd_step(net.params_mut(), cfg.lr);
            loss_sum += value * chunk.len() as f64;
            correct += count_correct(net, &fwd.output().value(), &labels);
        }
        let (test_loss, test_accuracy) = evaluate(net, &test_set)?;
        let n = train_set.len() as f64;
        metrics.epochs.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            test_loss,
            test_accuracy,
        });
    }
    Ok((metrics, train_set, test_set))
}
