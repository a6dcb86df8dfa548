//! Plain mini-batch SGD on the two-logit cross-entropy: fixed learning rate,
//! no momentum, no weight decay, no early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::BinaryTask;
use crate::error::{Error, Result};
use crate::nn::{Evaluator, LossKind, NetworkSpec, ParameterSet};
use crate::prior::derive_seed;

/// `log(1 + exp(-y g))` in softplus form.
pub fn logistic_loss(g: f64, y: f64) -> f64 {
    let t = -y * g;
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl SgdConfig {
    pub const DEFAULT_EPOCHS: usize = 60;
    pub const DEFAULT_BATCH: usize = 2;

    pub fn new(learning_rate: f64, shuffle_seed: u64) -> Self {
        SgdConfig {
            learning_rate,
            epochs: Self::DEFAULT_EPOCHS,
            batch_size: Self::DEFAULT_BATCH,
            shuffle_seed,
        }
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// Mean over the epoch's steps of the L2 norm of the mini-batch gradient.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub epochs: Vec<EpochRecord>,
}

impl Trajectory {
    /// First epoch (1-based) after which the training set is fitted.
    pub fn first_fitted_epoch(&self) -> Option<usize> {
        self.epochs
            .iter()
            .find(|e| e.train_accuracy == 1.0)
            .map(|e| e.epoch)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "loss", "acc", "grad_norm"])?;
        for e in &self.epochs {
            w.write_record([
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.train_accuracy.to_string(),
                e.grad_norm.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("trajectory", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterSet,
    pub trajectory: Trajectory,
    /// Zero training error at the end of the run.
    pub fitted: bool,
    pub steps: usize,
    /// Set when a non-finite loss or gradient stopped the run.
    pub aborted: Option<String>,
    /// `(epoch, parameters)` for each requested checkpoint that was reached.
    pub snapshots: Vec<(usize, ParameterSet)>,
}

pub fn train(spec: &NetworkSpec, init: &ParameterSet, task: &BinaryTask, cfg: &SgdConfig) -> Result<TrainOutcome> {
    train_with_checkpoints(spec, init, task, cfg, &[])
}

/// Like [`train`], additionally keeping a copy of the parameters after each
/// epoch listed in `checkpoints` (epoch 0 is the initialization).
pub fn train_with_checkpoints(
    spec: &NetworkSpec,
    init: &ParameterSet,
    task: &BinaryTask,
    cfg: &SgdConfig,
    checkpoints: &[usize],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    init.check(spec)?;
    if task.train.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut eval = Evaluator::new(spec);
    let mut params = init.clone();
    let mut grads = ParameterSet::zeros(spec);
    let mut trajectory = Trajectory::default();
    let mut snapshots = Vec::new();
    if checkpoints.contains(&0) {
        snapshots.push((0, params.clone()));
    }
    let n = task.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut steps = 0;
    let mut aborted = None;

    'epochs: for epoch in 1..=cfg.epochs {
        order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.shuffle_seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        let mut norm_sum = 0.0;
        let mut batches = 0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill(0.0);
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &task.train[i];
                eval.accumulate_gradient(&params, s.x.data(), s.y, LossKind::Logistic, weight, &mut grads)?;
            }
            let norm = grads.norm2();
            if !norm.is_finite() {
                aborted = Some(format!("non-finite gradient at epoch {epoch}, step {steps}"));
                break 'epochs;
            }
            params.axpy(-cfg.learning_rate, &grads);
            norm_sum += norm;
            batches += 1;
            steps += 1;
        }
        let (loss, acc) = loss_and_accuracy(&mut eval, &params, task)?;
        if !loss.is_finite() || !params.is_finite() {
            aborted = Some(format!("non-finite loss at epoch {epoch}"));
            break;
        }
        trajectory.epochs.push(EpochRecord {
            epoch,
            train_loss: loss,
            train_accuracy: acc,
            grad_norm: norm_sum / batches as f64,
        });
        if checkpoints.contains(&epoch) {
            snapshots.push((epoch, params.clone()));
        }
    }

    let fitted = aborted.is_none() && crate::gnc::fits_all(&mut eval, &params, &task.train)?;
    Ok(TrainOutcome {
        params,
        trajectory,
        fitted,
        steps,
        aborted,
        snapshots,
    })
}

fn loss_and_accuracy(eval: &mut Evaluator<'_>, params: &ParameterSet, task: &BinaryTask) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in &task.train {
        let g = eval.margin(params, s.x.data())?;
        loss += logistic_loss(g, s.y);
        if s.y * g > 0.0 {
            correct += 1;
        }
    }
    let n = task.train.len() as f64;
    Ok((loss / n, correct as f64 / n))
}
