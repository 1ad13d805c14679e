use std::fmt::Write as _;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledSegment, Task};
use crate::error::{Error, Result};
use crate::eval::accuracy_argmax;
use crate::tensor::{adam_step, AdamState, Tape, PROBABILITY_FLOOR};

use super::model::Model;

/// Raw segments with their labels, borrowed from a segment set.
#[derive(Debug, Clone, Default)]
pub struct Samples<'a> {
    pub inputs: Vec<&'a [f64]>,
    pub labels: Vec<usize>,
}

impl<'a> Samples<'a> {
    pub fn new(inputs: Vec<&'a [f64]>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidInput(format!("{} inputs, {} labels", inputs.len(), labels.len())));
        }
        Ok(Self { inputs, labels })
    }

    pub fn from_segments(segments: &[&'a LabeledSegment]) -> Self {
        Self {
            inputs: segments.iter().map(|s| s.samples.as_slice()).collect(),
            labels: segments.iter().map(|s| s.label).collect(),
        }
    }

    /// Selects `indices` out of a full segment list.
    pub fn select(segments: &'a [LabeledSegment], indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| segments[i].samples.as_slice()).collect(),
            labels: indices.iter().map(|&i| segments[i].label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Samples per optimizer step.
    pub batch_size: usize,
    /// Samples per forward/backward pass; gradients of the micro-batches of
    /// one batch are accumulated before the step.
    pub micro_batch: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        Self {
            batch_size: task.default_batch_size(),
            micro_batch: 64,
            learning_rate: 0.001,
            max_epochs: 300,
            patience: 30,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.micro_batch == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch size, micro-batch, epochs and patience must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights the model holds after training.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// `epoch,train_loss,val_loss,val_acc` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
        }
        s
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Minimum-validation-loss tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_loss: f64,
    pub best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// A strictly lower loss is an improvement; `patience` epochs without
    /// one stop training.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            StopDecision::Improved
        } else if epoch - self.best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Mean clamped cross-entropy and argmax accuracy of `model` on `data`.
pub fn evaluate(model: &Model, data: &Samples<'_>, chunk: usize) -> Result<(f64, f64)> {
    let probs = model.predict_raw(&data.inputs, chunk)?;
    let loss = probs
        .iter()
        .zip(&data.labels)
        .map(|(p, &l)| -p[l].max(PROBABILITY_FLOOR).ln())
        .sum::<f64>()
        / data.len().max(1) as f64;
    Ok((loss, accuracy_argmax(&probs, &data.labels)?))
}

/// Cross-entropy and gradients of one batch, accumulated into the model's
/// gradient buffers. Returns the batch-mean loss.
pub fn accumulate_batch(model: &mut Model, inputs: &[&[f64]], labels: &[usize], micro_batch: usize) -> Result<f64> {
    let total = inputs.len() as f64;
    let mut loss_sum = 0.0;
    for (xs, ys) in inputs.chunks(micro_batch.max(1)).zip(labels.chunks(micro_batch.max(1))) {
        let mut tape = Tape::new();
        let x = tape.constant(model.input_tensor(xs)?);
        let p = model.forward(&mut tape, x)?;
        let ce = tape.cross_entropy(p, ys)?;
        let weighted = tape.scale(ce, ys.len() as f64 / total);
        loss_sum += tape.value(weighted).item();
        tape.backward(weighted, &mut model.params)?;
    }
    Ok(loss_sum)
}

/// Adam on batch-mean cross-entropy with per-epoch shuffling, validation
/// every epoch, early stopping on validation loss and restoration of the
/// best epoch's weights. `on_epoch` sees every finished epoch.
pub fn train(
    model: &mut Model,
    train_set: &Samples<'_>,
    validation: &Samples<'_>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainHistory> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if validation.is_empty() {
        return Err(Error::InvalidInput("empty validation set".into()));
    }
    let mut adam = AdamState::new(&model.params, config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.params.snapshot();
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        model.params.zero_grad();
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train_set.inputs[i]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train_set.labels[i]).collect();
            loss_sum += accumulate_batch(model, &xs, &ys, config.micro_batch)? * batch.len() as f64;
            adam_step(&mut adam, &mut model.params);
        }
        let (val_loss, val_accuracy) = evaluate(model, validation, config.micro_batch)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        debug!(
            "epoch {epoch}: train {:.5} val {:.5} acc {:.4}",
            record.train_loss, val_loss, val_accuracy
        );
        history.epochs.push(record);
        on_epoch(&record);
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = model.params.snapshot(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch;
    model.params.restore(&best);
    info!(
        "trained {} epochs, best epoch {} (val loss {:.5})",
        history.epochs.len(),
        history.best_epoch,
        stopper.best_loss
    );
    Ok(history)
}
