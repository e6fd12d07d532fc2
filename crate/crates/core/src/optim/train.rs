use std::fmt::Write as _;
use std::io::Write;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{AdamConfig, AdamState};
use super::loss::{accuracy, categorical_cross_entropy, LossInput};
use super::schedule::{warmup_schedule, EarlyStopState, PlateauSchedule, MIN_DELTA};
use crate::blocks::ModelGraph;
use crate::data::{augment_flip, Dataset};
use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub adam: AdamConfig,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_lr: f64,
    pub early_stop_patience: usize,
    pub warmup_epochs: usize,
    pub flip_probability: f64,
    pub seed: u64,
    /// Stop as soon as an epoch's training accuracy reaches this value.
    pub target_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 200,
            adam: AdamConfig::default(),
            plateau_factor: 0.3,
            plateau_patience: 5,
            min_lr: 0.0,
            early_stop_patience: 20,
            warmup_epochs: 0,
            flip_probability: 0.5,
            seed: 0,
            target_train_accuracy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,val_loss,train_acc,val_acc,lr";

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.epoch, r.train_loss, r.val_loss, r.train_acc, r.val_acc, r.lr
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(Error::Parse("history header missing".into()));
        }
        let records = lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                let num = |i: usize| -> Result<f64> {
                    f.get(i)
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(|| Error::Parse(format!("bad history line `{line}`")))
                };
                Ok(EpochRecord {
                    epoch: num(0)? as usize,
                    train_loss: num(1)?,
                    val_loss: num(2)?,
                    train_acc: num(3)?,
                    val_acc: num(4)?,
                    lr: num(5)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    TargetAccuracy,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: History,
    /// Epoch whose weights were restored into the model.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stop: StopReason,
}

/// Validation loss and accuracy of `model` in inference mode.
pub fn evaluate_loss(model: &ModelGraph, data: &Dataset) -> Result<(f64, f64)> {
    let probs = model.predict_proba(data.images())?;
    let (loss, _) = categorical_cross_entropy(&LossInput::new(&probs, data.labels())?)?;
    Ok((loss, accuracy(&probs, data.labels())))
}

/// Mini-batch Adam training with plateau decay on validation loss, early
/// stopping on training loss, and restoration of the best-validation weights.
pub fn train(model: &mut ModelGraph, train: &Dataset, val: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if config.batch_size == 0 || config.max_epochs == 0 {
        return Err(Error::InvalidSpec("batch_size and max_epochs must be positive".into()));
    }
    if train.num_classes() != model.num_classes() || val.num_classes() != model.num_classes() {
        return Err(Error::InvalidLabels(format!(
            "model has {} classes, data has {}/{}",
            model.num_classes(),
            train.num_classes(),
            val.num_classes()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.params(), config.adam);
    let mut plateau = PlateauSchedule::new(
        config.adam.learning_rate,
        config.plateau_factor,
        config.plateau_patience,
    )
    .with_min_lr(config.min_lr);
    let mut early = EarlyStopState::new(config.early_stop_patience);
    let mut history = History::default();
    let mut best: Option<(usize, f64, ParamStore)> = None;
    let mut stop = StopReason::MaxEpochs;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut tape = Tape::new();

    for epoch in 0..config.max_epochs {
        let lr = warmup_schedule(plateau.current_lr(), config.warmup_epochs, epoch);
        adam.set_learning_rate(lr);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut hits = 0.0;
        for (batch, rows) in order.chunks(config.batch_size).enumerate() {
            let diverged = |loss: f64| Error::Diverged { epoch, batch, loss };
            let mut images = train.images().gather_rows(rows)?;
            if config.flip_probability > 0.0 {
                augment_flip(&mut images, config.flip_probability, &mut rng);
            }
            let labels = train.labels().gather_rows(rows)?;
            tape.clear();
            model.params_mut().zero_grads();
            let out = model.forward_train(&mut tape, images).map_err(|e| match e {
                Error::NonFinite { .. } => diverged(f64::NAN),
                e => e,
            })?;
            let probs = tape.value(out).clone();
            let (loss, grad) = categorical_cross_entropy(&LossInput::new(&probs, &labels)?)?;
            if !loss.is_finite() {
                return Err(diverged(loss));
            }
            let step = tape
                .backward(out, &grad, model.params_mut())
                .and_then(|_| adam.step(model.params_mut()));
            step.map_err(|e| match e {
                Error::NonFinite { .. } => diverged(loss),
                e => e,
            })?;
            loss_sum += loss * rows.len() as f64;
            hits += accuracy(&probs, &labels) * rows.len() as f64;
        }
        let train_loss = loss_sum / train.len() as f64;
        let train_acc = hits / train.len() as f64;
        let (val_loss, val_acc) = evaluate_loss(model, val).map_err(|e| match e {
            Error::NonFinite { .. } => Error::Diverged {
                epoch,
                batch: usize::MAX,
                loss: f64::NAN,
            },
            e => e,
        })?;
        history.records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            train_acc,
            val_acc,
            lr,
        });
        info!(
            "epoch {epoch}: loss {train_loss:.5} acc {train_acc:.4} val_loss {val_loss:.5} val_acc {val_acc:.4} lr {lr:.3e}"
        );
        if best.as_ref().is_none_or(|(_, b, _)| val_loss < b - MIN_DELTA) {
            best = Some((epoch, val_loss, model.params().clone()));
        }
        plateau.update(val_loss);
        if early.update(train_loss) {
            stop = StopReason::EarlyStop;
            break;
        }
        if config.target_train_accuracy.is_some_and(|t| train_acc >= t) {
            stop = StopReason::TargetAccuracy;
            break;
        }
    }
    let (best_epoch, best_val_loss, params) = best.ok_or(Error::EmptyDataset)?;
    model.params_mut().load_values(&params)?;
    info!("restored weights from epoch {best_epoch} (val_loss {best_val_loss:.5}), stop: {stop:?}");
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_loss,
        stop,
    })
}
