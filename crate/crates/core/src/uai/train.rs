use alloc::format;
use alloc::vec::Vec;

use crate::data::{BatchIterator, EmbeddingDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_indexed, rng_from};
use crate::uai::{LossReport, UaiModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateEvent {
    /// Φ updated to minimize `l_adv`.
    Adversarial,
    /// Θ updated to minimize `l_main − gamma · l_adv`.
    Main,
}

/// Epoch-averaged losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLosses {
    /// Zero-based epoch index.
    pub epoch: usize,
    /// Mean over the epoch's main-update batches.
    pub main: LossReport,
    /// Mean `l_adv` over the epoch's adversarial-update batches.
    pub adv_l_adv: f64,
}

/// Progress sink. Both hooks default to no-ops.
pub trait TrainObserver {
    /// Called after every parameter update with the loss of the batch that produced it.
    fn on_update(&mut self, _epoch: usize, _event: UpdateEvent, _batch: &LossReport, _model: &UaiModel) {}

    fn on_epoch(&mut self, _losses: &EpochLosses, _model: &UaiModel) {}
}

impl TrainObserver for () {}

fn check_finite(report: &LossReport, epoch: usize) -> Result<()> {
    match report.first_non_finite() {
        Some(component) => Err(Error::NonFinite { component, epoch }),
        None => Ok(()),
    }
}

/// Alternating minimax training from `model.epochs_completed()` up to `config.epochs`.
///
/// Every main batch is preceded by `adv_steps_per_main` disentangler updates
/// on batches from a second, independently shuffled stream. Batch order and
/// dropout masks for epoch `e` depend only on `(seed, e)`, so a run resumed
/// from a checkpoint follows the same trajectory as an uninterrupted one.
pub fn train<O: TrainObserver + ?Sized>(
    model: &mut UaiModel,
    dataset: &EmbeddingDataset,
    observer: &mut O,
) -> Result<Vec<EpochLosses>> {
    let config = model.config.clone();
    if dataset.dim() != config.input_dim {
        return Err(Error::dims("training data", config.input_dim, dataset.dim()));
    }
    if dataset.len() < config.batch_size {
        return Err(Error::Config(format!(
            "dataset has {} items, fewer than batch_size {}",
            dataset.len(),
            config.batch_size
        )));
    }
    if let Some(&bad) = dataset.speakers.labels.iter().find(|&&s| s >= config.num_speakers) {
        return Err(Error::Input(format!(
            "speaker label {bad} outside the predictor's {} classes",
            config.num_speakers
        )));
    }

    let mut history = Vec::new();
    for epoch in model.epochs_completed..config.epochs {
        let epoch_tag = epoch as u64;
        let mut main_batches = BatchIterator::new(dataset, config.batch_size, derive_indexed(config.seed, "main", epoch_tag))?;
        let mut adv_batches = BatchIterator::new(dataset, config.batch_size, derive_indexed(config.seed, "adv", epoch_tag))?;
        let mut dropout_rng = rng_from(derive_indexed(config.seed, "dropout", epoch_tag));

        let steps = main_batches.batches_per_epoch();
        let mut sum = LossReport::default();
        let mut adv_sum = 0.0;
        let mut adv_count = 0usize;
        for _ in 0..steps {
            for _ in 0..config.adv_steps_per_main {
                let batch = adv_batches.next().expect("endless");
                let (report, pass) = model.forward_adv(&batch.x)?;
                check_finite(&report, epoch)?;
                let grads = model.adv_gradients(&pass)?;
                model.apply_adv(&grads)?;
                adv_sum += report.l_adv;
                adv_count += 1;
                observer.on_update(epoch, UpdateEvent::Adversarial, &report, model);
            }

            let batch = main_batches.next().expect("endless");
            let (report, pass) = model.forward_main(&batch.x, &batch.y, &mut dropout_rng)?;
            check_finite(&report, epoch)?;
            let grads = model.main_gradients(&pass)?;
            model.apply_main(&grads)?;
            accumulate(&mut sum, &report);
            observer.on_update(epoch, UpdateEvent::Main, &report, model);
        }

        let n = steps as f64;
        let main = LossReport {
            l_pred: sum.l_pred / n,
            l_recon: sum.l_recon / n,
            l_dis1: sum.l_dis1 / n,
            l_dis2: sum.l_dis2 / n,
            l_main: sum.l_main / n,
            l_adv: sum.l_adv / n,
        };
        let losses = EpochLosses {
            epoch,
            main,
            adv_l_adv: if adv_count > 0 { adv_sum / adv_count as f64 } else { 0.0 },
        };
        model.epochs_completed = epoch + 1;
        observer.on_epoch(&losses, model);
        history.push(losses);
    }
    Ok(history)
}

fn accumulate(sum: &mut LossReport, r: &LossReport) {
    sum.l_pred += r.l_pred;
    sum.l_recon += r.l_recon;
    sum.l_dis1 += r.l_dis1;
    sum.l_dis2 += r.l_dis2;
    sum.l_main += r.l_main;
    sum.l_adv += r.l_adv;
}
