use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Speaker-stratified split into `(train, held_out)`.
///
/// Each speaker contributes `round(n_s · train_fraction)` items to the training
/// side, clamped to `1..=n_s - 1` so every speaker appears on both sides.
pub fn split(
    ds: &EmbeddingDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(EmbeddingDataset, EmbeddingDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut by_speaker: Vec<Vec<usize>> = alloc::vec![Vec::new(); ds.n_speakers()];
    for (i, &s) in ds.speakers.labels.iter().enumerate() {
        by_speaker[s].push(i);
    }
    let mut rng = rng_from(seed);
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (speaker, items) in by_speaker.iter_mut().enumerate() {
        match items.len() {
            0 => continue,
            1 => {
                return Err(Error::Config(format!(
                    "speaker {speaker} has a single item and cannot appear in both splits"
                )))
            }
            n => {
                items.shuffle(&mut rng);
                let k = libm::round(n as f64 * train_fraction) as usize;
                let k = k.clamp(1, n - 1);
                train.extend_from_slice(&items[..k]);
                held.extend_from_slice(&items[k..]);
            }
        }
    }
    train.sort_unstable();
    held.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&held)))
}
