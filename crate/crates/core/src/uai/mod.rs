//! The UAI model: encoder with two latent heads, decoder, speaker predictor,
//! two disentanglers, and the alternating minimax trainer.

mod checkpoint;
mod config;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::UaiConfig;
pub use model::{
    AdvGrads, AdvPass, EmbeddingPair, Encoder, Latents, LossReport, MainGrads, MainPass, UaiModel,
};
pub use train::{train, EpochLosses, TrainObserver, UpdateEvent};
