//! Embedding datasets, batching, stratified splits and the synthetic
//! speaker/nuisance factor generator.

mod batch;
mod dataset;
mod split;
mod synth;

pub use batch::{Batch, BatchIterator};
pub use dataset::{EmbeddingDataset, Factor};
pub use split::split;
pub use synth::{generate_synthetic, SynthConfig, SyntheticDataset, NUISANCE_FACTOR};
