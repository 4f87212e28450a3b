//! A small dense-network engine: layers, activations, losses with exact
//! gradients, Adam, and the dropout masking module.

mod adam;
mod dropout;
mod layer;
mod loss;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use dropout::DropoutModule;
pub use layer::{Activation, DenseLayer};
pub use loss::{cross_entropy, mse, softmax_rows};
pub use mlp::{LayerGrads, Mlp, MlpCache, MlpGrads};
