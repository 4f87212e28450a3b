//! Unsupervised adversarial invariance (UAI) for fixed-length speaker embeddings.
//!
//! An encoder splits each input embedding `x` into a speaker factor `h1` and a
//! nuisance factor `h2`. A predictor classifies speakers from `h1`, a decoder
//! reconstructs `x` from a dropout-corrupted `h1` concatenated with `h2`, and two
//! disentanglers try to predict each factor from the other. The main networks
//! and the disentanglers are trained in alternation as a minimax game.
//!
//! The crate also carries the evaluation backend used to judge the embeddings:
//! LDA, two-covariance PLDA, equal error rate, k-means with NMI probing and
//! oracle-boundary diarization error rate.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line live
//! in the companion `uai` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod nn;
pub mod rng;
pub mod uai;

pub use error::{Error, Result};
pub use matrix::Matrix;
