use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Inverted dropout: each dimension is zeroed with probability `p` and the
/// survivors are scaled by `1 / (1 - p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutModule {
    p: f64,
}

impl DropoutModule {
    /// `p` must lie in `[0, 1)`. Use [`DropoutModule::forced`] for `p == 1`.
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!(
                "dropout probability {p} must be in [0, 1); p = 1 zeroes every dimension"
            )));
        }
        Ok(Self { p })
    }

    /// Accepts `p == 1` as well; the mask is then all zeros.
    pub fn forced(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1]")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Draws a fresh mask of `dim` entries, each `0` or `1 / (1 - p)`.
    pub fn mask<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
        if dim == 0 {
            return Err(Error::Input("dropout mask dimension must be positive".into()));
        }
        if self.p == 0.0 {
            return Ok(alloc::vec![1.0; dim]);
        }
        if self.p >= 1.0 {
            return Ok(alloc::vec![0.0; dim]);
        }
        let keep = 1.0 / (1.0 - self.p);
        Ok((0..dim)
            .map(|_| if rng.random::<f64>() < self.p { 0.0 } else { keep })
            .collect())
    }
}
