use alloc::format;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::layer::{Activation, DenseLayer};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

/// A stack of dense layers.
///
/// Every network carries an identity and a generation counter that is bumped
/// whenever its parameters are handed out mutably, so a backward pass can tell
/// when it is given a cache from another network or from before an update.
#[derive(Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    id: u64,
    generation: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations recorded by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `inputs[l]` is the input of layer `l`; `outputs[l]` its activation output.
    inputs: Vec<Matrix>,
    outputs: Vec<Matrix>,
    net_id: u64,
    generation: u64,
}

impl MlpCache {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().unwrap_or(&self.inputs[0])
    }

    pub fn into_output(mut self) -> Matrix {
        match self.outputs.pop() {
            Some(out) => out,
            None => self.inputs.swap_remove(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    /// Gradient slices in the same order as [`Mlp::param_slices_mut`].
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }

    pub fn is_zero(&self) -> bool {
        self.slices().all(|s| s.iter().all(|&v| v == 0.0))
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an Mlp needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::dims("Mlp layer chain", pair[0].out_dim(), pair[1].in_dim()));
            }
        }
        Ok(Self {
            layers,
            id: fresh_id(),
            generation: 0,
        })
    }

    /// Randomly initialized network `in_dim → hidden... → out_dim`.
    pub fn random<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(in_dim);
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("zero-width layer in {dims:?}")));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    output_activation
                } else {
                    hidden_activation
                };
                DenseLayer::new(w[0], w[1], act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Lengths of the parameter slices, in [`Mlp::param_slices_mut`] order.
    pub fn param_lens(&self) -> Vec<usize> {
        self.param_slices().map(|s| s.len()).collect()
    }

    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }

    /// Weight then bias for each layer. Invalidates outstanding caches.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    /// Mutable access to the layers. Invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weight: Matrix::zeros(l.in_dim(), l.out_dim()),
                    bias: alloc::vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// Forward pass that keeps what backprop needs.
    pub fn forward(&self, input: &Matrix) -> Result<MlpCache> {
        if input.cols() != self.in_dim() {
            return Err(Error::dims("Mlp input", self.in_dim(), input.cols()));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let out = layer.forward(&current)?;
            inputs.push(current);
            current = out.clone();
            outputs.push(out);
        }
        Ok(MlpCache {
            inputs,
            outputs,
            net_id: self.id,
            generation: self.generation,
        })
    }

    /// Forward pass without a cache.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::dims("Mlp input", self.in_dim(), input.cols()));
        }
        let mut current = self.layers[0].forward(input)?;
        for layer in &self.layers[1..] {
            current = layer.forward(&current)?;
        }
        Ok(current)
    }

    /// Parameter gradients and input gradient for `output_gradient = dL/d(output)`.
    pub fn backward(&self, cache: &MlpCache, output_gradient: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let (grads, input) = self.backprop(cache, output_gradient, true, true)?;
        Ok((grads.expect("requested"), input.expect("requested")))
    }

    /// Parameter gradients only.
    pub fn backward_params(&self, cache: &MlpCache, output_gradient: &Matrix) -> Result<MlpGrads> {
        Ok(self
            .backprop(cache, output_gradient, true, false)?
            .0
            .expect("requested"))
    }

    /// Input gradient only (parameters treated as constants).
    pub fn backward_input(&self, cache: &MlpCache, output_gradient: &Matrix) -> Result<Matrix> {
        Ok(self
            .backprop(cache, output_gradient, false, true)?
            .1
            .expect("requested"))
    }

    fn check_cache(&self, cache: &MlpCache, output_gradient: &Matrix) -> Result<()> {
        if cache.net_id != self.id {
            return Err(Error::Contract("cache was produced by a different network".into()));
        }
        if cache.generation != self.generation {
            return Err(Error::Contract(
                "cache is stale: parameters changed since the forward pass".into(),
            ));
        }
        let out = cache.output();
        if out.shape() != output_gradient.shape() {
            return Err(Error::Contract(format!(
                "output gradient shape {:?} does not match forward output {:?}",
                output_gradient.shape(),
                out.shape()
            )));
        }
        Ok(())
    }

    fn backprop(
        &self,
        cache: &MlpCache,
        output_gradient: &Matrix,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<MlpGrads>, Option<Matrix>)> {
        self.check_cache(cache, output_gradient)?;
        let mut layer_grads = Vec::with_capacity(if want_params { self.layers.len() } else { 0 });
        let mut grad = output_gradient.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backprop(&cache.outputs[l], &mut grad);
            if want_params {
                let weight = cache.inputs[l].t_matmul(&grad)?;
                layer_grads.push(LayerGrads {
                    weight,
                    bias: grad.column_sums(),
                });
            }
            if l > 0 || want_input {
                grad = grad.matmul_t(&layer.weight)?;
            }
        }
        layer_grads.reverse();
        Ok((
            want_params.then_some(MlpGrads {
                layers: layer_grads,
            }),
            want_input.then_some(grad),
        ))
    }
}

impl Matrix {
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = alloc::vec![0.0; self.cols()];
        for row in self.row_iter() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}
