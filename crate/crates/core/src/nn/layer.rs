use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    /// Row-wise softmax over the layer output.
    Softmax,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Softmax => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Softmax,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Activation::Linear,
            Activation::Relu,
            Activation::Tanh,
            Activation::Softmax,
        ]
        .into_iter()
        .find(|a| a.name() == s)
    }

    pub(crate) fn apply(self, z: &mut Matrix) {
        match self {
            Activation::Linear => {}
            Activation::Relu => z.as_mut_slice().iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v = 0.0
                }
            }),
            Activation::Tanh => z
                .as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = libm::tanh(*v)),
            Activation::Softmax => {
                let cols = z.cols();
                for i in 0..z.rows() {
                    softmax_in_place(&mut z.as_mut_slice()[i * cols..(i + 1) * cols]);
                }
            }
        }
    }

    /// Turns a gradient w.r.t. the activation output into one w.r.t. the
    /// pre-activation, given the activation output `y`.
    pub(crate) fn backprop(self, y: &Matrix, grad: &mut Matrix) {
        let cols = y.cols();
        match self {
            Activation::Linear => {}
            Activation::Relu => {
                for (g, &out) in grad.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    if out <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for (g, &out) in grad.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *g *= 1.0 - out * out;
                }
            }
            Activation::Softmax => {
                for i in 0..y.rows() {
                    let yr = y.row(i);
                    let gr = &mut grad.as_mut_slice()[i * cols..(i + 1) * cols];
                    let inner: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                    for (g, &p) in gr.iter_mut().zip(yr) {
                        *g = p * (*g - inner);
                    }
                }
            }
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `y = act(x · W + b)` with `W` stored `in_dim × out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Uniform fan-in/fan-out initialization, `±sqrt(6 / (in + out))`, zero bias.
    pub fn new<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = libm::sqrt(6.0 / (in_dim + out_dim) as f64);
        let mut weight = Matrix::zeros(in_dim, out_dim);
        for w in weight.as_mut_slice() {
            *w = rng.random_range(-limit..limit);
        }
        Self {
            weight,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(in_dim, out_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn from_parts(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::dims("DenseLayer bias", weight.cols(), bias.len()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let mut z = input.matmul(&self.weight)?;
        let cols = z.cols();
        for i in 0..z.rows() {
            for (v, b) in z.as_mut_slice()[i * cols..(i + 1) * cols]
                .iter_mut()
                .zip(&self.bias)
            {
                *v += b;
            }
        }
        self.activation.apply(&mut z);
        Ok(z)
    }
}
