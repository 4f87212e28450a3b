use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::Activation;

/// Architecture and training hyperparameters of a UAI model.
///
/// Defaults reproduce the published setup: 512-dimensional inputs, latent
/// sizes 128/32, encoder and decoder with two 512-unit hidden layers, a
/// 256→512 predictor, two 128-unit layers per disentangler, loss weights
/// α = 100, β = 5, γ = 50, dropout 0.75, 350 epochs of batch 128 with 10
/// adversarial updates per main update, and Adam at 1e-3 (main) / 1e-4
/// (adversarial) with weight decay 1e-4. Latent heads are tanh-bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct UaiConfig {
    pub input_dim: usize,
    pub h1_dim: usize,
    pub h2_dim: usize,
    /// Predictor classes. Zero means "take it from the training data".
    pub num_speakers: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub dropout_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adv_steps_per_main: usize,
    pub lr_main: f64,
    pub lr_adv: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub pred_hidden: Vec<usize>,
    pub dis_hidden: Vec<usize>,
    pub hidden_activation: Activation,
    /// Output activation of the two encoder heads.
    pub latent_activation: Activation,
}

impl Default for UaiConfig {
    fn default() -> Self {
        Self {
            input_dim: 512,
            h1_dim: 128,
            h2_dim: 32,
            num_speakers: 0,
            alpha: 100.0,
            beta: 5.0,
            gamma: 50.0,
            dropout_p: 0.75,
            epochs: 350,
            batch_size: 128,
            adv_steps_per_main: 10,
            lr_main: 1e-3,
            lr_adv: 1e-4,
            weight_decay: 1e-4,
            seed: 0,
            enc_hidden: vec![512, 512],
            dec_hidden: vec![512, 512],
            pred_hidden: vec![256, 512],
            dis_hidden: vec![128, 128],
            hidden_activation: Activation::Relu,
            latent_activation: Activation::Tanh,
        }
    }
}

impl UaiConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("input_dim", self.input_dim),
            ("h1_dim", self.h1_dim),
            ("h2_dim", self.h2_dim),
            ("num_speakers", self.num_speakers),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, hidden) in [
            ("enc_hidden", &self.enc_hidden),
            ("dec_hidden", &self.dec_hidden),
            ("pred_hidden", &self.pred_hidden),
            ("dis_hidden", &self.dis_hidden),
        ] {
            if hidden.iter().any(|&h| h == 0) {
                return Err(Error::Config(format!("{name} contains a zero-width layer")));
            }
        }
        if self.enc_hidden.is_empty() {
            return Err(Error::Config("enc_hidden needs at least one layer".into()));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("lr_main", self.lr_main), ("lr_adv", self.lr_adv)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if self.latent_activation == Activation::Softmax
            || self.hidden_activation == Activation::Softmax
        {
            return Err(Error::Config("softmax is only valid as a classifier head".into()));
        }
        Ok(())
    }

    /// `key=value` lines in a fixed order, as echoed by the command line.
    pub fn describe(&self) -> Vec<String> {
        let list = |v: &[usize]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        vec![
            format!("input_dim={}", self.input_dim),
            format!("h1_dim={}", self.h1_dim),
            format!("h2_dim={}", self.h2_dim),
            format!("num_speakers={}", self.num_speakers),
            format!("alpha={}", self.alpha),
            format!("beta={}", self.beta),
            format!("gamma={}", self.gamma),
            format!("dropout_p={}", self.dropout_p),
            format!("epochs={}", self.epochs),
            format!("batch_size={}", self.batch_size),
            format!("adv_steps_per_main={}", self.adv_steps_per_main),
            format!("lr_main={}", self.lr_main),
            format!("lr_adv={}", self.lr_adv),
            format!("weight_decay={}", self.weight_decay),
            format!("seed={}", self.seed),
            format!("enc_hidden={}", list(&self.enc_hidden)),
            format!("dec_hidden={}", list(&self.dec_hidden)),
            format!("pred_hidden={}", list(&self.pred_hidden)),
            format!("dis_hidden={}", list(&self.dis_hidden)),
            format!("hidden_activation={}", self.hidden_activation.name()),
            format!("latent_activation={}", self.latent_activation.name()),
        ]
    }
}
