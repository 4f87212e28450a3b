use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{cross_entropy, mse, Activation, AdamConfig, AdamState, DropoutModule, Mlp, MlpCache, MlpGrads};
use crate::rng::{derive_seed, hash_f64s, rng_from};
use crate::uai::UaiConfig;

/// Shared trunk with one linear head per latent.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub trunk: Mlp,
    pub h1_head: Mlp,
    pub h2_head: Mlp,
}

/// Latent pair for a batch: row `i` of `h1` and `h2` belong to input row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub h1: Matrix,
    pub h2: Matrix,
}

/// The two latents of one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingPair<'a> {
    pub h1: &'a [f64],
    pub h2: &'a [f64],
}

impl Latents {
    pub fn len(&self) -> usize {
        self.h1.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pair(&self, i: usize) -> EmbeddingPair<'_> {
        EmbeddingPair {
            h1: self.h1.row(i),
            h2: self.h2.row(i),
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = EmbeddingPair<'_>> + '_ {
        (0..self.len()).map(move |i| self.pair(i))
    }
}

/// Loss components of one batch (or their average over an epoch).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossReport {
    pub l_pred: f64,
    pub l_recon: f64,
    pub l_dis1: f64,
    pub l_dis2: f64,
    /// `alpha · l_pred + beta · l_recon`
    pub l_main: f64,
    /// `l_dis1 + l_dis2`
    pub l_adv: f64,
}

impl LossReport {
    pub(crate) fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("l_pred", self.l_pred),
            ("l_recon", self.l_recon),
            ("l_dis1", self.l_dis1),
            ("l_dis2", self.l_dis2),
            ("l_main", self.l_main),
            ("l_adv", self.l_adv),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

/// Everything the main-model backward pass needs.
#[derive(Debug)]
pub struct MainPass {
    trunk: MlpCache,
    h1_head: MlpCache,
    h2_head: MlpCache,
    pred: MlpCache,
    dec: MlpCache,
    dis1: MlpCache,
    dis2: MlpCache,
    mask: Matrix,
    pred_grad: Matrix,
    recon_grad: Matrix,
    dis1_grad: Matrix,
    dis2_grad: Matrix,
}

/// Everything the adversarial backward pass needs.
#[derive(Debug)]
pub struct AdvPass {
    dis1: MlpCache,
    dis2: MlpCache,
    dis1_grad: Matrix,
    dis2_grad: Matrix,
}

/// Gradients for the main group (Θe, Θd, Θp) in optimizer order.
#[derive(Debug, Clone, PartialEq)]
pub struct MainGrads {
    pub trunk: MlpGrads,
    pub h1_head: MlpGrads,
    pub h2_head: MlpGrads,
    pub dec: MlpGrads,
    pub pred: MlpGrads,
}

impl MainGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        [&self.trunk, &self.h1_head, &self.h2_head, &self.dec, &self.pred]
            .into_iter()
            .flat_map(|g| g.slices())
            .collect()
    }
}

/// Gradients for the adversarial group (Φdis1, Φdis2).
#[derive(Debug, Clone, PartialEq)]
pub struct AdvGrads {
    pub dis1: MlpGrads,
    pub dis2: MlpGrads,
}

impl AdvGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.dis1.slices().chain(self.dis2.slices()).collect()
    }
}

/// Encoder, decoder, predictor, both disentanglers and their optimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct UaiModel {
    pub(crate) config: UaiConfig,
    pub enc: Encoder,
    pub dec: Mlp,
    pub pred: Mlp,
    pub dis1: Mlp,
    pub dis2: Mlp,
    pub main_opt: AdamState,
    pub adv_opt: AdamState,
    pub(crate) dropout: DropoutModule,
    pub(crate) epochs_completed: usize,
}

impl UaiModel {
    /// Randomly initialized model; the initialization stream is derived from `config.seed`.
    pub fn new(config: UaiConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from(derive_seed(config.seed, "init"));
        let hidden = config.hidden_activation;
        let trunk = Mlp::random(
            config.input_dim,
            &config.enc_hidden[..config.enc_hidden.len() - 1],
            config.enc_hidden[config.enc_hidden.len() - 1],
            hidden,
            hidden,
            &mut rng,
        )?;
        let trunk_out = trunk.out_dim();
        let h1_head = Mlp::random(trunk_out, &[], config.h1_dim, hidden, config.latent_activation, &mut rng)?;
        let h2_head = Mlp::random(trunk_out, &[], config.h2_dim, hidden, config.latent_activation, &mut rng)?;
        let dec = Mlp::random(
            config.h1_dim + config.h2_dim,
            &config.dec_hidden,
            config.input_dim,
            hidden,
            Activation::Linear,
            &mut rng,
        )?;
        let pred = Mlp::random(
            config.h1_dim,
            &config.pred_hidden,
            config.num_speakers,
            hidden,
            Activation::Linear,
            &mut rng,
        )?;
        let dis1 = Mlp::random(config.h1_dim, &config.dis_hidden, config.h2_dim, hidden, Activation::Linear, &mut rng)?;
        let dis2 = Mlp::random(config.h2_dim, &config.dis_hidden, config.h1_dim, hidden, Activation::Linear, &mut rng)?;
        Self::from_parts(config, Encoder { trunk, h1_head, h2_head }, dec, pred, dis1, dis2)
    }

    /// Assembles a model from explicit networks with fresh optimizer state.
    pub fn from_parts(
        config: UaiConfig,
        enc: Encoder,
        dec: Mlp,
        pred: Mlp,
        dis1: Mlp,
        dis2: Mlp,
    ) -> Result<Self> {
        config.validate()?;
        let checks = [
            ("encoder input", config.input_dim, enc.trunk.in_dim()),
            ("h1 head input", enc.trunk.out_dim(), enc.h1_head.in_dim()),
            ("h2 head input", enc.trunk.out_dim(), enc.h2_head.in_dim()),
            ("h1 head output", config.h1_dim, enc.h1_head.out_dim()),
            ("h2 head output", config.h2_dim, enc.h2_head.out_dim()),
            ("decoder input", config.h1_dim + config.h2_dim, dec.in_dim()),
            ("decoder output", config.input_dim, dec.out_dim()),
            ("predictor input", config.h1_dim, pred.in_dim()),
            ("predictor output", config.num_speakers, pred.out_dim()),
            ("dis1 input", config.h1_dim, dis1.in_dim()),
            ("dis1 output", config.h2_dim, dis1.out_dim()),
            ("dis2 input", config.h2_dim, dis2.in_dim()),
            ("dis2 output", config.h1_dim, dis2.out_dim()),
        ];
        for (context, expected, actual) in checks {
            if expected != actual {
                return Err(Error::dims(context, expected, actual));
            }
        }
        let main_lens: Vec<usize> = [&enc.trunk, &enc.h1_head, &enc.h2_head, &dec, &pred]
            .into_iter()
            .flat_map(|m| m.param_lens())
            .collect();
        let adv_lens: Vec<usize> = dis1.param_lens().into_iter().chain(dis2.param_lens()).collect();
        let main_opt = AdamState::new(
            &main_lens,
            AdamConfig {
                lr: config.lr_main,
                weight_decay: config.weight_decay,
                ..AdamConfig::default()
            },
        );
        let adv_opt = AdamState::new(
            &adv_lens,
            AdamConfig {
                lr: config.lr_adv,
                weight_decay: config.weight_decay,
                ..AdamConfig::default()
            },
        );
        let dropout = DropoutModule::new(config.dropout_p)?;
        Ok(Self {
            config,
            enc,
            dec,
            pred,
            dis1,
            dis2,
            main_opt,
            adv_opt,
            dropout,
            epochs_completed: 0,
        })
    }

    pub fn config(&self) -> &UaiConfig {
        &self.config
    }

    /// Raises the epoch budget, e.g. to continue training after a reload.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.config.epochs = epochs;
    }

    pub fn epochs_completed(&self) -> usize {
        self.epochs_completed
    }

    /// Deterministic extraction of `(h1, h2)`; no dropout anywhere.
    pub fn encode(&self, x: &Matrix) -> Result<Latents> {
        if x.cols() != self.config.input_dim {
            return Err(Error::dims("encode input", self.config.input_dim, x.cols()));
        }
        let trunk = self.enc.trunk.predict(x)?;
        Ok(Latents {
            h1: self.enc.h1_head.predict(&trunk)?,
            h2: self.enc.h2_head.predict(&trunk)?,
        })
    }

    /// Main-model forward pass: prediction from clean `h1`, reconstruction from
    /// `[dropout(h1) | h2]`, and the disentangler losses for the adversarial term.
    pub fn forward_main<R: Rng + ?Sized>(
        &self,
        x: &Matrix,
        labels: &[usize],
        rng: &mut R,
    ) -> Result<(LossReport, MainPass)> {
        if x.cols() != self.config.input_dim {
            return Err(Error::dims("forward_main input", self.config.input_dim, x.cols()));
        }
        let trunk = self.enc.trunk.forward(x)?;
        let h1_head = self.enc.h1_head.forward(trunk.output())?;
        let h2_head = self.enc.h2_head.forward(trunk.output())?;
        let h1 = h1_head.output();
        let h2 = h2_head.output();

        let pred = self.pred.forward(h1)?;
        let (l_pred, pred_grad) = cross_entropy(pred.output(), labels)?;

        let mut mask = Matrix::zeros(h1.rows(), h1.cols());
        for i in 0..h1.rows() {
            mask.row_mut(i)
                .copy_from_slice(&self.dropout.mask(h1.cols(), rng)?);
        }
        let noisy_h1 = h1.hadamard(&mask)?;
        let dec = self.dec.forward(&noisy_h1.hstack(h2)?)?;
        let (l_recon, recon_grad) = mse(dec.output(), x)?;

        let dis1 = self.dis1.forward(h1)?;
        let dis2 = self.dis2.forward(h2)?;
        let (l_dis1, dis1_grad) = mse(dis1.output(), h2)?;
        let (l_dis2, dis2_grad) = mse(dis2.output(), h1)?;

        let report = self.report(l_pred, l_recon, l_dis1, l_dis2);
        Ok((
            report,
            MainPass {
                trunk,
                h1_head,
                h2_head,
                pred,
                dec,
                dis1,
                dis2,
                mask,
                pred_grad,
                recon_grad,
                dis1_grad,
                dis2_grad,
            },
        ))
    }

    fn report(&self, l_pred: f64, l_recon: f64, l_dis1: f64, l_dis2: f64) -> LossReport {
        LossReport {
            l_pred,
            l_recon,
            l_dis1,
            l_dis2,
            l_main: self.config.alpha * l_pred + self.config.beta * l_recon,
            l_adv: l_dis1 + l_dis2,
        }
    }

    /// Gradients of `l_main − gamma · l_adv` w.r.t. Θe, Θd and Θp.
    pub fn main_gradients(&self, pass: &MainPass) -> Result<MainGrads> {
        let UaiConfig { alpha, beta, gamma, h1_dim, .. } = self.config;

        let mut pred_out = pass.pred_grad.clone();
        pred_out.scale(alpha);
        let (pred, mut d_h1) = self.pred.backward(&pass.pred, &pred_out)?;

        let mut recon_out = pass.recon_grad.clone();
        recon_out.scale(beta);
        let (dec, d_dec_in) = self.dec.backward(&pass.dec, &recon_out)?;
        let (d_noisy_h1, mut d_h2) = d_dec_in.split_cols(h1_dim)?;
        d_h1.add_scaled(&d_noisy_h1.hadamard(&pass.mask)?, 1.0)?;

        // l_dis1 = mse(Dis1(h1), h2): h1 enters through Dis1, h2 as the target.
        // l_dis2 = mse(Dis2(h2), h1): the other way round.
        let through_dis1 = self.dis1.backward_input(&pass.dis1, &pass.dis1_grad)?;
        let through_dis2 = self.dis2.backward_input(&pass.dis2, &pass.dis2_grad)?;
        d_h1.add_scaled(&through_dis1, -gamma)?;
        d_h1.add_scaled(&pass.dis2_grad, gamma)?;
        d_h2.add_scaled(&through_dis2, -gamma)?;
        d_h2.add_scaled(&pass.dis1_grad, gamma)?;

        let (h1_head, mut d_trunk) = self.enc.h1_head.backward(&pass.h1_head, &d_h1)?;
        let (h2_head, d_trunk2) = self.enc.h2_head.backward(&pass.h2_head, &d_h2)?;
        d_trunk.add_scaled(&d_trunk2, 1.0)?;
        let trunk = self.enc.trunk.backward_params(&pass.trunk, &d_trunk)?;
        Ok(MainGrads {
            trunk,
            h1_head,
            h2_head,
            dec,
            pred,
        })
    }

    /// Adversarial forward pass: `ĥ2 = Dis1(h1)`, `ĥ1 = Dis2(h2)`, no dropout.
    pub fn forward_adv(&self, x: &Matrix) -> Result<(LossReport, AdvPass)> {
        let latents = self.encode(x)?;
        let dis1 = self.dis1.forward(&latents.h1)?;
        let dis2 = self.dis2.forward(&latents.h2)?;
        let (l_dis1, dis1_grad) = mse(dis1.output(), &latents.h2)?;
        let (l_dis2, dis2_grad) = mse(dis2.output(), &latents.h1)?;
        let report = LossReport {
            l_dis1,
            l_dis2,
            l_adv: l_dis1 + l_dis2,
            ..LossReport::default()
        };
        Ok((
            report,
            AdvPass {
                dis1,
                dis2,
                dis1_grad,
                dis2_grad,
            },
        ))
    }

    /// Gradients of `l_adv` w.r.t. Φdis1 and Φdis2.
    pub fn adv_gradients(&self, pass: &AdvPass) -> Result<AdvGrads> {
        Ok(AdvGrads {
            dis1: self.dis1.backward_params(&pass.dis1, &pass.dis1_grad)?,
            dis2: self.dis2.backward_params(&pass.dis2, &pass.dis2_grad)?,
        })
    }

    /// One Adam step on Θ. Φ is untouched.
    pub fn apply_main(&mut self, grads: &MainGrads) -> Result<()> {
        let g = grads.slices();
        let mut params: Vec<&mut [f64]> = Vec::new();
        params.extend(self.enc.trunk.param_slices_mut());
        params.extend(self.enc.h1_head.param_slices_mut());
        params.extend(self.enc.h2_head.param_slices_mut());
        params.extend(self.dec.param_slices_mut());
        params.extend(self.pred.param_slices_mut());
        self.main_opt.step(&mut params, &g)
    }

    /// One Adam step on Φ. Θ is untouched.
    pub fn apply_adv(&mut self, grads: &AdvGrads) -> Result<()> {
        let g = grads.slices();
        let mut params: Vec<&mut [f64]> = Vec::new();
        params.extend(self.dis1.param_slices_mut());
        params.extend(self.dis2.param_slices_mut());
        self.adv_opt.step(&mut params, &g)
    }

    /// Bitwise fingerprint of the main-model parameters (Θe, Θd, Θp).
    pub fn theta_fingerprint(&self) -> u64 {
        hash_f64s(
            [&self.enc.trunk, &self.enc.h1_head, &self.enc.h2_head, &self.dec, &self.pred]
                .into_iter()
                .flat_map(|m| m.param_slices()),
        )
    }

    /// Bitwise fingerprint of the disentangler parameters (Φdis1, Φdis2).
    pub fn phi_fingerprint(&self) -> u64 {
        hash_f64s(self.dis1.param_slices().chain(self.dis2.param_slices()))
    }

    /// Networks in checkpoint declaration order.
    pub fn networks(&self) -> [&Mlp; 7] {
        [
            &self.enc.trunk,
            &self.enc.h1_head,
            &self.enc.h2_head,
            &self.dec,
            &self.pred,
            &self.dis1,
            &self.dis2,
        ]
    }
}
