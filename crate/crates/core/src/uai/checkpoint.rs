//! `UAI1` checkpoint container. All integers and floats are little-endian.
//!
//! ```text
//! "UAI1"                       magic
//! u32 version (= 1)
//! config block:
//!   u64 input_dim, h1_dim, h2_dim, num_speakers
//!   f64 alpha, beta, gamma, dropout_p
//!   u64 epochs, batch_size, adv_steps_per_main
//!   f64 lr_main, lr_adv, weight_decay
//!   u64 seed
//!   enc_hidden, dec_hidden, pred_hidden, dis_hidden: u32 count, count × u64
//!   u8 hidden_activation, u8 latent_activation   (0 linear, 1 relu, 2 tanh, 3 softmax)
//! u64 epochs_completed
//! u32 network count (= 7): trunk, h1 head, h2 head, dec, pred, dis1, dis2
//!   per network: u32 layer count; per layer: u8 activation, weight tensor, bias tensor
//! optimizer state, main group then adversarial group:
//!   f64 lr, beta1, beta2, epsilon, weight_decay; u64 t
//!   u32 tensor count; first-moment tensors; second-moment tensors
//! tensor: u32 rank, rank × u32 extent, then the f64 values in row-major order
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Activation, AdamConfig, AdamState, DenseLayer, Mlp};
use crate::uai::{Encoder, UaiConfig, UaiModel};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"UAI1";
pub const CHECKPOINT_VERSION: u32 = 1;
const NETWORK_COUNT: u32 = 7;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn list(&mut self, v: &[usize]) {
        self.u32(v.len() as u32);
        v.iter().for_each(|&x| self.usize(x));
    }
    fn tensor(&mut self, shape: &[usize], data: &[f64]) {
        self.u32(shape.len() as u32);
        shape.iter().for_each(|&d| self.u32(d as u32));
        data.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!(
                "truncated stream: need {n} bytes for {what} at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64(what)?;
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("{what} = {v} overflows usize")))
    }
    fn list(&mut self, what: &str) -> Result<Vec<usize>> {
        let n = self.u32(what)? as usize;
        if n > 1 << 16 {
            return Err(Error::Checkpoint(format!("{what}: implausible layer count {n}")));
        }
        (0..n).map(|_| self.usize(what)).collect()
    }
    fn activation(&mut self, what: &str) -> Result<Activation> {
        let code = self.u8(what)?;
        Activation::from_code(code)
            .ok_or_else(|| Error::Checkpoint(format!("{what}: unknown activation code {code}")))
    }
    fn tensor(&mut self, what: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        let rank = self.u32(what)? as usize;
        if rank > 2 {
            return Err(Error::Checkpoint(format!("{what}: unsupported rank {rank}")));
        }
        let shape: Vec<usize> = (0..rank)
            .map(|_| self.u32(what).map(|d| d as usize))
            .collect::<Result<_>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("{what}: shape {shape:?} overflows")))?;
        let bytes = self.take(
            count
                .checked_mul(8)
                .ok_or_else(|| Error::Checkpoint(format!("{what}: shape {shape:?} overflows")))?,
            what,
        )?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((shape, data))
    }
}

fn write_config(w: &mut Writer, c: &UaiConfig) {
    w.usize(c.input_dim);
    w.usize(c.h1_dim);
    w.usize(c.h2_dim);
    w.usize(c.num_speakers);
    w.f64(c.alpha);
    w.f64(c.beta);
    w.f64(c.gamma);
    w.f64(c.dropout_p);
    w.usize(c.epochs);
    w.usize(c.batch_size);
    w.usize(c.adv_steps_per_main);
    w.f64(c.lr_main);
    w.f64(c.lr_adv);
    w.f64(c.weight_decay);
    w.u64(c.seed);
    w.list(&c.enc_hidden);
    w.list(&c.dec_hidden);
    w.list(&c.pred_hidden);
    w.list(&c.dis_hidden);
    w.u8(c.hidden_activation.code());
    w.u8(c.latent_activation.code());
}

fn read_config(r: &mut Reader) -> Result<UaiConfig> {
    Ok(UaiConfig {
        input_dim: r.usize("input_dim")?,
        h1_dim: r.usize("h1_dim")?,
        h2_dim: r.usize("h2_dim")?,
        num_speakers: r.usize("num_speakers")?,
        alpha: r.f64("alpha")?,
        beta: r.f64("beta")?,
        gamma: r.f64("gamma")?,
        dropout_p: r.f64("dropout_p")?,
        epochs: r.usize("epochs")?,
        batch_size: r.usize("batch_size")?,
        adv_steps_per_main: r.usize("adv_steps_per_main")?,
        lr_main: r.f64("lr_main")?,
        lr_adv: r.f64("lr_adv")?,
        weight_decay: r.f64("weight_decay")?,
        seed: r.u64("seed")?,
        enc_hidden: r.list("enc_hidden")?,
        dec_hidden: r.list("dec_hidden")?,
        pred_hidden: r.list("pred_hidden")?,
        dis_hidden: r.list("dis_hidden")?,
        hidden_activation: r.activation("hidden_activation")?,
        latent_activation: r.activation("latent_activation")?,
    })
}

fn write_adam(w: &mut Writer, s: &AdamState) {
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
        weight_decay,
    } = s.config;
    for v in [lr, beta1, beta2, epsilon, weight_decay] {
        w.f64(v);
    }
    w.u64(s.t);
    w.u32(s.first.len() as u32);
    for m in s.first.iter().chain(&s.second) {
        w.tensor(&[m.len()], m);
    }
}

fn read_adam(r: &mut Reader, expected_lens: &[usize], group: &str) -> Result<AdamState> {
    let config = AdamConfig {
        lr: r.f64("adam lr")?,
        beta1: r.f64("adam beta1")?,
        beta2: r.f64("adam beta2")?,
        epsilon: r.f64("adam epsilon")?,
        weight_decay: r.f64("adam weight_decay")?,
    };
    let t = r.u64("adam t")?;
    let count = r.u32("adam tensor count")? as usize;
    if count != expected_lens.len() {
        return Err(Error::Checkpoint(format!(
            "{group} optimizer has {count} tensors, model needs {}",
            expected_lens.len()
        )));
    }
    let mut moments = Vec::with_capacity(2 * count);
    for i in 0..2 * count {
        let (shape, data) = r.tensor("adam moment")?;
        let want = expected_lens[i % count];
        if shape.as_slice() != [want] {
            return Err(Error::Checkpoint(format!(
                "{group} optimizer moment {i} has shape {shape:?}, expected [{want}]"
            )));
        }
        moments.push(data);
    }
    let second = moments.split_off(count);
    Ok(AdamState {
        config,
        t,
        first: moments,
        second,
    })
}

/// Serializes parameters, configuration, epoch counter and optimizer state.
pub fn save_checkpoint(model: &UaiModel) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    write_config(&mut w, &model.config);
    w.usize(model.epochs_completed);
    w.u32(NETWORK_COUNT);
    for net in model.networks() {
        w.u32(net.layers().len() as u32);
        for layer in net.layers() {
            w.u8(layer.activation.code());
            w.tensor(&[layer.in_dim(), layer.out_dim()], layer.weight.as_slice());
            w.tensor(&[layer.out_dim()], &layer.bias);
        }
    }
    write_adam(&mut w, &model.main_opt);
    write_adam(&mut w, &model.adv_opt);
    w.0
}

/// Inverse of [`save_checkpoint`]. Never returns a partially populated model.
pub fn load_checkpoint(bytes: &[u8]) -> Result<UaiModel> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(magic),
            "UAI1"
        )));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let config = read_config(&mut r)?;
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("stored configuration is invalid: {e}")))?;
    let epochs_completed = r.usize("epochs_completed")?;
    let count = r.u32("network count")?;
    if count != NETWORK_COUNT {
        return Err(Error::Checkpoint(format!(
            "expected {NETWORK_COUNT} networks, found {count}"
        )));
    }
    let mut nets = Vec::with_capacity(NETWORK_COUNT as usize);
    for _ in 0..NETWORK_COUNT {
        let n_layers = r.u32("layer count")? as usize;
        if n_layers == 0 || n_layers > 1 << 16 {
            return Err(Error::Checkpoint(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let activation = r.activation("layer activation")?;
            let (wshape, wdata) = r.tensor("weight")?;
            let (bshape, bdata) = r.tensor("bias")?;
            if wshape.len() != 2 || bshape.as_slice() != [wshape[1]] {
                return Err(Error::Checkpoint(format!(
                    "layer shapes {wshape:?} / {bshape:?} are inconsistent"
                )));
            }
            let weight = Matrix::from_vec(wshape[0], wshape[1], wdata)?;
            layers.push(DenseLayer::from_parts(weight, bdata, activation)?);
        }
        nets.push(Mlp::new(layers).map_err(|e| Error::Checkpoint(format!("{e}")))?);
    }
    let mut nets = nets.into_iter();
    let mut next = || nets.next().expect("seven networks");
    let enc = Encoder {
        trunk: next(),
        h1_head: next(),
        h2_head: next(),
    };
    let (dec, pred, dis1, dis2) = (next(), next(), next(), next());
    let mut model = UaiModel::from_parts(config, enc, dec, pred, dis1, dis2)
        .map_err(|e| Error::Checkpoint(format!("shape mismatch: {e}")))?;
    let main_lens = model.main_opt.param_lens();
    let adv_lens = model.adv_opt.param_lens();
    model.main_opt = read_adam(&mut r, &main_lens, "main")?;
    model.adv_opt = read_adam(&mut r, &adv_lens, "adversarial")?;
    model.epochs_completed = epochs_completed;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after optimizer state",
            bytes.len() - r.pos
        )));
    }
    Ok(model)
}
