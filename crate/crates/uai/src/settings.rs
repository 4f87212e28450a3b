//! Flat `key=value` run configuration.
//!
//! A config file holds one `key=value` per line; blank lines and lines
//! starting with `#` are ignored. `--set key=value` flags are applied on top
//! and win. Commands pull the keys they understand and every key left over is
//! an error, so a typo never silently falls back to a default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use uai_core::data::SynthConfig;
use uai_core::nn::Activation;
use uai_core::uai::UaiConfig;

use crate::error::{Error, Result};
use crate::fsutil::read_text;

#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, (String, String)>,
}

impl Settings {
    /// Reads `file` (if any), then applies `overrides` of the form `key=value`.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut s = Self::default();
        if let Some(path) = file {
            let text = read_text(path)?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = split_pair(line).ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
                s.insert(k, v, &format!("{}:{}", path.display(), i + 1));
            }
        }
        for o in overrides {
            let (k, v) = split_pair(o).ok_or_else(|| Error::Config(format!("--set {o:?}: expected key=value")))?;
            s.insert(k, v, "--set");
        }
        Ok(s)
    }

    pub fn insert(&mut self, key: &str, value: &str, origin: &str) {
        self.values.insert(key.to_string(), (value.to_string(), origin.to_string()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Removes and parses `key`.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{origin}: cannot parse {key}={v:?}"))),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn take_into<T: FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn take_list(&mut self, key: &str, slot: &mut Vec<usize>) -> Result<()> {
        if let Some((v, origin)) = self.values.remove(key) {
            *slot = if v.trim().is_empty() {
                Vec::new()
            } else {
                v.split(',')
                    .map(|x| x.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Config(format!("{origin}: {key} must be a comma-separated list of widths, got {v:?}")))?
            };
        }
        Ok(())
    }

    fn take_activation(&mut self, key: &str, slot: &mut Activation) -> Result<()> {
        if let Some((v, origin)) = self.values.remove(key) {
            *slot = Activation::parse(&v)
                .ok_or_else(|| Error::Config(format!("{origin}: unknown activation {key}={v:?}")))?;
        }
        Ok(())
    }

    /// Errors if any key was not consumed.
    pub fn finish(self) -> Result<()> {
        if self.values.is_empty() {
            return Ok(());
        }
        let keys: Vec<String> = self
            .values
            .iter()
            .map(|(k, (_, origin))| format!("{k} ({origin})"))
            .collect();
        Err(Error::Config(format!("unknown config keys: {}", keys.join(", "))))
    }

    pub fn synth_config(&mut self) -> Result<SynthConfig> {
        let mut c = SynthConfig::default();
        self.take_into("n_speakers", &mut c.n_speakers)?;
        self.take_into("n_per_speaker", &mut c.n_per_speaker)?;
        self.take_into("n_nuisance", &mut c.n_nuisance)?;
        self.take_into("dim", &mut c.dim)?;
        self.take_into("speaker_subspace_dim", &mut c.speaker_subspace_dim)?;
        self.take_into("nuisance_subspace_dim", &mut c.nuisance_subspace_dim)?;
        self.take_into("noise_sigma", &mut c.noise_sigma)?;
        self.take_into("seed", &mut c.seed)?;
        c.validate()?;
        Ok(c)
    }

    /// Applies every model key onto `base`. Does not validate, since the
    /// speaker count may still have to come from the data.
    pub fn uai_config(&mut self, base: UaiConfig) -> Result<UaiConfig> {
        let mut c = base;
        self.take_into("input_dim", &mut c.input_dim)?;
        self.take_into("h1_dim", &mut c.h1_dim)?;
        self.take_into("h2_dim", &mut c.h2_dim)?;
        self.take_into("num_speakers", &mut c.num_speakers)?;
        self.take_into("alpha", &mut c.alpha)?;
        self.take_into("beta", &mut c.beta)?;
        self.take_into("gamma", &mut c.gamma)?;
        self.take_into("dropout_p", &mut c.dropout_p)?;
        self.take_into("epochs", &mut c.epochs)?;
        self.take_into("batch_size", &mut c.batch_size)?;
        self.take_into("adv_steps_per_main", &mut c.adv_steps_per_main)?;
        self.take_into("lr_main", &mut c.lr_main)?;
        self.take_into("lr_adv", &mut c.lr_adv)?;
        self.take_into("weight_decay", &mut c.weight_decay)?;
        self.take_into("seed", &mut c.seed)?;
        self.take_list("enc_hidden", &mut c.enc_hidden)?;
        self.take_list("dec_hidden", &mut c.dec_hidden)?;
        self.take_list("pred_hidden", &mut c.pred_hidden)?;
        self.take_list("dis_hidden", &mut c.dis_hidden)?;
        self.take_activation("hidden_activation", &mut c.hidden_activation)?;
        self.take_activation("latent_activation", &mut c.latent_activation)?;
        Ok(c)
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then_some((k, v.trim()))
}
