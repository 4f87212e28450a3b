use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{EmbeddingDataset, Factor};
use crate::error::{Error, Result};
use crate::matrix::{from_nalgebra, Matrix};
use crate::rng::{derive_seed, rng_from};

/// Name of the nuisance factor attached to generated datasets.
pub const NUISANCE_FACTOR: &str = "nuisance";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub n_per_speaker: usize,
    pub n_nuisance: usize,
    pub dim: usize,
    pub speaker_subspace_dim: usize,
    pub nuisance_subspace_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 20,
            n_per_speaker: 50,
            n_nuisance: 4,
            dim: 512,
            speaker_subspace_dim: 16,
            nuisance_subspace_dim: 8,
            noise_sigma: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_speakers == 0 || self.n_per_speaker == 0 || self.n_nuisance == 0 {
            return Err(Error::Config(
                "n_speakers, n_per_speaker and n_nuisance must be positive".into(),
            ));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if self.speaker_subspace_dim + self.nuisance_subspace_dim > self.dim {
            return Err(Error::Config(format!(
                "speaker_subspace_dim + nuisance_subspace_dim ({} + {}) must not exceed dim ({})",
                self.speaker_subspace_dim, self.nuisance_subspace_dim, self.dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }
}

/// A generated dataset together with the factors that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: EmbeddingDataset,
    /// `dim × speaker_subspace_dim`, orthonormal columns.
    pub speaker_basis: Matrix,
    /// `dim × nuisance_subspace_dim`, orthonormal columns orthogonal to the speaker basis.
    pub nuisance_basis: Matrix,
    /// One latent row per speaker.
    pub speaker_latents: Matrix,
    /// One latent row per nuisance class.
    pub nuisance_latents: Matrix,
}

impl SyntheticDataset {
    /// Noise-free embedding `A·u_s + B·v_k`.
    pub fn clean_embedding(&self, speaker: usize, nuisance: usize) -> Vec<f64> {
        let dim = self.speaker_basis.rows();
        let u = self.speaker_latents.row(speaker);
        let v = self.nuisance_latents.row(nuisance);
        (0..dim)
            .map(|d| {
                let a: f64 = self.speaker_basis.row(d).iter().zip(u).map(|(x, y)| x * y).sum();
                let b: f64 = self.nuisance_basis.row(d).iter().zip(v).map(|(x, y)| x * y).sum();
                a + b
            })
            .collect()
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// Draws `x = A·u_s + B·v_k + σ·ε`.
///
/// `A` and `B` come from the thin QR factor of one Gaussian matrix, so all of
/// their columns are mutually orthonormal. Each speaker gets exactly
/// `n_per_speaker` items; nuisance classes are drawn uniformly per item.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let ds_dim = cfg.speaker_subspace_dim;
    let dn_dim = cfg.nuisance_subspace_dim;

    let mut basis_rng = rng_from(derive_seed(cfg.seed, "synth/basis"));
    let (speaker_basis, nuisance_basis) = if ds_dim + dn_dim == 0 {
        (Matrix::zeros(cfg.dim, 0), Matrix::zeros(cfg.dim, 0))
    } else {
        let g = gaussian_matrix(cfg.dim, ds_dim + dn_dim, &mut basis_rng);
        let q = nalgebra::DMatrix::from_row_slice(cfg.dim, ds_dim + dn_dim, g.as_slice())
            .qr()
            .q();
        let q = from_nalgebra(&q);
        q.split_cols(ds_dim)?
    };

    let mut latent_rng = rng_from(derive_seed(cfg.seed, "synth/latents"));
    let speaker_latents = gaussian_matrix(cfg.n_speakers, ds_dim, &mut latent_rng);
    let nuisance_latents = gaussian_matrix(cfg.n_nuisance, dn_dim, &mut latent_rng);

    // Clean class means, A·u_s and B·v_k, one row each.
    let speaker_means = speaker_latents.matmul_t(&speaker_basis)?;
    let nuisance_means = nuisance_latents.matmul_t(&nuisance_basis)?;

    let n = cfg.n_speakers * cfg.n_per_speaker;
    let mut sample_rng = rng_from(derive_seed(cfg.seed, "synth/samples"));
    let mut embeddings = Matrix::zeros(n, cfg.dim);
    let mut speakers = Vec::with_capacity(n);
    let mut nuisance = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for s in 0..cfg.n_speakers {
        for j in 0..cfg.n_per_speaker {
            let i = speakers.len();
            let k = sample_rng.random_range(0..cfg.n_nuisance);
            let row = embeddings.row_mut(i);
            for (d, x) in row.iter_mut().enumerate() {
                let eps: f64 = StandardNormal.sample(&mut sample_rng);
                *x = speaker_means[(s, d)] + nuisance_means[(k, d)] + cfg.noise_sigma * eps;
            }
            speakers.push(s);
            nuisance.push(k);
            ids.push(format!("spk{s:03}-utt{j:04}"));
        }
    }

    let mut factors = BTreeMap::new();
    factors.insert(String::from(NUISANCE_FACTOR), Factor::new(nuisance, cfg.n_nuisance)?);
    let dataset = EmbeddingDataset::new(
        embeddings,
        Factor::new(speakers, cfg.n_speakers)?,
        factors,
        ids,
    )?;
    Ok(SyntheticDataset {
        dataset,
        speaker_basis,
        nuisance_basis,
        speaker_latents,
        nuisance_latents,
    })
}
