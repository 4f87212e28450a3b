use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Class labels for one annotated factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Factor {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Input(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self { labels, n_classes })
    }

    /// Class count taken as `max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Self { labels, n_classes }
    }
}

/// `N` embeddings with their speaker labels, optional nuisance annotations and
/// utterance ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub embeddings: Matrix,
    pub speakers: Factor,
    pub nuisance: BTreeMap<String, Factor>,
    pub utterance_ids: Vec<String>,
}

impl EmbeddingDataset {
    pub fn new(
        embeddings: Matrix,
        speakers: Factor,
        nuisance: BTreeMap<String, Factor>,
        utterance_ids: Vec<String>,
    ) -> Result<Self> {
        let n = embeddings.rows();
        if speakers.labels.len() != n {
            return Err(Error::dims("speaker labels", n, speakers.labels.len()));
        }
        if utterance_ids.len() != n {
            return Err(Error::dims("utterance ids", n, utterance_ids.len()));
        }
        for (name, factor) in &nuisance {
            if factor.labels.len() != n {
                return Err(Error::Input(format!(
                    "factor {name:?} has {} labels for {n} embeddings",
                    factor.labels.len()
                )));
            }
        }
        Ok(Self {
            embeddings,
            speakers,
            nuisance,
            utterance_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn n_speakers(&self) -> usize {
        self.speakers.n_classes
    }

    /// Labels of a named factor; `"speaker"` is the speaker labels.
    pub fn factor(&self, name: &str) -> Option<&Factor> {
        if name == "speaker" {
            Some(&self.speakers)
        } else {
            self.nuisance.get(name)
        }
    }

    /// Sub-dataset of the given items, in order. Class counts are kept.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let pick = |f: &Factor| Factor {
            labels: indices.iter().map(|&i| f.labels[i]).collect(),
            n_classes: f.n_classes,
        };
        Self {
            embeddings: self.embeddings.select_rows(indices),
            speakers: pick(&self.speakers),
            nuisance: self
                .nuisance
                .iter()
                .map(|(k, f)| (k.clone(), pick(f)))
                .collect(),
            utterance_ids: indices.iter().map(|&i| self.utterance_ids[i].clone()).collect(),
        }
    }

    /// Same labels and ids with different embeddings (e.g. extracted latents).
    pub fn with_embeddings(&self, embeddings: Matrix) -> Result<Self> {
        if embeddings.rows() != self.len() {
            return Err(Error::dims("replacement embeddings", self.len(), embeddings.rows()));
        }
        Ok(Self {
            embeddings,
            ..self.clone()
        })
    }

    pub fn index_of(&self) -> BTreeMap<&str, usize> {
        self.utterance_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }
}
