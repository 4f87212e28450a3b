use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::eval::{eer, lda_fit, length_normalize, plda_fit, PldaScorer};
use crate::matrix::Matrix;
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub enroll: String,
    pub test: String,
    pub is_target: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrialList {
    pub trials: Vec<Trial>,
}

impl TrialList {
    pub fn new(trials: Vec<Trial>) -> Self {
        Self { trials }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn targets(&self) -> Vec<bool> {
        self.trials.iter().map(|t| t.is_target).collect()
    }

    /// Same trials with enrollment and test sides exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(
            self.trials
                .iter()
                .map(|t| Trial {
                    enroll: t.test.clone(),
                    test: t.enroll.clone(),
                    is_target: t.is_target,
                })
                .collect(),
        )
    }
}

/// Samples `n` distinct trials, half of them target, with disjoint
/// enrollment and test sides: every speaker's items are split at random into
/// an enrollment half and a test half. If there are fewer target pairs than
/// `n / 2`, all of them are used and nontargets fill the remainder.
pub fn make_trials(ds: &EmbeddingDataset, n: usize, seed: u64) -> Result<TrialList> {
    let mut rng = rng_from(seed);
    let mut by_speaker: Vec<Vec<usize>> = alloc::vec![Vec::new(); ds.n_speakers()];
    for (i, &s) in ds.speakers.labels.iter().enumerate() {
        by_speaker[s].push(i);
    }
    let mut enroll = Vec::new();
    let mut test = Vec::new();
    for items in by_speaker.iter_mut().filter(|v| v.len() >= 2) {
        items.shuffle(&mut rng);
        let half = items.len() / 2;
        enroll.extend_from_slice(&items[..half]);
        test.extend_from_slice(&items[half..]);
    }
    let speaker = |i: usize| ds.speakers.labels[i];
    let mut targets = Vec::new();
    let mut nontargets = Vec::new();
    for &e in &enroll {
        for &t in &test {
            if speaker(e) == speaker(t) {
                targets.push((e, t));
            } else {
                nontargets.push((e, t));
            }
        }
    }
    if targets.is_empty() || nontargets.is_empty() {
        return Err(Error::Input(
            "need at least two speakers with two items each to build trials".into(),
        ));
    }
    if targets.len() + nontargets.len() < n {
        return Err(Error::Input(alloc::format!(
            "requested {n} trials but only {} distinct pairs exist",
            targets.len() + nontargets.len()
        )));
    }
    targets.shuffle(&mut rng);
    nontargets.shuffle(&mut rng);
    let n_target = (n / 2).min(targets.len());
    let mut chosen: Vec<((usize, usize), bool)> = targets[..n_target].iter().map(|&p| (p, true)).collect();
    chosen.extend(nontargets[..n - n_target].iter().map(|&p| (p, false)));
    chosen.shuffle(&mut rng);
    Ok(TrialList::new(
        chosen
            .into_iter()
            .map(|((e, t), is_target)| Trial {
                enroll: ds.utterance_ids[e].clone(),
                test: ds.utterance_ids[t].clone(),
                is_target,
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub lda_dim: usize,
    pub em_iters: usize,
    /// Within-class ridge for LDA, relative to `trace / dim`.
    pub lda_ridge: f64,
}

impl VerifyConfig {
    /// Backend for raw input embeddings: LDA to 150 dimensions.
    pub fn raw() -> Self {
        Self {
            lda_dim: 150,
            em_iters: 10,
            lda_ridge: 0.0,
        }
    }

    /// Backend for `h1` embeddings: LDA to 96 dimensions.
    pub fn h1() -> Self {
        Self {
            lda_dim: 96,
            ..Self::raw()
        }
    }

    pub fn with_lda_dim(self, lda_dim: usize) -> Self {
        Self { lda_dim, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyResult {
    pub eer: f64,
    /// One log-likelihood ratio per trial, in trial order.
    pub scores: Vec<f64>,
    /// Ridges the PLDA fit had to add.
    pub plda_regularizations: usize,
}

/// LDA, length normalization and PLDA fitted on `train`, then used to score
/// `trials` whose ids refer to `eval`.
pub fn verify_pipeline(
    train: &EmbeddingDataset,
    eval: &EmbeddingDataset,
    trials: &TrialList,
    config: &VerifyConfig,
) -> Result<VerifyResult> {
    if train.dim() != eval.dim() {
        return Err(Error::dims("evaluation embeddings", train.dim(), eval.dim()));
    }
    let index = eval.index_of();
    let mut missing: Vec<String> = Vec::new();
    let mut pairs = Vec::with_capacity(trials.len());
    for trial in &trials.trials {
        let e = index.get(trial.enroll.as_str());
        let t = index.get(trial.test.as_str());
        for (id, found) in [(&trial.enroll, e), (&trial.test, t)] {
            if found.is_none() && !missing.contains(id) {
                missing.push(id.clone());
            }
        }
        if let (Some(&e), Some(&t)) = (e, t) {
            pairs.push((e, t));
        }
    }
    if !missing.is_empty() {
        return Err(Error::UnresolvedTrialIds(missing));
    }

    let lda = lda_fit(&train.embeddings, &train.speakers.labels, config.lda_dim, config.lda_ridge)?;
    let prepare = |x: &Matrix| lda.project(x).map(|p| length_normalize(&p));
    let train_x = prepare(&train.embeddings)?;
    let eval_x = prepare(&eval.embeddings)?;
    let fit = plda_fit(&train_x, &train.speakers.labels, config.em_iters)?;
    let scorer = PldaScorer::new(&fit.model)?;
    let scores = pairs
        .iter()
        .map(|&(e, t)| scorer.score(eval_x.row(e), eval_x.row(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyResult {
        eer: eer(&scores, &trials.targets())?,
        scores,
        plda_regularizations: fit.regularizations,
    })
}
