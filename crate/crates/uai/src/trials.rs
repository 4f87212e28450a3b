//! Trial lists (`enroll<TAB>test<TAB>target|nontarget`) and score files
//! (`enroll<TAB>test<TAB>score`).

use std::path::Path;

use uai_core::eval::{Trial, TrialList};

use crate::error::{Error, Result};
use crate::fsutil::{read_text, write_atomic};

pub fn encode_trials(trials: &TrialList) -> String {
    trials
        .trials
        .iter()
        .map(|t| {
            let kind = if t.is_target { "target" } else { "nontarget" };
            format!("{}\t{}\t{kind}\n", t.enroll, t.test)
        })
        .collect()
}

pub fn decode_trials(text: &str, path: &Path) -> Result<TrialList> {
    let mut trials = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [enroll, test, kind] = fields[..] else {
            return Err(Error::parse(path, i + 1, format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let is_target = match kind {
            "target" => true,
            "nontarget" => false,
            other => return Err(Error::parse(path, i + 1, format!("expected target or nontarget, found {other:?}"))),
        };
        trials.push(Trial {
            enroll: enroll.to_string(),
            test: test.to_string(),
            is_target,
        });
    }
    Ok(TrialList::new(trials))
}

pub fn save_trials(trials: &TrialList, path: &Path) -> Result<()> {
    write_atomic(path, encode_trials(trials).as_bytes())
}

pub fn load_trials(path: &Path) -> Result<TrialList> {
    decode_trials(&read_text(path)?, path)
}

/// Scores are written in shortest round-trip form.
pub fn encode_scores(trials: &TrialList, scores: &[f64]) -> String {
    trials
        .trials
        .iter()
        .zip(scores)
        .map(|(t, s)| format!("{}\t{}\t{s}\n", t.enroll, t.test))
        .collect()
}

pub fn decode_scores(text: &str, path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [enroll, test, score] = fields[..] else {
            return Err(Error::parse(path, i + 1, "expected enroll<TAB>test<TAB>score"));
        };
        let score = score
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad score {score:?}")))?;
        out.push((enroll.to_string(), test.to_string(), score));
    }
    Ok(out)
}
