//! RTTM-style diarization files, `SPEAKER` records only.
//!
//! ```text
//! SPEAKER <session> <channel> <start> <duration> <utterance id> <NA> <speaker> <NA> <NA>
//! ```
//! The sixth field (orthography in full RTTM) carries the utterance id whose
//! embedding represents the segment. Other record types are skipped.

use std::collections::BTreeMap;
use std::path::Path;

use uai_core::eval::{DiarSession, Segment};
use uai_core::data::EmbeddingDataset;

use crate::error::{Error, Result};
use crate::fsutil::{read_text, write_atomic};

#[derive(Debug, Clone, PartialEq)]
pub struct RttmRecord {
    pub session: String,
    pub channel: String,
    /// Start and duration exactly as written, so rewritten files keep them.
    pub start_text: String,
    pub duration_text: String,
    pub start: f64,
    pub duration: f64,
    pub utterance: String,
    pub speaker: String,
}

impl RttmRecord {
    pub fn line(&self) -> String {
        format!(
            "SPEAKER {} {} {} {} {} <NA> {} <NA> <NA>\n",
            self.session, self.channel, self.start_text, self.duration_text, self.utterance, self.speaker
        )
    }
}

pub fn decode_rttm(text: &str, path: &Path) -> Result<Vec<RttmRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.first() != Some(&"SPEAKER") {
            continue;
        }
        if fields.len() < 8 {
            return Err(Error::parse(path, i + 1, format!("SPEAKER record needs at least 8 fields, found {}", fields.len())));
        }
        let number = |s: &str, what: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, i + 1, format!("bad {what} {s:?}")))
        };
        out.push(RttmRecord {
            session: fields[1].to_string(),
            channel: fields[2].to_string(),
            start_text: fields[3].to_string(),
            duration_text: fields[4].to_string(),
            start: number(fields[3], "start")?,
            duration: number(fields[4], "duration")?,
            utterance: fields[5].to_string(),
            speaker: fields[7].to_string(),
        });
    }
    Ok(out)
}

pub fn encode_rttm(records: &[RttmRecord]) -> String {
    records.iter().map(RttmRecord::line).collect()
}

pub fn load_rttm(path: &Path) -> Result<Vec<RttmRecord>> {
    decode_rttm(&read_text(path)?, path)
}

pub fn save_rttm(records: &[RttmRecord], path: &Path) -> Result<()> {
    write_atomic(path, encode_rttm(records).as_bytes())
}

/// Records for generated sessions. Times are whole centiseconds and the
/// speaker name is the dataset speaker label of the segment's embedding.
pub fn sessions_to_rttm(sessions: &[DiarSession], ds: &EmbeddingDataset) -> Vec<RttmRecord> {
    let mut out = Vec::new();
    for s in sessions {
        for seg in &s.segments {
            let start = format!("{:.2}", seg.start);
            let duration = format!("{:.2}", seg.end - seg.start);
            out.push(RttmRecord {
                session: s.session_id.clone(),
                channel: "1".into(),
                start: start.parse().expect("formatted"),
                duration: duration.parse().expect("formatted"),
                start_text: start,
                duration_text: duration,
                utterance: ds.utterance_ids[seg.embedding].clone(),
                speaker: format!("spk{:03}", ds.speakers.labels[seg.embedding]),
            });
        }
    }
    out
}

/// A reference session rebuilt from its records, with the record index of
/// every segment.
#[derive(Debug)]
pub struct ParsedSession {
    pub session: DiarSession,
    pub records: Vec<usize>,
    /// Local speaker index to reference name.
    pub speaker_names: Vec<String>,
}

/// Rounds to whole nanoseconds, so that `start + duration` of one record and
/// the start of the record after it agree when both were written in decimal.
fn snap(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

/// Groups records by session (in first-seen order), resolves utterance ids
/// against `ds` and numbers each session's speakers by sorted name.
pub fn sessions_from_rttm(records: &[RttmRecord], ds: &EmbeddingDataset, path: &Path) -> Result<Vec<ParsedSession>> {
    let index = ds.index_of();
    let mut missing: Vec<&str> = Vec::new();
    for r in records {
        if !index.contains_key(r.utterance.as_str()) && !missing.contains(&r.utterance.as_str()) {
            missing.push(&r.utterance);
        }
    }
    if !missing.is_empty() {
        return Err(Error::parse(path, 0, format!("utterance ids not in the embeddings: {}", missing.join(", "))));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if !groups.contains_key(r.session.as_str()) {
            order.push(&r.session);
        }
        groups.entry(&r.session).or_default().push(i);
    }
    let mut out = Vec::new();
    for name in order {
        let rows = &groups[name];
        let mut speakers: Vec<String> = rows.iter().map(|&i| records[i].speaker.clone()).collect();
        speakers.sort();
        speakers.dedup();
        let segments = rows
            .iter()
            .map(|&i| {
                let r = &records[i];
                Segment {
                    start: snap(r.start),
                    end: snap(r.start + r.duration),
                    speaker: speakers.binary_search(&r.speaker).expect("collected"),
                    embedding: index[r.utterance.as_str()],
                }
            })
            .collect();
        out.push(ParsedSession {
            session: DiarSession::new(name, segments)?,
            records: rows.clone(),
            speaker_names: speakers,
        });
    }
    Ok(out)
}
