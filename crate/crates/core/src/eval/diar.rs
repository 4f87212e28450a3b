use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::eval::{kmeans, max_weight_matching};
use crate::matrix::Matrix;
use crate::rng::rng_from;

/// A speaker-homogeneous stretch of audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    /// Reference speaker index within the session.
    pub speaker: usize,
    /// Row of this segment's embedding in the embedding matrix.
    pub embedding: usize,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// One recording with oracle segment boundaries and reference speakers.
#[derive(Debug, Clone, PartialEq)]
pub struct DiarSession {
    pub session_id: String,
    pub segments: Vec<Segment>,
    pub n_speakers: usize,
}

impl DiarSession {
    /// Checks `end > start` and that segments do not overlap; `n_speakers` is
    /// `max speaker + 1`.
    pub fn new(session_id: impl Into<String>, segments: Vec<Segment>) -> Result<Self> {
        let session_id = session_id.into();
        for s in &segments {
            if !(s.end > s.start) || !s.start.is_finite() || !s.end.is_finite() {
                return Err(Error::Input(format!(
                    "session {session_id}: segment [{}, {}] has non-positive duration",
                    s.start, s.end
                )));
            }
        }
        let mut order: Vec<&Segment> = segments.iter().collect();
        order.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in order.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::Input(format!(
                    "session {session_id}: segments [{}, {}] and [{}, {}] overlap",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        let n_speakers = segments.iter().map(|s| s.speaker + 1).max().unwrap_or(0);
        Ok(Self {
            session_id,
            segments,
            n_speakers,
        })
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }
}

/// Builds oracle-segmented sessions from a labelled dataset. Each session
/// draws `speakers_per_session` distinct speakers and lays out
/// `segments_per_session` of their utterances back to back; every chosen
/// speaker gets at least one segment. Durations are whole centiseconds in
/// `[1, 5)` seconds.
pub fn make_sessions(
    ds: &EmbeddingDataset,
    n_sessions: usize,
    speakers_per_session: usize,
    segments_per_session: usize,
    seed: u64,
) -> Result<Vec<DiarSession>> {
    if speakers_per_session == 0 || speakers_per_session > segments_per_session {
        return Err(Error::Config(format!(
            "need 1 <= speakers per session ({speakers_per_session}) <= segments per session ({segments_per_session})"
        )));
    }
    let mut by_speaker: Vec<Vec<usize>> = vec![Vec::new(); ds.n_speakers()];
    for (i, &s) in ds.speakers.labels.iter().enumerate() {
        by_speaker[s].push(i);
    }
    let mut present: Vec<usize> = (0..by_speaker.len()).filter(|&s| !by_speaker[s].is_empty()).collect();
    if present.len() < speakers_per_session {
        return Err(Error::Config(format!(
            "dataset has {} speakers, fewer than {speakers_per_session} per session",
            present.len()
        )));
    }
    let mut rng = rng_from(seed);
    let mut sessions = Vec::with_capacity(n_sessions);
    for index in 0..n_sessions {
        present.shuffle(&mut rng);
        let chosen = &present[..speakers_per_session];
        let mut turns: Vec<usize> = (0..segments_per_session)
            .map(|j| if j < speakers_per_session { j } else { rng.random_range(0..speakers_per_session) })
            .collect();
        turns.shuffle(&mut rng);
        let mut t = 0u64;
        let mut segments = Vec::with_capacity(segments_per_session);
        for local in turns {
            let pool = &by_speaker[chosen[local]];
            let embedding = pool[rng.random_range(0..pool.len())];
            let centis = rng.random_range(100..500u64);
            segments.push(Segment {
                start: t as f64 / 100.0,
                end: (t + centis) as f64 / 100.0,
                speaker: local,
                embedding,
            });
            t += centis;
        }
        sessions.push(DiarSession::new(format!("sess{index:03}"), segments)?);
    }
    Ok(sessions)
}

/// Clusters the per-segment embeddings into `n_speakers` groups.
pub fn diarize_oracle(session: &DiarSession, embeddings: &Matrix, seed: u64) -> Result<Vec<usize>> {
    if session.n_speakers > session.segments.len() {
        return Err(Error::Input(format!(
            "session {}: {} speakers but only {} segments",
            session.session_id,
            session.n_speakers,
            session.segments.len()
        )));
    }
    let rows: Vec<usize> = session.segments.iter().map(|s| s.embedding).collect();
    if let Some(&bad) = rows.iter().find(|&&r| r >= embeddings.rows()) {
        return Err(Error::Input(format!(
            "session {}: embedding row {bad} out of range",
            session.session_id
        )));
    }
    let x = embeddings.select_rows(&rows);
    Ok(kmeans(&x, session.n_speakers, seed, 300)?.assignment.labels)
}

/// Diarization error rate with oracle boundaries: the duration attributed to
/// the wrong speaker under the best one-to-one speaker mapping, over the total
/// duration. There is no missed or false-alarm speech in this setting.
pub fn der(session: &DiarSession, hypothesis: &[usize]) -> Result<f64> {
    if hypothesis.len() != session.segments.len() {
        return Err(Error::dims("der hypothesis", session.segments.len(), hypothesis.len()));
    }
    let total = session.total_duration();
    if total <= 0.0 {
        return Err(Error::Input(format!("session {} is empty", session.session_id)));
    }
    let n_hyp = hypothesis.iter().map(|h| h + 1).max().unwrap_or(0);
    let mut confusion = vec![vec![0.0; n_hyp]; session.n_speakers];
    for (seg, &h) in session.segments.iter().zip(hypothesis) {
        confusion[seg.speaker][h] += seg.duration();
    }
    let matching = max_weight_matching(&confusion);
    let matched: f64 = matching
        .iter()
        .enumerate()
        .filter_map(|(r, h)| h.map(|h| confusion[r][h]))
        .sum();
    Ok(((total - matched) / total).clamp(0.0, 1.0))
}
