//! Interleaved-record assembly from aligned (text, audio-token) utterances.
//!
//! Text is split at punctuation, utterances are arranged into INTLV
//! (`audio_1, text_2, audio_3, ...`) or ITTS (`text_1, audio_1, text_2, ...`)
//! streams, and corpus statistics are tallied per format.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::stream::{FormatTag, InterleavedStream, Segment, TokenFrame};

/// Sentence-ending punctuation for English and Chinese.
pub const DEFAULT_PUNCTUATION: &[char] = &['.', '!', '?', ';', '。', '！', '？', '；'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Crawl,
    Synthetic,
}

/// One utterance: its transcript and the audio tokens spoken over `duration_s` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub text: String,
    pub frames: Vec<TokenFrame>,
    pub duration_s: f64,
    pub provenance: Provenance,
}

impl AlignedPair {
    pub fn new(text: impl Into<String>, frames: Vec<TokenFrame>, duration_s: f64, provenance: Provenance) -> Result<Self> {
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(Error::config(format!("duration must be positive, got {duration_s}")));
        }
        Ok(Self {
            text: text.into(),
            frames,
            duration_s,
            provenance,
        })
    }

    /// Text token ids: one id per Unicode scalar value.
    pub fn text_ids(&self) -> Vec<u32> {
        text_to_ids(&self.text)
    }
}

/// Stand-in tokenizer: Unicode code points as ids.
pub fn text_to_ids(text: &str) -> Vec<u32> {
    text.chars().map(u32::from).collect()
}

/// Split after every rule character, dropping empty pieces. Joining the
/// result gives back `text`.
pub fn segment_text(text: &str, rules: &[char]) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        current.push(c);
        if rules.contains(&c) {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Split a pair at punctuation, dividing its frames and duration in
/// proportion to the character count of each piece.
pub fn split_pair(pair: &AlignedPair, rules: &[char]) -> Result<Vec<AlignedPair>> {
    let pieces = segment_text(&pair.text, rules);
    if pieces.len() <= 1 {
        return Ok(vec![pair.clone()]);
    }
    let total_chars: usize = pieces.iter().map(|p| p.chars().count()).sum();
    let n_frames = pair.frames.len();
    let mut out = Vec::with_capacity(pieces.len());
    let mut chars_so_far = 0usize;
    let mut frame_start = 0usize;
    for piece in pieces {
        chars_so_far += piece.chars().count();
        let frame_end = (n_frames * chars_so_far).div_ceil(total_chars).min(n_frames);
        let share = piece.chars().count() as f64 / total_chars as f64;
        out.push(AlignedPair::new(
            piece,
            pair.frames[frame_start..frame_end].to_vec(),
            pair.duration_s * share,
            pair.provenance,
        )?);
        frame_start = frame_end;
    }
    Ok(out)
}

/// Which modality an INTLV record starts with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntlvStart {
    #[default]
    Audio,
    Text,
    /// Drawn per record from the alternation seed.
    Random,
}

fn pair_segment(pair: &AlignedPair, audio: bool, index: usize) -> Result<Segment> {
    if audio {
        if pair.frames.is_empty() {
            return Err(Error::InsufficientData(format!("pair {index} has no audio frames")));
        }
        Ok(Segment::Audio(pair.frames.clone()))
    } else {
        let ids = pair.text_ids();
        if ids.is_empty() {
            return Err(Error::InsufficientData(format!("pair {index} has no text")));
        }
        Ok(Segment::Text(ids))
    }
}

/// `<audio_1, text_2, audio_3, text_4, ...>`: consecutive pairs contribute
/// alternately their audio and their text.
pub fn build_intlv(pairs: &[AlignedPair], start: IntlvStart, alternation_seed: u64) -> Result<InterleavedStream> {
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!("INTLV needs at least 2 pairs, got {}", pairs.len())));
    }
    let audio_first = match start {
        IntlvStart::Audio => true,
        IntlvStart::Text => false,
        IntlvStart::Random => seed::rng(alternation_seed).gen::<bool>(),
    };
    let segments = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| pair_segment(p, (i % 2 == 0) == audio_first, i))
        .collect::<Result<Vec<_>>>()?;
    InterleavedStream::new(FormatTag::Intlv, segments)
}

/// `<text_1, audio_1, text_2, audio_2, ...>`: every pair's text followed by its audio.
pub fn build_itts(pairs: &[AlignedPair]) -> Result<InterleavedStream> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("ITTS needs at least 1 pair".into()));
    }
    let mut segments = Vec::with_capacity(pairs.len() * 2);
    for (i, p) in pairs.iter().enumerate() {
        segments.push(pair_segment(p, false, i)?);
        segments.push(pair_segment(p, true, i)?);
    }
    InterleavedStream::new(FormatTag::Itts, segments)
}

/// Per-format record counts and corpus totals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub records: BTreeMap<FormatTag, usize>,
    pub audio_hours: f64,
    pub text_tokens: usize,
    pub audio_frames: usize,
    /// Total seconds, kept so that merging stays exact.
    pub audio_seconds: f64,
}

impl CorpusStats {
    pub fn add(&mut self, stream: &InterleavedStream, duration_s: f64) {
        *self.records.entry(stream.format()).or_insert(0) += 1;
        self.text_tokens += stream.text_token_count();
        self.audio_frames += stream.audio_frame_count();
        self.audio_seconds += duration_s;
        self.audio_hours = self.audio_seconds / 3600.0;
    }

    pub fn merge(&mut self, other: &CorpusStats) {
        for (tag, n) in &other.records {
            *self.records.entry(*tag).or_insert(0) += n;
        }
        self.text_tokens += other.text_tokens;
        self.audio_frames += other.audio_frames;
        self.audio_seconds += other.audio_seconds;
        self.audio_hours = self.audio_seconds / 3600.0;
    }

    pub fn total_records(&self) -> usize {
        self.records.values().sum()
    }
}

/// Tally a corpus of (stream, audio duration in seconds) records.
pub fn corpus_stats<'a>(records: impl IntoIterator<Item = (&'a InterleavedStream, f64)>) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for (s, d) in records {
        stats.add(s, d);
    }
    stats
}
