//! Interleaved text/audio token streams.
//!
//! A stream is an ordered list of maximal text runs (opaque text-token ids)
//! and audio runs ([`TokenFrame`]s), tagged with one of the seven pre-training
//! data formats. On the wire, every modality boundary carries a switch token
//! (distinct ids for text->audio and audio->text) and every audio run ends with
//! one end-of-audio frame.

mod frame;
mod mask;
mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use frame::{sum_embeddings, EmbeddingSpec, EmbeddingTable, TokenFrame};
pub use mask::{build_loss_mask, segment_flags, LossMask};
pub use wire::{deserialize, serialize, SerializeOptions, SpecialTokens, Vocab, WireToken};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Text,
    Audio,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Text(Vec<u32>),
    Audio(Vec<TokenFrame>),
}

impl Segment {
    pub fn kind(&self) -> SegmentKind {
        match self {
            Segment::Text(_) => SegmentKind::Text,
            Segment::Audio(_) => SegmentKind::Audio,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Segment::Text(t) => t.len(),
            Segment::Audio(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The seven data formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FormatTag {
    /// `<prompt, audio, transcript>`
    #[serde(rename = "ASR")]
    Asr,
    /// `<prompt, audio, response>`
    #[serde(rename = "AQA")]
    Aqa,
    /// `<prompt, audio, translated_text>`
    #[serde(rename = "S2TT")]
    S2tt,
    /// `<audio_1, text_2, audio_3, text_4, ...>`
    #[serde(rename = "INTLV")]
    Intlv,
    /// `<text, audio>`
    #[serde(rename = "TTS")]
    Tts,
    /// `<text_1, audio_1, text_2, audio_2, ...>`
    #[serde(rename = "ITTS")]
    Itts,
    /// `<audio>`
    #[serde(rename = "PURE_AUDIO")]
    PureAudio,
}

impl FormatTag {
    pub const ALL: [FormatTag; 7] = [
        FormatTag::Asr,
        FormatTag::Aqa,
        FormatTag::S2tt,
        FormatTag::Intlv,
        FormatTag::Tts,
        FormatTag::Itts,
        FormatTag::PureAudio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormatTag::Asr => "ASR",
            FormatTag::Aqa => "AQA",
            FormatTag::S2tt => "S2TT",
            FormatTag::Intlv => "INTLV",
            FormatTag::Tts => "TTS",
            FormatTag::Itts => "ITTS",
            FormatTag::PureAudio => "PURE_AUDIO",
        }
    }

    fn check_layout(self, kinds: &[SegmentKind]) -> Result<()> {
        use SegmentKind::{Audio as A, Text as T};
        let ok = match self {
            FormatTag::Asr | FormatTag::Aqa | FormatTag::S2tt => kinds == [T, A, T],
            FormatTag::Tts => kinds == [T, A],
            FormatTag::PureAudio => kinds.is_empty() || kinds == [A],
            FormatTag::Itts => kinds.first().is_none_or(|k| *k == T),
            FormatTag::Intlv => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidStream(format!("layout {kinds:?} does not fit format {self}")))
        }
    }
}

impl fmt::Display for FormatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FormatTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown format tag '{s}'")))
    }
}

/// Validated sequence of alternating, non-empty text and audio runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleavedStream {
    format: FormatTag,
    segments: Vec<Segment>,
}

impl InterleavedStream {
    pub fn new(format: FormatTag, segments: Vec<Segment>) -> Result<Self> {
        if let Some(i) = segments.iter().position(Segment::is_empty) {
            return Err(Error::InvalidStream(format!("segment {i} is empty")));
        }
        if let Some(i) = segments.windows(2).position(|w| w[0].kind() == w[1].kind()) {
            return Err(Error::InvalidStream(format!(
                "segments {i} and {} are both {:?}",
                i + 1,
                segments[i].kind()
            )));
        }
        let kinds: Vec<SegmentKind> = segments.iter().map(Segment::kind).collect();
        format.check_layout(&kinds)?;
        Ok(Self { format, segments })
    }

    pub fn format(&self) -> FormatTag {
        self.format
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn audio_frame_count(&self) -> usize {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Audio(f) => f.len(),
                Segment::Text(_) => 0,
            })
            .sum()
    }

    pub fn text_token_count(&self) -> usize {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Text(t) => t.len(),
                Segment::Audio(_) => 0,
            })
            .sum()
    }
}

/// Audio frames per second of stream time.
pub fn frames_per_second_check(stream: &InterleavedStream, audio_duration_s: f64) -> Result<f64> {
    if !(audio_duration_s > 0.0) {
        return Err(Error::config(format!("audio duration must be positive, got {audio_duration_s}")));
    }
    Ok(stream.audio_frame_count() as f64 / audio_duration_s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn audio(n: usize) -> Segment {
        Segment::Audio((0..n).map(|i| TokenFrame::new(vec![i as u32 % 4, 0])).collect())
    }

    #[test]
    fn adjacent_same_kind_rejected() {
        let err = InterleavedStream::new(FormatTag::Intlv, vec![audio(2), audio(1)]);
        assert!(matches!(err, Err(Error::InvalidStream(_))));
        let empty = InterleavedStream::new(FormatTag::Intlv, vec![Segment::Text(vec![])]);
        assert!(matches!(empty, Err(Error::InvalidStream(_))));
    }

    #[test]
    fn layouts_follow_format() {
        let t = || Segment::Text(vec![5, 6]);
        assert!(InterleavedStream::new(FormatTag::Asr, vec![t(), audio(3), t()]).is_ok());
        assert!(InterleavedStream::new(FormatTag::Asr, vec![t(), audio(3)]).is_err());
        assert!(InterleavedStream::new(FormatTag::Tts, vec![t(), audio(3)]).is_ok());
        assert!(InterleavedStream::new(FormatTag::Itts, vec![audio(1), t()]).is_err());
        assert!(InterleavedStream::new(FormatTag::PureAudio, vec![]).is_ok());
        assert!(InterleavedStream::new(FormatTag::PureAudio, vec![t()]).is_err());
    }

    #[test]
    fn tag_parsing() {
        for tag in FormatTag::ALL {
            assert_eq!(tag.as_str().parse::<FormatTag>().unwrap(), tag);
            let json = serde_json::to_string(&tag).unwrap();
            assert_eq!(json, format!("\"{tag}\""));
        }
        assert!(matches!("VIDEO".parse::<FormatTag>(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn frame_rate_arithmetic() {
        let s12 = InterleavedStream::new(FormatTag::PureAudio, vec![audio(12)]).unwrap();
        assert!((frames_per_second_check(&s12, 0.96).unwrap() - 12.5).abs() < 1e-12);
        let s25 = InterleavedStream::new(FormatTag::PureAudio, vec![audio(25)]).unwrap();
        assert_eq!(frames_per_second_check(&s25, 2.0).unwrap(), 12.5);
        assert!(matches!(frames_per_second_check(&s25, 0.0), Err(Error::InvalidConfig(_))));
    }
}
