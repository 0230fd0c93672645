use super::{FormatTag, InterleavedStream, Segment, SegmentKind, SerializeOptions};

/// One flag per serialized token; `true` means the position contributes to the training loss.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct LossMask(pub Vec<bool>);

impl LossMask {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }
}

/// Loss flag of every segment.
///
/// * INTLV: audio excluded, text trained.
/// * ITTS: the first text segment excluded, everything after it trained.
/// * ASR / AQA / S2TT: prompt and audio excluded, the target text trained.
/// * TTS: input text excluded, audio trained.
/// * PURE_AUDIO: everything trained.
pub fn segment_flags(stream: &InterleavedStream) -> Vec<bool> {
    let segments = stream.segments();
    match stream.format() {
        FormatTag::Intlv => segments.iter().map(|s| s.kind() == SegmentKind::Text).collect(),
        FormatTag::Itts => {
            let first_text = segments.iter().position(|s| s.kind() == SegmentKind::Text);
            (0..segments.len()).map(|i| Some(i) != first_text).collect()
        }
        FormatTag::Asr | FormatTag::Aqa | FormatTag::S2tt => {
            let last = segments.len().saturating_sub(1);
            (0..segments.len())
                .map(|i| i == last && segments[i].kind() == SegmentKind::Text)
                .collect()
        }
        FormatTag::Tts => segments.iter().map(|s| s.kind() == SegmentKind::Audio).collect(),
        FormatTag::PureAudio => vec![true; segments.len()],
    }
}

/// Loss mask aligned with [`super::serialize`] under the same options.
///
/// A switch token takes the flag of the segment it opens; the end-of-audio
/// frame and a trailing edge switch take the flag of the segment they close.
pub fn build_loss_mask(stream: &InterleavedStream, opts: SerializeOptions) -> LossMask {
    let flags = segment_flags(stream);
    let mut out = Vec::new();
    for (i, (seg, &flag)) in stream.segments().iter().zip(&flags).enumerate() {
        if i > 0 || opts.edge_switches {
            out.push(flag);
        }
        let n = match seg {
            Segment::Text(t) => t.len(),
            Segment::Audio(f) => f.len() + 1,
        };
        out.extend(std::iter::repeat_n(flag, n));
    }
    if opts.edge_switches {
        if let Some(&last) = flags.last() {
            out.push(last);
        }
    }
    LossMask(out)
}
