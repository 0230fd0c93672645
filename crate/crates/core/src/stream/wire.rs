use serde::{Deserialize, Serialize};

use super::{FormatTag, InterleavedStream, Segment, SegmentKind, TokenFrame};
use crate::error::{Error, Result};

/// Modality-switch ids, which live in the text-token id space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub switch_ta: u32,
    pub switch_at: u32,
}

impl Default for SpecialTokens {
    /// Just past the Unicode scalar range, so code-point text ids never collide.
    fn default() -> Self {
        Self {
            switch_ta: 0x11_0000,
            switch_at: 0x11_0001,
        }
    }
}

/// Everything needed to read and write the wire form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pub special: SpecialTokens,
    /// `K_l` per layer; index `K_l` is that layer's end-of-audio value.
    pub codebook_sizes: Vec<u32>,
}

impl Vocab {
    pub fn new(special: SpecialTokens, codebook_sizes: Vec<u32>) -> Result<Self> {
        if special.switch_ta == special.switch_at {
            return Err(Error::config("switch_ta and switch_at must differ"));
        }
        if codebook_sizes.is_empty() {
            return Err(Error::config("need at least one codebook"));
        }
        Ok(Self {
            special,
            codebook_sizes,
        })
    }

    fn is_switch(&self, id: u32) -> bool {
        id == self.special.switch_ta || id == self.special.switch_at
    }

    fn opening_switch(&self, kind: SegmentKind) -> u32 {
        match kind {
            SegmentKind::Audio => self.special.switch_ta,
            SegmentKind::Text => self.special.switch_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SerializeOptions {
    /// Emit a switch before the first segment and after the last one.
    pub edge_switches: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireToken {
    Text(u32),
    Audio(TokenFrame),
}

/// Flatten a stream to wire tokens.
pub fn serialize(stream: &InterleavedStream, vocab: &Vocab, opts: SerializeOptions) -> Result<Vec<WireToken>> {
    let segments = stream.segments();
    let mut out = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if i > 0 || opts.edge_switches {
            out.push(WireToken::Text(vocab.opening_switch(seg.kind())));
        }
        match seg {
            Segment::Text(ids) => {
                if let Some(id) = ids.iter().find(|&&id| vocab.is_switch(id)) {
                    return Err(Error::InvalidStream(format!("text segment {i} contains switch id {id}")));
                }
                out.extend(ids.iter().map(|&id| WireToken::Text(id)));
            }
            Segment::Audio(frames) => {
                for f in frames {
                    f.validate(&vocab.codebook_sizes)?;
                    if f.is_eoa(&vocab.codebook_sizes) {
                        return Err(Error::InvalidStream(format!("audio segment {i} contains an end-of-audio frame")));
                    }
                    out.push(WireToken::Audio(f.clone()));
                }
                out.push(WireToken::Audio(TokenFrame::eoa(&vocab.codebook_sizes)));
            }
        }
    }
    if opts.edge_switches {
        if let Some(last) = segments.last() {
            let closing = match last.kind() {
                SegmentKind::Audio => SegmentKind::Text,
                SegmentKind::Text => SegmentKind::Audio,
            };
            out.push(WireToken::Text(vocab.opening_switch(closing)));
        }
    }
    Ok(out)
}

/// Parse wire tokens back into a stream of the given format.
pub fn deserialize(wire: &[WireToken], vocab: &Vocab, format: FormatTag, opts: SerializeOptions) -> Result<InterleavedStream> {
    let malformed = |pos: usize, msg: &str| Error::MalformedWire(format!("at token {pos}: {msg}"));
    let mut segments = Vec::new();
    if wire.is_empty() {
        return InterleavedStream::new(format, segments);
    }

    let mut pos = 0;
    let mut kind = if opts.edge_switches {
        pos = 1;
        match &wire[0] {
            WireToken::Text(id) if *id == vocab.special.switch_ta => SegmentKind::Audio,
            WireToken::Text(id) if *id == vocab.special.switch_at => SegmentKind::Text,
            _ => return Err(malformed(0, "expected a leading switch token")),
        }
    } else {
        match &wire[0] {
            WireToken::Text(id) if vocab.is_switch(*id) => return Err(malformed(0, "leading switch token")),
            WireToken::Text(_) => SegmentKind::Text,
            WireToken::Audio(_) => SegmentKind::Audio,
        }
    };

    loop {
        let start = pos;
        match kind {
            SegmentKind::Text => {
                let mut ids = Vec::new();
                while let Some(WireToken::Text(id)) = wire.get(pos) {
                    if vocab.is_switch(*id) {
                        break;
                    }
                    ids.push(*id);
                    pos += 1;
                }
                if ids.is_empty() {
                    return Err(malformed(start, "empty text run"));
                }
                if let Some(WireToken::Audio(_)) = wire.get(pos) {
                    return Err(malformed(pos, "audio frame without a switch token"));
                }
                segments.push(Segment::Text(ids));
            }
            SegmentKind::Audio => {
                let mut frames = Vec::new();
                loop {
                    match wire.get(pos) {
                        None => return Err(malformed(pos, "audio run without end-of-audio frame")),
                        Some(WireToken::Text(_)) => {
                            return Err(malformed(pos, "text token inside an audio run without end-of-audio frame"))
                        }
                        Some(WireToken::Audio(f)) => {
                            f.validate(&vocab.codebook_sizes)
                                .map_err(|e| malformed(pos, &e.to_string()))?;
                            pos += 1;
                            if f.is_eoa(&vocab.codebook_sizes) {
                                break;
                            }
                            frames.push(f.clone());
                        }
                    }
                }
                if frames.is_empty() {
                    return Err(malformed(start, "empty audio run"));
                }
                if let Some(WireToken::Audio(_)) = wire.get(pos) {
                    return Err(malformed(pos, "audio frame after end-of-audio without a switch token"));
                }
                segments.push(Segment::Audio(frames));
            }
        }

        let next = match wire.get(pos) {
            None if opts.edge_switches => return Err(malformed(pos, "missing trailing switch token")),
            None => break,
            Some(WireToken::Text(id)) if *id == vocab.special.switch_ta => SegmentKind::Audio,
            Some(WireToken::Text(_)) => SegmentKind::Text,
            Some(WireToken::Audio(_)) => unreachable!("audio tokens are consumed or rejected above"),
        };
        if next == kind {
            return Err(malformed(pos, "switch token into the current modality"));
        }
        pos += 1;
        if pos == wire.len() {
            if opts.edge_switches {
                break;
            }
            return Err(malformed(pos - 1, "dangling switch token"));
        }
        kind = next;
    }
    InterleavedStream::new(format, segments)
}
